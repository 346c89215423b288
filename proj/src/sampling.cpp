#include "fluidrecon/sampling.hpp"

#include "fluidrecon/errors.hpp"

#include <algorithm>

namespace fluidrecon {

std::vector<double> stratified_times(int n, double t_min, double t_max, Rng& rng) {
  if (n < 1) throw DomainError("stratified_times: need at least one sample");
  if (!(t_min < t_max)) throw DomainError("stratified_times: empty interval");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double width = (t_max - t_min) / n;
  for (int k = 0; k < n; ++k) {
    const double lo = t_min + k * width;
    // Clamp the right edge so floating-point rounding never leaks into bin k+1.
    const double hi = k + 1 == n ? t_max : t_min + (k + 1) * width;
    out[k] = std::min(lo + (hi - lo) * uniform01(rng), std::nextafter(hi, lo));
    out[k] = std::max(out[k], lo);
  }
  return out;
}

Eigen::Matrix3Xd sample_box(const Aabb& box, Eigen::Index m, Rng& rng) {
  if (m < 1) throw DomainError("sample_box: need at least one sample");
  if (box.degenerate()) throw DomainError("sample_box: degenerate bounding box");
  Eigen::Matrix3Xd out(3, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int a = 0; a < 3; ++a) out(a, i) = uniform(rng, box.lo(a), box.hi(a));
  }
  return out;
}

double warp_delta(double progress, double frame_gap, Rng& rng) {
  if (!(progress >= 0.0 && progress <= 1.0)) throw DomainError("warp_delta: progress outside [0, 1]");
  if (!(frame_gap > 0.0)) throw DomainError("warp_delta: frame gap must be positive");
  const double half = progress * frame_gap;
  return uniform(rng, -half, half);
}

Eigen::Matrix3Xd sample_supervision_points(const Aabb& box, const OrientedPointCloud& cloud,
                                           Eigen::Index m, double uniform_fraction, double sigma,
                                           Rng& rng) {
  if (m < 1) throw DomainError("sample_supervision_points: need at least one sample");
  if (box.degenerate()) throw DomainError("sample_supervision_points: degenerate bounding box");
  const auto n_uniform = static_cast<Eigen::Index>(std::llround(uniform_fraction * static_cast<double>(m)));
  if (n_uniform < m && cloud.size() == 0) throw DomainError("sample_supervision_points: empty cloud");
  Eigen::Matrix3Xd out(3, m);
  out.leftCols(n_uniform) = sample_box(box, std::max<Eigen::Index>(n_uniform, 1), rng).leftCols(n_uniform);
  for (Eigen::Index i = n_uniform; i < m; ++i) {
    const auto src = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(cloud.size()));
    for (int a = 0; a < 3; ++a) {
      const double v = cloud.points(a, src) + sigma * standard_normal(rng);
      out(a, i) = std::clamp(v, box.lo(a), box.hi(a));
    }
  }
  return out;
}

Eigen::Matrix4Xd SampleBatch::spacetime() const {
  Eigen::Index total = 0;
  for (const auto& block : space_points) total += block.cols();
  Eigen::Matrix4Xd out(4, total);
  Eigen::Index c = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto m = space_points[k].cols();
    out.block(0, c, 3, m) = space_points[k];
    out.block(3, c, 1, m).setConstant(times[k]);
    c += m;
  }
  return out;
}

SampleBatch sample_spacetime(const Aabb& box, double t_min, double t_max, int n_times,
                             Eigen::Index points_per_time, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  SampleBatch batch;
  batch.rng_seed = seed;
  batch.times = stratified_times(n_times, t_min, t_max, rng);
  for (int k = 0; k < n_times; ++k) batch.space_points.push_back(sample_box(box, points_per_time, rng));
  return batch;
}

}  // namespace fluidrecon
