#include "fluidrecon/evaluation.hpp"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/geometry.hpp"
#include "fluidrecon/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>

namespace fluidrecon {

namespace {

double mean_nearest(const Eigen::Matrix3Xd& from, const KdTree& to, bool squared) {
  Eigen::VectorXd d(from.cols());
  parallel_for(from.cols(), [&](std::ptrdiff_t i) {
    const double dist = to.nearest(from.col(i)).distance;
    d(i) = squared ? dist * dist : dist;
  });
  return d.mean();
}

}  // namespace

double chamfer(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b, bool squared) {
  if (a.cols() == 0 || b.cols() == 0) throw DomainError("chamfer: point sets must be nonempty");
  const KdTree tree_a(a), tree_b(b);
  return 0.5 * (mean_nearest(a, tree_b, squared) + mean_nearest(b, tree_a, squared));
}

Eigen::Matrix3Xd sample_surface(const TriMesh& mesh, Eigen::Index n, Rng& rng) {
  if (mesh.empty()) return mesh.vertices;
  std::vector<double> cumulative(static_cast<std::size_t>(mesh.n_triangles()));
  double total = 0.0;
  for (Eigen::Index f = 0; f < mesh.n_triangles(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.col(mesh.triangles(0, f));
    const Eigen::Vector3d b = mesh.vertices.col(mesh.triangles(1, f));
    const Eigen::Vector3d c = mesh.vertices.col(mesh.triangles(2, f));
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative[f] = total;
  }
  Eigen::Matrix3Xd out(3, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double u = uniform01(rng) * total;
    auto f = static_cast<Eigen::Index>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    f = std::min(f, mesh.n_triangles() - 1);
    double r1 = std::sqrt(uniform01(rng));
    const double r2 = uniform01(rng);
    out.col(s) = (1.0 - r1) * mesh.vertices.col(mesh.triangles(0, f)) +
                 r1 * (1.0 - r2) * mesh.vertices.col(mesh.triangles(1, f)) +
                 r1 * r2 * mesh.vertices.col(mesh.triangles(2, f));
  }
  return out;
}

double mesh_chamfer(const TriMesh& pred, const TriMesh& gt, Eigen::Index n_samples, std::uint64_t seed,
                    bool squared) {
  Rng rng_pred = make_rng({seed});
  Rng rng_gt = make_rng({seed});
  return chamfer(sample_surface(pred, n_samples, rng_pred), sample_surface(gt, n_samples, rng_gt), squared);
}

MatchingCurve matching_curve(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  if (errors.empty()) throw DomainError("matching_curve: no errors");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw DomainError("matching_curve: thresholds must be ascending");
  }
  std::vector<double> sorted(errors.size());
  std::transform(errors.begin(), errors.end(), sorted.begin(), [](double e) { return std::clamp(e, 0.0, 1.0); });
  std::sort(sorted.begin(), sorted.end());
  MatchingCurve curve{thresholds, {}};
  for (double t : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.fractions.push_back(static_cast<double>(count) / static_cast<double>(sorted.size()));
  }
  return curve;
}

std::vector<double> uniform_thresholds(int count) {
  if (count < 2) throw DomainError("uniform_thresholds: need at least two thresholds");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) t[k] = static_cast<double>(k) / (count - 1);
  return t;
}

}  // namespace fluidrecon
