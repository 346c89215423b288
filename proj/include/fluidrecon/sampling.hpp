#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/random.hpp"

#include <Eigen/Core>

#include <vector>

namespace fluidrecon {

/// One uniform draw in each of n equal sub-intervals of [t_min, t_max], ascending.
std::vector<double> stratified_times(int n, double t_min, double t_max, Rng& rng);

/// m i.i.d. uniform points inside the box (3 x m).
Eigen::Matrix3Xd sample_box(const Aabb& box, Eigen::Index m, Rng& rng);

/// Uniform offset in [-progress * frame_gap, progress * frame_gap].
double warp_delta(double progress, double frame_gap, Rng& rng);

/// Supervision points for the SDF loss: a `uniform_fraction` share uniform in
/// the box, the rest cloud samples jittered by N(0, sigma^2) per axis and
/// clamped back into the box.
Eigen::Matrix3Xd sample_supervision_points(const Aabb& box, const OrientedPointCloud& cloud,
                                           Eigen::Index m, double uniform_fraction, double sigma,
                                           Rng& rng);

/// Monte Carlo points for one epoch: `times` and one 3 x points_per_time
/// block per time.
struct SampleBatch {
  std::vector<double> times;
  std::vector<Eigen::Matrix3Xd> space_points;
  std::uint64_t rng_seed = 0;

  /// Columns (x, y, z, t) of every sample, time-major.
  Eigen::Matrix4Xd spacetime() const;
};

SampleBatch sample_spacetime(const Aabb& box, double t_min, double t_max, int n_times,
                             Eigen::Index points_per_time, std::uint64_t seed);

}  // namespace fluidrecon
