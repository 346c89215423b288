#pragma once

#include "fluidrecon/mesh.hpp"
#include "fluidrecon/random.hpp"

#include <Eigen/Core>

#include <vector>

namespace fluidrecon {

/// 0.5 * (mean_a min_b |a - b| + mean_b min_a |a - b|). With `squared`, the
/// distances are squared before averaging.
double chamfer(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b, bool squared = false);

/// Area-uniform samples on the mesh surface. A mesh without triangles yields
/// its vertices.
Eigen::Matrix3Xd sample_surface(const TriMesh& mesh, Eigen::Index n, Rng& rng);

/// Chamfer between `n_samples` surface samples of each mesh, both drawn from
/// the same seed.
double mesh_chamfer(const TriMesh& pred, const TriMesh& gt, Eigen::Index n_samples = 100000,
                    std::uint64_t seed = 0, bool squared = false);

struct MatchingCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> fractions;   // nondecreasing, in [0, 1]
};

/// fractions[k] = |{e <= thresholds[k]}| / |errors|, errors clamped to [0, 1].
MatchingCurve matching_curve(const std::vector<double>& errors, const std::vector<double>& thresholds);

/// `count` evenly spaced thresholds covering [0, 1].
std::vector<double> uniform_thresholds(int count);

}  // namespace fluidrecon
