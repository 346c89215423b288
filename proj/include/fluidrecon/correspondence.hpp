#pragma once

#include "fluidrecon/mesh.hpp"
#include "fluidrecon/siren.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace fluidrecon {

/// Batched velocity: 3 x M velocities at 3 x M points and time t.
using VelocityField = std::function<Eigen::Matrix3Xd(const Eigen::Matrix3Xd& points, double t)>;

VelocityField network_velocity(const SirenParams& v);

struct FlowTrajectory {
  Eigen::Matrix3Xd start_points;
  Eigen::Matrix3Xd end_points;
  int n_steps = 0;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Forward Euler: x_{k+1} = x_k + h v(x_k, t_k), h = (t_end - t_start) / n_steps.
/// t_end < t_start integrates backward. Throws NumericalError naming the step
/// when the state stops being finite.
FlowTrajectory flow_points(const Eigen::Matrix3Xd& points, const VelocityField& velocity, double t_start,
                           double t_end, int n_steps);
FlowTrajectory flow_points(const Eigen::Matrix3Xd& points, const SirenParams& v, double t_start, double t_end,
                           int n_steps);

/// Euler substeps per gap between consecutive supervised frames.
inline constexpr int kStepsPerFrameGap = 32;

struct Matching {
  std::vector<Eigen::Index> target;  // per source point
  std::vector<double> residual;      // Euclidean distance to the chosen target
};

/// Exact nearest target vertex per flowed point; ties go to the lowest index.
Matching nearest_match(const Eigen::Matrix3Xd& flowed, const Eigen::Matrix3Xd& target);

/// Edge graph of a triangle mesh weighted by Euclidean edge length.
class MeshGraph {
 public:
  explicit MeshGraph(const TriMesh& mesh);

  /// Dijkstra distances from `source`; unreachable vertices get +inf.
  std::vector<double> distances_from(Eigen::Index source) const;
  /// Largest finite shortest-path distance over all vertex pairs.
  double diameter() const;
  Eigen::Index size() const { return static_cast<Eigen::Index>(adjacency_.size()); }

 private:
  std::vector<std::vector<std::pair<Eigen::Index, double>>> adjacency_;
};

struct GeodesicErrors {
  std::vector<double> errors;  // shortest-path distance / graph diameter
  Eigen::Index disconnected = 0;
  double diameter = 0.0;
};

/// Normalized graph distance between predicted and ground-truth vertices.
/// Disconnected pairs count as 1.0.
GeodesicErrors geodesic_errors(const std::vector<Eigen::Index>& predicted,
                               const std::vector<Eigen::Index>& ground_truth, const TriMesh& mesh);

}  // namespace fluidrecon
