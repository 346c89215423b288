#pragma once

#include "fluidrecon/siren.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace fluidrecon {

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static Aabb around(const Eigen::Matrix3Xd& points);
  /// Scales the box about its center by (1 + fraction) on every axis.
  Aabb padded(double fraction) const;
  void expand(const Aabb& other);

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
  bool degenerate() const { return !((extent().array() > 0.0).all()); }
};

/// One observed frame: oriented samples with per-sample area weights.
struct OrientedPointCloud {
  Eigen::Matrix3Xd points;
  Eigen::Matrix3Xd normals;
  Eigen::VectorXd areas;

  Eigen::Index size() const { return points.cols(); }
  /// Throws DomainError when the invariants (unit normals, positive areas) fail.
  void validate() const;
};

/// Time-ordered frames with their real time values and the training domain.
struct FrameSequence {
  std::vector<OrientedPointCloud> frames;
  std::vector<double> times;
  Aabb bbox;

  std::size_t size() const { return frames.size(); }
  double t_min() const { return times.front(); }
  double t_max() const { return times.back(); }
  /// Spacing around frame i: mean of the adjacent gaps (one-sided at the ends).
  double frame_gap(std::size_t i) const;
  void validate() const;
};

/// Padding applied around the frames' union bounding box.
inline constexpr double kDomainPadding = 0.1;

/// Frames with their times; the domain box is the union bounding box scaled by
/// 1 + kDomainPadding about its center. Validates the result.
FrameSequence make_sequence(std::vector<OrientedPointCloud> frames, std::vector<double> times);

/// Area weights pi * rho^2 with rho the distance to the k-th nearest neighbour.
Eigen::VectorXd estimate_areas(const Eigen::Matrix3Xd& points, int k = 8);

struct Neighbor {
  Eigen::Index index = -1;
  double distance = 0.0;
};

/// Exact Euclidean nearest-neighbour index. Ties resolve to the lowest index,
/// matching a linear scan.
class KdTree {
 public:
  explicit KdTree(const Eigen::Matrix3Xd& points);

  Neighbor nearest(const Vec3& query) const;
  /// k nearest, sorted by (distance, index).
  std::vector<Neighbor> knearest(const Vec3& query, int k) const;
  Eigen::Index size() const { return points_.cols(); }

 private:
  struct Node {
    int begin, end;        // range in order_
    int left = -1, right = -1;
    int axis = -1;         // -1 for leaves
    double split = 0.0;
  };
  int build(int begin, int end);

  Eigen::Matrix3Xd points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Nearest cloud sample by exhaustive scan.
Neighbor nearest_point(const Vec3& x, const OrientedPointCloud& cloud);

/// Signed-distance supervision derived from one oriented cloud: unsigned
/// distance to the closest sample, sign from the generalized winding number
/// evaluated at the query.
class SdfOracle {
 public:
  /// `epsilon` clamps |p - x| in the winding kernel; <= 0 selects
  /// 1e-6 times the cloud's bounding-box diagonal.
  explicit SdfOracle(const OrientedPointCloud& cloud, double epsilon = 0.0);

  double winding_number(const Vec3& x) const;
  double signed_distance(const Vec3& x) const;
  Neighbor nearest(const Vec3& x) const { return tree_.nearest(x); }
  double epsilon() const { return epsilon_; }

  /// Parallel over query columns.
  Eigen::VectorXd winding_numbers(const Eigen::Matrix3Xd& queries) const;
  Eigen::VectorXd signed_distances(const Eigen::Matrix3Xd& queries) const;

 private:
  KdTree tree_;
  double epsilon_;
  // Structure-of-arrays copies for the vectorized winding kernel; the
  // weighted normal a_i * n_i / (4 pi) is pre-multiplied.
  std::vector<double> px_, py_, pz_, wx_, wy_, wz_;
};

/// Inside threshold on the winding number.
inline constexpr double kInsideWinding = 0.5;

double winding_number(const Vec3& x, const OrientedPointCloud& cloud);
double signed_distance(const Vec3& x, const OrientedPointCloud& cloud);

}  // namespace fluidrecon
