#include "fluidrecon/geometry.hpp"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>

namespace fluidrecon {

Aabb Aabb::around(const Eigen::Matrix3Xd& points) {
  if (points.cols() == 0) throw DomainError("bounding box of an empty point set");
  return {points.rowwise().minCoeff(), points.rowwise().maxCoeff()};
}

Aabb Aabb::padded(double fraction) const {
  const Vec3 half = 0.5 * (1.0 + fraction) * extent();
  return {center() - half, center() + half};
}

void Aabb::expand(const Aabb& other) {
  lo = lo.cwiseMin(other.lo);
  hi = hi.cwiseMax(other.hi);
}

void OrientedPointCloud::validate() const {
  if (points.cols() < 1) throw DomainError("point cloud is empty");
  if (normals.cols() != points.cols() || areas.size() != points.cols()) {
    throw DomainError("point cloud arrays have mismatched sizes");
  }
  if (!points.allFinite()) throw DomainError("point cloud has non-finite positions");
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    if (std::abs(normals.col(i).norm() - 1.0) > 1e-6) {
      throw DomainError("normal " + std::to_string(i) + " is not unit length");
    }
    if (!(areas(i) > 0.0) || !std::isfinite(areas(i))) {
      throw DomainError("area weight " + std::to_string(i) + " is not positive");
    }
  }
}

double FrameSequence::frame_gap(std::size_t i) const {
  if (times.size() < 2) return 1.0;
  if (i == 0) return times[1] - times[0];
  if (i + 1 == times.size()) return times[i] - times[i - 1];
  return 0.5 * (times[i + 1] - times[i - 1]);
}

void FrameSequence::validate() const {
  if (frames.empty()) throw DomainError("frame sequence is empty");
  if (times.size() != frames.size()) throw DomainError("one time value per frame required");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DomainError("frame times must be strictly increasing");
  }
  const double tol = 1e-9 * std::max(1.0, bbox.diagonal());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    frames[f].validate();
    for (Eigen::Index i = 0; i < frames[f].size(); ++i) {
      if (!bbox.contains(frames[f].points.col(i), tol)) {
        throw DomainError("frame " + std::to_string(f) + " has a point outside the domain box");
      }
    }
  }
}

FrameSequence make_sequence(std::vector<OrientedPointCloud> frames, std::vector<double> times) {
  if (frames.empty()) throw DomainError("frame sequence is empty");
  FrameSequence seq;
  Aabb box = Aabb::around(frames.front().points);
  for (const auto& f : frames) box.expand(Aabb::around(f.points));
  seq.bbox = box.padded(kDomainPadding);
  seq.frames = std::move(frames);
  seq.times = std::move(times);
  seq.validate();
  return seq;
}

// ---------------------------------------------------------------------------

KdTree::KdTree(const Eigen::Matrix3Xd& points) : points_(points) {
  if (points.cols() == 0) throw DomainError("nearest neighbour query on an empty point set");
  order_.resize(points.cols());
  for (int i = 0; i < static_cast<int>(order_.size()); ++i) order_[i] = i;
  nodes_.reserve(2 * order_.size() / 8 + 2);
  build(0, static_cast<int>(order_.size()));
}

int KdTree::build(int begin, int end) {
  constexpr int kLeafSize = 8;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_.col(order_[begin]);
  Vec3 hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[i]));
    hi = hi.cwiseMax(points_.col(order_[i]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) == lo(axis)) return id;  // all coincident

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_(axis, a) < points_(axis, b); });
  const double split = points_(axis, order_[mid]);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

namespace {

inline double squared_distance(const Eigen::Matrix3Xd& pts, Eigen::Index i, const Vec3& q) {
  const double dx = pts(0, i) - q(0);
  const double dy = pts(1, i) - q(1);
  const double dz = pts(2, i) - q(2);
  return dx * dx + dy * dy + dz * dz;
}

struct Candidate {
  double d2;
  Eigen::Index index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

}  // namespace

Neighbor KdTree::nearest(const Vec3& query) const {
  Candidate best{std::numeric_limits<double>::infinity(), -1};
  // Explicit stack: (node, lower bound on squared distance to its region).
  std::vector<std::pair<int, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > best.d2) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(points_, order_[i], query), order_[i]};
        if (c < best) best = c;
      }
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  return {best.index, std::sqrt(best.d2)};
}

std::vector<Neighbor> KdTree::knearest(const Vec3& query, int k) const {
  k = std::min<int>(k, static_cast<int>(points_.cols()));
  std::priority_queue<Candidate> heap;  // max-heap on (d2, index)
  auto worst = [&] {
    return static_cast<int>(heap.size()) < k ? std::numeric_limits<double>::infinity() : heap.top().d2;
  };
  std::vector<std::pair<int, double>> stack;
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > worst()) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(points_, order_[i], query), order_[i]};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  std::vector<Neighbor> out(heap.size());
  for (auto i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
    out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

Neighbor nearest_point(const Vec3& x, const OrientedPointCloud& cloud) {
  if (cloud.size() == 0) throw DomainError("nearest_point on an empty cloud");
  Candidate best{std::numeric_limits<double>::infinity(), -1};
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Candidate c{squared_distance(cloud.points, i, x), i};
    if (c < best) best = c;
  }
  return {best.index, std::sqrt(best.d2)};
}

Eigen::VectorXd estimate_areas(const Eigen::Matrix3Xd& points, int k) {
  const Eigen::Index n = points.cols();
  if (n == 0) throw DomainError("area estimate of an empty cloud");
  Eigen::VectorXd areas(n);
  if (n == 1) {
    areas(0) = 1.0;
    return areas;
  }
  const KdTree tree(points);
  // The query point itself is its own 0-th neighbour.
  const int kk = std::min<int>(k + 1, static_cast<int>(n));
  parallel_for(n, [&](std::ptrdiff_t i) {
    const auto nn = tree.knearest(points.col(i), kk);
    const double rho = nn.back().distance;
    areas(i) = std::numbers::pi * rho * rho;
  });
  // Duplicated samples would get zero area; fall back to the mean.
  const double positive_mean = areas.sum() / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(areas(i) > 0.0)) areas(i) = positive_mean > 0.0 ? positive_mean : 1.0;
  }
  return areas;
}

// ---------------------------------------------------------------------------

SdfOracle::SdfOracle(const OrientedPointCloud& cloud, double epsilon) : tree_(cloud.points) {
  epsilon_ = epsilon > 0.0 ? epsilon : 1e-6 * Aabb::around(cloud.points).diagonal();
  if (!(epsilon_ > 0.0)) epsilon_ = 1e-12;
  const auto n = static_cast<std::size_t>(cloud.size());
  px_.resize(n), py_.resize(n), pz_.resize(n), wx_.resize(n), wy_.resize(n), wz_.resize(n);
  const double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    px_[i] = cloud.points(0, c);
    py_[i] = cloud.points(1, c);
    pz_[i] = cloud.points(2, c);
    const double a = cloud.areas(c) * inv4pi;
    wx_[i] = a * cloud.normals(0, c);
    wy_[i] = a * cloud.normals(1, c);
    wz_[i] = a * cloud.normals(2, c);
  }
}

double SdfOracle::winding_number(const Vec3& x) const {
  const double qx = x(0), qy = x(1), qz = x(2);
  const double eps = epsilon_;
  const std::size_t n = px_.size();
  const double* px = px_.data();
  const double* py = py_.data();
  const double* pz = pz_.data();
  const double* wx = wx_.data();
  const double* wy = wy_.data();
  const double* wz = wz_.data();
  double w = 0.0;
#pragma omp simd reduction(+ : w)
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = px[i] - qx;
    const double dy = py[i] - qy;
    const double dz = pz[i] - qz;
    const double r = std::max(std::sqrt(dx * dx + dy * dy + dz * dz), eps);
    w += (dx * wx[i] + dy * wy[i] + dz * wz[i]) / (r * r * r);
  }
  return w;
}

double SdfOracle::signed_distance(const Vec3& x) const {
  const double d = tree_.nearest(x).distance;
  return winding_number(x) >= kInsideWinding ? -d : d;
}

Eigen::VectorXd SdfOracle::winding_numbers(const Eigen::Matrix3Xd& queries) const {
  Eigen::VectorXd out(queries.cols());
  parallel_for(queries.cols(), [&](std::ptrdiff_t i) { out(i) = winding_number(queries.col(i)); });
  return out;
}

Eigen::VectorXd SdfOracle::signed_distances(const Eigen::Matrix3Xd& queries) const {
  Eigen::VectorXd out(queries.cols());
  parallel_for(queries.cols(), [&](std::ptrdiff_t i) { out(i) = signed_distance(queries.col(i)); });
  return out;
}

double winding_number(const Vec3& x, const OrientedPointCloud& cloud) {
  const double eps = 1e-6 * Aabb::around(cloud.points).diagonal();
  double w = 0.0;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Vec3 d = cloud.points.col(i) - x;
    const double r = std::max(d.norm(), eps);
    w += cloud.areas(i) * d.dot(cloud.normals.col(i)) / (4.0 * std::numbers::pi * r * r * r);
  }
  return w;
}

double signed_distance(const Vec3& x, const OrientedPointCloud& cloud) {
  const double d = nearest_point(x, cloud).distance;
  return winding_number(x, cloud) >= kInsideWinding ? -d : d;
}

}  // namespace fluidrecon
