#include "fluidrecon/correspondence.hpp"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/geometry.hpp"
#include "fluidrecon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <string>

namespace fluidrecon {

VelocityField network_velocity(const SirenParams& v) {
  if (v.out_dim() != 3) throw DomainError("velocity network must have 3 outputs");
  return [&v](const Eigen::Matrix3Xd& points, double t) -> Eigen::Matrix3Xd {
    Eigen::Matrix4Xd q(4, points.cols());
    q.topRows(3) = points;
    q.row(3).setConstant(t);
    return forward_batch(v, q);
  };
}

FlowTrajectory flow_points(const Eigen::Matrix3Xd& points, const VelocityField& velocity, double t_start,
                           double t_end, int n_steps) {
  if (n_steps < 1) throw DomainError("flow_points: n_steps must be >= 1");
  if (!points.allFinite()) throw DomainError("flow_points: non-finite start points");
  FlowTrajectory traj{points, points, n_steps, t_start, t_end};
  const double h = (t_end - t_start) / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const double t = t_start + k * h;
    traj.end_points += h * velocity(traj.end_points, t);
    if (!traj.end_points.allFinite()) {
      throw NumericalError("flow_points: non-finite state after Euler step " + std::to_string(k + 1));
    }
  }
  return traj;
}

FlowTrajectory flow_points(const Eigen::Matrix3Xd& points, const SirenParams& v, double t_start, double t_end,
                           int n_steps) {
  return flow_points(points, network_velocity(v), t_start, t_end, n_steps);
}

Matching nearest_match(const Eigen::Matrix3Xd& flowed, const Eigen::Matrix3Xd& target) {
  if (target.cols() == 0) throw DomainError("nearest_match: empty target");
  const KdTree tree(target);
  Matching m;
  m.target.resize(static_cast<std::size_t>(flowed.cols()));
  m.residual.resize(static_cast<std::size_t>(flowed.cols()));
  parallel_for(flowed.cols(), [&](std::ptrdiff_t i) {
    const Neighbor nb = tree.nearest(flowed.col(i));
    m.target[i] = nb.index;
    m.residual[i] = nb.distance;
  });
  return m;
}

MeshGraph::MeshGraph(const TriMesh& mesh) {
  mesh.validate();
  adjacency_.resize(static_cast<std::size_t>(mesh.n_vertices()));
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  for (Eigen::Index f = 0; f < mesh.n_triangles(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const Eigen::Index a = mesh.triangles(k, f);
      const Eigen::Index b = mesh.triangles((k + 1) % 3, f);
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [a, b] : edges) {
    const double len = (mesh.vertices.col(a) - mesh.vertices.col(b)).norm();
    adjacency_[a].emplace_back(b, len);
    adjacency_[b].emplace_back(a, len);
  }
}

std::vector<double> MeshGraph::distances_from(Eigen::Index source) const {
  if (source < 0 || source >= size()) throw DomainError("geodesic source vertex out of range");
  std::vector<double> dist(adjacency_.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, Eigen::Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (const auto& [w, len] : adjacency_[u]) {
      const double nd = d + len;
      if (nd < dist[w]) {
        dist[w] = nd;
        queue.emplace(nd, w);
      }
    }
  }
  return dist;
}

double MeshGraph::diameter() const {
  std::vector<double> farthest(adjacency_.size(), 0.0);
  parallel_for(size(), [&](std::ptrdiff_t s) {
    double best = 0.0;
    for (double d : distances_from(s)) {
      if (std::isfinite(d)) best = std::max(best, d);
    }
    farthest[s] = best;
  });
  return farthest.empty() ? 0.0 : *std::max_element(farthest.begin(), farthest.end());
}

GeodesicErrors geodesic_errors(const std::vector<Eigen::Index>& predicted,
                               const std::vector<Eigen::Index>& ground_truth, const TriMesh& mesh) {
  if (predicted.size() != ground_truth.size()) {
    throw DomainError("geodesic_errors: predicted and ground-truth matchings differ in length");
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (Eigen::Index v : {predicted[i], ground_truth[i]}) {
      if (v < 0 || v >= mesh.n_vertices()) {
        throw DomainError("geodesic_errors: vertex index " + std::to_string(v) + " out of range at match " +
                          std::to_string(i));
      }
    }
  }
  const MeshGraph graph(mesh);
  GeodesicErrors out;
  out.diameter = graph.diameter();
  out.errors.assign(predicted.size(), 0.0);

  // Distances are always taken from the lower vertex index, so swapping the
  // arguments gives bit-identical results.
  std::map<Eigen::Index, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    by_source[std::min(predicted[i], ground_truth[i])].push_back(i);
  }
  std::vector<std::pair<Eigen::Index, std::vector<std::size_t>>> groups(by_source.begin(), by_source.end());
  std::vector<Eigen::Index> disconnected(groups.size(), 0);
  parallel_for(static_cast<std::ptrdiff_t>(groups.size()), [&](std::ptrdiff_t g) {
    const auto dist = graph.distances_from(groups[g].first);
    for (std::size_t i : groups[g].second) {
      const double d = dist[std::max(predicted[i], ground_truth[i])];
      if (!std::isfinite(d)) {
        out.errors[i] = 1.0;
        ++disconnected[g];
      } else {
        out.errors[i] = out.diameter > 0.0 ? d / out.diameter : 0.0;
      }
    }
  });
  for (Eigen::Index d : disconnected) out.disconnected += d;
  return out;
}

}  // namespace fluidrecon
