#include "fluidrecon/mesh.hpp"

#include "fluidrecon/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace fluidrecon {

void TriMesh::validate() const {
  if (!vertices.allFinite()) throw DomainError("mesh has non-finite vertices");
  for (Eigen::Index f = 0; f < triangles.cols(); ++f) {
    const Eigen::Vector3i t = triangles.col(f);
    for (int k = 0; k < 3; ++k) {
      if (t(k) < 0 || t(k) >= vertices.cols()) {
        throw DomainError("triangle " + std::to_string(f) + " has an out-of-range index");
      }
    }
    if (t(0) == t(1) || t(1) == t(2) || t(0) == t(2)) {
      throw DomainError("triangle " + std::to_string(f) + " repeats a vertex");
    }
  }
}

Eigen::Index TriMesh::n_edges() const {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(3 * static_cast<std::size_t>(triangles.cols()));
  for (Eigen::Index f = 0; f < triangles.cols(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = triangles(k, f);
      const int b = triangles((k + 1) % 3, f);
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  return std::unique(edges.begin(), edges.end()) - edges.begin();
}

Eigen::Index TriMesh::euler_characteristic() const {
  return n_vertices() - n_edges() + n_triangles();
}

int TriMesh::connected_components() const {
  std::vector<int> parent(static_cast<std::size_t>(vertices.cols()));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> used(parent.size(), 0);
  for (Eigen::Index f = 0; f < triangles.cols(); ++f) {
    for (int k = 0; k < 3; ++k) {
      used[triangles(k, f)] = 1;
      const int a = find(triangles(k, f));
      const int b = find(triangles((k + 1) % 3, f));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  int count = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (used[i] && find(static_cast<int>(i)) == static_cast<int>(i)) ++count;
  }
  return count;
}

double TriMesh::surface_area() const {
  double area = 0.0;
  for (Eigen::Index f = 0; f < triangles.cols(); ++f) {
    const Eigen::Vector3d a = vertices.col(triangles(0, f));
    const Eigen::Vector3d b = vertices.col(triangles(1, f));
    const Eigen::Vector3d c = vertices.col(triangles(2, f));
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

}  // namespace fluidrecon
