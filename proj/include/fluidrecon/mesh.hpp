#pragma once

#include <Eigen/Core>

namespace fluidrecon {

/// Indexed triangle mesh.
struct TriMesh {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xi triangles;

  Eigen::Index n_vertices() const { return vertices.cols(); }
  Eigen::Index n_triangles() const { return triangles.cols(); }
  bool empty() const { return triangles.cols() == 0; }

  /// Throws DomainError on out-of-range or repeated indices, or non-finite vertices.
  void validate() const;
  Eigen::Index n_edges() const;
  /// V - E + F.
  Eigen::Index euler_characteristic() const;
  /// Components connected through shared vertices; isolated vertices are ignored.
  int connected_components() const;
  double surface_area() const;
};

}  // namespace fluidrecon
