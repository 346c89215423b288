#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/mesh.hpp"
#include "fluidrecon/siren.hpp"

#include <functional>
#include <vector>

namespace fluidrecon {

/// Field samples on a res^3 lattice spanning `box` (corners included).
struct ScalarGrid {
  int resolution = 0;
  Aabb box;
  std::vector<double> values;  // index i + res * (j + res * k)

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(resolution) *
                                             (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution) * k);
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 node(int i, int j, int k) const;
  Vec3 spacing() const { return box.extent() / (resolution - 1); }
};

using ScalarField3 = std::function<double(const Vec3&)>;

/// Grid of an arbitrary field; parallel over z-slabs.
ScalarGrid sample_grid(const ScalarField3& field, int resolution, const Aabb& box);

/// Grid of f(., t); each z-slab is evaluated as one batch.
ScalarGrid sample_grid(const SirenParams& f, double t, int resolution, const Aabb& box);

/// Iso-surface at `iso`. Nodes with value >= iso count as outside; triangles
/// are wound so their normals point toward increasing field. Ambiguous faces
/// are split by the sign of the face-center average, which both cells sharing
/// the face agree on, so the result has no cracks.
TriMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

/// Zero level set of the geometry network at time t.
TriMesh marching_cubes(const SirenParams& f, double t, int resolution, const Aabb& box);

}  // namespace fluidrecon
