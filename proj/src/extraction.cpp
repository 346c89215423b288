#include "fluidrecon/extraction.hpp"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/parallel.hpp"

#include <array>

namespace fluidrecon {

Vec3 ScalarGrid::node(int i, int j, int k) const {
  const Vec3 h = spacing();
  return box.lo + Vec3(i * h(0), j * h(1), k * h(2));
}

namespace {

void check_grid_args(int resolution, const Aabb& box) {
  if (resolution < 2) throw DomainError("marching cubes needs resolution >= 2");
  if (box.degenerate()) throw DomainError("marching cubes needs a nondegenerate box");
}

// Cube corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr std::array<std::array<int, 3>, 8> kCorner = {
    {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}}};

// Corners of each face, counter-clockwise seen from outside the cube.
constexpr std::array<std::array<int, 4>, 6> kFace = {{
    {0, 4, 6, 2},  // -x
    {1, 3, 7, 5},  // +x
    {0, 1, 5, 4},  // -y
    {2, 6, 7, 3},  // +y
    {0, 2, 3, 1},  // -z
    {4, 5, 7, 6},  // +z
}};

struct CubeEdge {
  int base;  // corner with the lower coordinate
  int axis;
};

// Local edge index for an (unordered) corner pair; -1 if not an edge.
struct EdgeTable {
  std::array<std::array<int, 8>, 8> id{};
  std::array<CubeEdge, 12> edge{};
  EdgeTable() {
    for (auto& row : id) row.fill(-1);
    int n = 0;
    for (int c = 0; c < 8; ++c) {
      for (int axis = 0; axis < 3; ++axis) {
        if ((c >> axis) & 1) continue;
        const int other = c | (1 << axis);
        edge[n] = {c, axis};
        id[c][other] = id[other][c] = n++;
      }
    }
  }
};

const EdgeTable& edge_table() {
  static const EdgeTable table;
  return table;
}

}  // namespace

ScalarGrid sample_grid(const ScalarField3& field, int resolution, const Aabb& box) {
  check_grid_args(resolution, box);
  ScalarGrid grid{resolution, box, {}};
  grid.values.resize(static_cast<std::size_t>(resolution) * resolution * resolution);
  parallel_for(resolution, [&](std::ptrdiff_t k) {
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        grid.values[grid.index(i, j, static_cast<int>(k))] = field(grid.node(i, j, static_cast<int>(k)));
      }
  });
  return grid;
}

ScalarGrid sample_grid(const SirenParams& f, double t, int resolution, const Aabb& box) {
  check_grid_args(resolution, box);
  if (f.out_dim() != 1) throw DomainError("marching cubes needs a scalar field network");
  ScalarGrid grid{resolution, box, {}};
  const std::size_t slab = static_cast<std::size_t>(resolution) * resolution;
  grid.values.resize(slab * resolution);
  Eigen::Matrix4Xd points(4, static_cast<Eigen::Index>(slab));
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const auto c = static_cast<Eigen::Index>(i + resolution * j);
        points.block<3, 1>(0, c) = grid.node(i, j, k);
        points(3, c) = t;
      }
    const Eigen::MatrixXd values = forward_batch(f, points);
    std::copy(values.data(), values.data() + slab, grid.values.begin() + static_cast<std::ptrdiff_t>(slab * k));
  }
  return grid;
}

TriMesh marching_cubes(const ScalarGrid& grid, double iso) {
  const int res = grid.resolution;
  check_grid_args(res, grid.box);
  if (grid.values.size() != static_cast<std::size_t>(res) * res * res) {
    throw DomainError("grid value count does not match its resolution");
  }
  const EdgeTable& table = edge_table();
  const std::size_t n_nodes = grid.values.size();
  auto positive = [&](std::size_t node) { return grid.values[node] >= iso; };
  auto neighbor = [&](std::size_t node, int axis) {
    return node + (axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(res) : static_cast<std::size_t>(res) * res);
  };

  // Pass 1: one vertex per sign-changing lattice edge, numbered in node order.
  std::vector<int> edge_vertex(3 * n_nodes, -1);
  std::vector<std::vector<std::size_t>> slab_edges(static_cast<std::size_t>(res));
  parallel_for(res, [&](std::ptrdiff_t k) {
    for (int j = 0; j < res; ++j)
      for (int i = 0; i < res; ++i) {
        const std::size_t node = grid.index(i, j, static_cast<int>(k));
        const int idx[3] = {i, j, static_cast<int>(k)};
        for (int axis = 0; axis < 3; ++axis) {
          if (idx[axis] + 1 >= res) continue;
          if (positive(node) != positive(neighbor(node, axis))) slab_edges[k].push_back(3 * node + axis);
        }
      }
  });
  std::size_t n_vertices = 0;
  for (const auto& s : slab_edges) n_vertices += s.size();
  TriMesh mesh;
  mesh.vertices.resize(3, static_cast<Eigen::Index>(n_vertices));
  std::vector<std::size_t> first(static_cast<std::size_t>(res) + 1, 0);
  for (int k = 0; k < res; ++k) first[k + 1] = first[k] + slab_edges[k].size();
  const Vec3 h = grid.spacing();
  parallel_for(res, [&](std::ptrdiff_t k) {
    for (std::size_t e = 0; e < slab_edges[k].size(); ++e) {
      const std::size_t id = slab_edges[k][e];
      const std::size_t node = id / 3;
      const int axis = static_cast<int>(id % 3);
      const auto v = static_cast<int>(first[k] + e);
      edge_vertex[id] = v;
      const double v0 = grid.values[node];
      const double v1 = grid.values[neighbor(node, axis)];
      const int i = static_cast<int>(node % res);
      const int j = static_cast<int>((node / res) % res);
      Vec3 p = grid.node(i, j, static_cast<int>(k));
      p(axis) += (iso - v0) / (v1 - v0) * h(axis);
      mesh.vertices.col(v) = p;
    }
  });

  // Pass 2: per cell, link the oriented face segments into loops and fan them.
  std::vector<std::vector<Eigen::Vector3i>> slab_tris(static_cast<std::size_t>(res - 1));
  parallel_for(res - 1, [&](std::ptrdiff_t k) {
    auto& tris = slab_tris[k];
    for (int j = 0; j + 1 < res; ++j)
      for (int i = 0; i + 1 < res; ++i) {
        std::array<double, 8> val;
        std::array<bool, 8> pos;
        int n_pos = 0;
        for (int c = 0; c < 8; ++c) {
          val[c] = grid.at(i + kCorner[c][0], j + kCorner[c][1], static_cast<int>(k) + kCorner[c][2]);
          pos[c] = val[c] >= iso;
          n_pos += pos[c];
        }
        if (n_pos == 0 || n_pos == 8) continue;

        // Segments run from a pos->neg edge to a neg->pos edge of each face,
        // leaving the positive side on their left seen from outside.
        std::array<int, 12> next;
        next.fill(-1);
        for (const auto& face : kFace) {
          int crossings = 0;
          for (int e = 0; e < 4; ++e) crossings += pos[face[e]] != pos[face[(e + 1) % 4]];
          if (crossings == 0) continue;
          const double center = 0.25 * (val[face[0]] + val[face[1]] + val[face[2]] + val[face[3]]);
          for (int e = 0; e < 4; ++e) {
            const int a = face[e], b = face[(e + 1) % 4];
            if (!(pos[a] && !pos[b])) continue;
            int partner = -1;
            if (crossings == 2) {
              for (int f = 1; f < 4; ++f) {
                const int c0 = face[(e + f) % 4], c1 = face[(e + f + 1) % 4];
                if (!pos[c0] && pos[c1]) partner = (e + f) % 4;
              }
            } else {
              partner = center >= iso ? (e + 1) % 4 : (e + 3) % 4;
            }
            next[table.id[a][b]] = table.id[face[partner]][face[(partner + 1) % 4]];
          }
        }

        auto vertex_of = [&](int local) {
          const CubeEdge& ce = table.edge[local];
          const std::size_t node = grid.index(i + kCorner[ce.base][0], j + kCorner[ce.base][1],
                                              static_cast<int>(k) + kCorner[ce.base][2]);
          return edge_vertex[3 * node + ce.axis];
        };
        std::array<bool, 12> seen{};
        for (int start = 0; start < 12; ++start) {
          if (next[start] < 0 || seen[start]) continue;
          std::array<int, 12> loop;
          int len = 0;
          for (int e = start; !seen[e]; e = next[e]) {
            seen[e] = true;
            loop[len++] = vertex_of(e);
          }
          for (int t = 1; t + 1 < len; ++t) tris.emplace_back(loop[0], loop[t], loop[t + 1]);
        }
      }
  });

  std::size_t n_tris = 0;
  for (const auto& s : slab_tris) n_tris += s.size();
  mesh.triangles.resize(3, static_cast<Eigen::Index>(n_tris));
  Eigen::Index f = 0;
  for (const auto& s : slab_tris)
    for (const auto& t : s) mesh.triangles.col(f++) = t;
  return mesh;
}

TriMesh marching_cubes(const SirenParams& f, double t, int resolution, const Aabb& box) {
  return marching_cubes(sample_grid(f, t, resolution, box));
}

}  // namespace fluidrecon
