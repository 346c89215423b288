#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/mesh.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace fluidrecon {

namespace fs = std::filesystem;

enum class MeshFormat { Obj, Ply };

/// From the file extension (.obj / .ply, case-insensitive).
MeshFormat format_from_path(const fs::path& path);

/// OBJ is written as `v` / `f` text records, PLY as binary little-endian with
/// double vertices. Coordinates use shortest round-trip formatting.
void export_mesh(const TriMesh& mesh, const fs::path& path, MeshFormat format);
void export_mesh(const TriMesh& mesh, const fs::path& path);
TriMesh load_mesh(const fs::path& path);

/// Raw per-vertex data from a PLY (ASCII or binary little-endian) or OBJ file.
struct PointFile {
  Eigen::Matrix3Xd points;
  std::optional<Eigen::Matrix3Xd> normals;
  std::optional<Eigen::VectorXd> areas;
  TriMesh mesh;  // faces when present
};
PointFile read_point_file(const fs::path& path);

/// Oriented cloud from a file carrying per-vertex normals (PLY nx/ny/nz or OBJ
/// `vn` paired with `v` by order). Normals are renormalized; missing areas are
/// estimated from the 8-th nearest-neighbour distance.
OrientedPointCloud read_oriented_cloud(const fs::path& path);

/// Binary PLY with x, y, z, nx, ny, nz, area as doubles.
void write_oriented_cloud(const OrientedPointCloud& cloud, const fs::path& path);

/// Maps a frame label (its position in the input list) and the frame count to a time.
using TimeMap = std::function<double(int label, int count)>;

/// Default label i -> i / (n - 1).
double linear_time(int label, int count);

/// Frames in label order; the domain box is the union bounding box scaled by
/// 1.1 about its center.
FrameSequence load_frames(const std::vector<fs::path>& paths, const TimeMap& time_map = linear_time);

/// Frames listed by a scene manifest (JSON with "frames": [{"path", "time"}]).
/// Relative paths resolve against the manifest's directory.
FrameSequence load_manifest(const fs::path& manifest);

}  // namespace fluidrecon
