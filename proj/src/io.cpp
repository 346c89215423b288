#include "fluidrecon/io.hpp"

#include "fluidrecon/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace fluidrecon {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// --- PLY -------------------------------------------------------------------

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& name, const fs::path& path) {
  static const std::unordered_map<std::string, PlyType> table = {
      {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
      {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
      {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
      {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
      {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
      {"float64", PlyType::Float64}};
  const auto it = table.find(name);
  if (it == table.end()) throw IoError(path.string() + ": unknown PLY property type '" + name + "'");
  return it->second;
}

double read_binary_scalar(std::istream& in, PlyType type, const fs::path& path) {
  auto get = [&](auto tag) {
    decltype(tag) v;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(v))) {
      throw IoError(path.string() + ": truncated PLY body");
    }
    return static_cast<double>(v);
  };
  switch (type) {
    case PlyType::Int8: return get(std::int8_t{});
    case PlyType::UInt8: return get(std::uint8_t{});
    case PlyType::Int16: return get(std::int16_t{});
    case PlyType::UInt16: return get(std::uint16_t{});
    case PlyType::Int32: return get(std::int32_t{});
    case PlyType::UInt32: return get(std::uint32_t{});
    case PlyType::Float32: return get(float{});
    case PlyType::Float64: return get(double{});
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float64;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

PointFile read_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": missing 'ply' magic");

  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw IoError(path.string() + ": unsupported PLY format '" + fmt + "'");
      }
    } else if (key == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw IoError(path.string() + ": property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(count_type, path);
        p.type = parse_ply_type(item_type, path);
      } else {
        p.type = parse_ply_type(type, path);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (key == "end_header") {
      break;
    }
  }
  if (!in) throw IoError(path.string() + ": PLY header has no end_header");

  PointFile out;
  std::vector<std::array<int, 3>> faces;
  for (const PlyElement& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < e.properties.size(); ++k) col[e.properties[k].name] = k;
    auto has = [&](const char* n) { return col.count(n) > 0; };
    if (is_vertex) {
      if (!has("x") || !has("y") || !has("z")) throw IoError(path.string() + ": vertex lacks x/y/z");
      out.points.resize(3, static_cast<Eigen::Index>(e.count));
      if (has("nx") && has("ny") && has("nz")) out.normals = Eigen::Matrix3Xd(3, e.count);
      if (has("area")) out.areas = Eigen::VectorXd(e.count);
    }

    std::vector<double> row;
    for (std::size_t i = 0; i < e.count; ++i) {
      row.clear();
      std::vector<int> list;
      if (!binary && !std::getline(in, line)) throw IoError(path.string() + ": truncated PLY body");
      std::istringstream ls(binary ? std::string() : line);
      auto next = [&](PlyType type) {
        if (binary) return read_binary_scalar(in, type, path);
        double v;
        if (!(ls >> v)) throw IoError(path.string() + ": malformed PLY row");
        return v;
      };
      for (const PlyProperty& p : e.properties) {
        if (p.is_list) {
          const auto n = static_cast<int>(next(p.count_type));
          for (int k = 0; k < n; ++k) list.push_back(static_cast<int>(next(p.type)));
          row.push_back(0.0);
        } else {
          row.push_back(next(p.type));
        }
      }
      const auto c = static_cast<Eigen::Index>(i);
      if (is_vertex) {
        out.points.col(c) << row[col["x"]], row[col["y"]], row[col["z"]];
        if (out.normals) out.normals->col(c) << row[col["nx"]], row[col["ny"]], row[col["nz"]];
        if (out.areas) (*out.areas)(c) = row[col["area"]];
      } else if (is_face) {
        for (std::size_t k = 1; k + 1 < list.size(); ++k) faces.push_back({list[0], list[k], list[k + 1]});
      }
    }
  }
  out.mesh.vertices = out.points;
  out.mesh.triangles.resize(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f) {
    out.mesh.triangles.col(static_cast<Eigen::Index>(f)) << faces[f][0], faces[f][1], faces[f][2];
  }
  return out;
}

// --- OBJ -------------------------------------------------------------------

PointFile read_obj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Eigen::Vector3d> v, vn;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "v" || key == "vn") {
      Eigen::Vector3d p;
      if (!(ls >> p(0) >> p(1) >> p(2))) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed " + key + " record");
      }
      (key == "v" ? v : vn).push_back(p);
    } else if (key == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int raw = 0;
        const auto res = std::from_chars(head.data(), head.data() + head.size(), raw);
        if (res.ec != std::errc() || res.ptr != head.data() + head.size() || raw == 0) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed face index '" + tok + "'");
        }
        idx.push_back(raw < 0 ? static_cast<int>(v.size()) + raw : raw - 1);
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  PointFile out;
  out.points.resize(3, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out.points.col(static_cast<Eigen::Index>(i)) = v[i];
  if (!vn.empty()) {
    if (vn.size() != v.size()) {
      throw IoError(path.string() + ": " + std::to_string(vn.size()) + " vn records for " +
                    std::to_string(v.size()) + " vertices");
    }
    out.normals = Eigen::Matrix3Xd(3, static_cast<Eigen::Index>(vn.size()));
    for (std::size_t i = 0; i < vn.size(); ++i) out.normals->col(static_cast<Eigen::Index>(i)) = vn[i];
  }
  out.mesh.vertices = out.points;
  out.mesh.triangles.resize(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f) {
    out.mesh.triangles.col(static_cast<Eigen::Index>(f)) << faces[f][0], faces[f][1], faces[f][2];
  }
  return out;
}

}  // namespace

MeshFormat format_from_path(const fs::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".ply") return MeshFormat::Ply;
  throw IoError(path.string() + ": unsupported extension (expected .obj or .ply)");
}

PointFile read_point_file(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  return format_from_path(path) == MeshFormat::Ply ? read_ply(path) : read_obj(path);
}

void export_mesh(const TriMesh& mesh, const fs::path& path, MeshFormat format) {
  mesh.validate();
  std::ofstream out(path, format == MeshFormat::Ply ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == MeshFormat::Obj) {
    for (Eigen::Index i = 0; i < mesh.n_vertices(); ++i) {
      out << "v " << format_double(mesh.vertices(0, i)) << ' ' << format_double(mesh.vertices(1, i)) << ' '
          << format_double(mesh.vertices(2, i)) << '\n';
    }
    for (Eigen::Index f = 0; f < mesh.n_triangles(); ++f) {
      out << "f " << mesh.triangles(0, f) + 1 << ' ' << mesh.triangles(1, f) + 1 << ' '
          << mesh.triangles(2, f) + 1 << '\n';
    }
  } else {
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.n_vertices() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.n_triangles() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (Eigen::Index i = 0; i < mesh.n_vertices(); ++i) {
      out.write(reinterpret_cast<const char*>(mesh.vertices.col(i).data()), 3 * sizeof(double));
    }
    for (Eigen::Index f = 0; f < mesh.n_triangles(); ++f) {
      const std::uint8_t three = 3;
      out.write(reinterpret_cast<const char*>(&three), 1);
      for (int k = 0; k < 3; ++k) {
        const std::int32_t idx = mesh.triangles(k, f);
        out.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void export_mesh(const TriMesh& mesh, const fs::path& path) { export_mesh(mesh, path, format_from_path(path)); }

TriMesh load_mesh(const fs::path& path) {
  TriMesh mesh = read_point_file(path).mesh;
  mesh.validate();
  return mesh;
}

OrientedPointCloud read_oriented_cloud(const fs::path& path) {
  PointFile file = read_point_file(path);
  if (file.points.cols() == 0) throw IoError(path.string() + ": no vertices");
  if (!file.normals) throw IoError(path.string() + ": missing per-vertex normals");
  OrientedPointCloud cloud;
  cloud.points = std::move(file.points);
  cloud.normals = std::move(*file.normals);
  for (Eigen::Index i = 0; i < cloud.normals.cols(); ++i) {
    const double len = cloud.normals.col(i).norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw IoError(path.string() + ": zero or non-finite normal at vertex " + std::to_string(i));
    }
    cloud.normals.col(i) /= len;
  }
  cloud.areas = file.areas ? std::move(*file.areas) : estimate_areas(cloud.points);
  try {
    cloud.validate();
  } catch (const DomainError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return cloud;
}

void write_oriented_cloud(const OrientedPointCloud& cloud, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double nx\nproperty double ny\nproperty double nz\n"
      << "property double area\nend_header\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double row[7] = {cloud.points(0, i),  cloud.points(1, i),  cloud.points(2, i), cloud.normals(0, i),
                           cloud.normals(1, i), cloud.normals(2, i), cloud.areas(i)};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

double linear_time(int label, int count) {
  return count > 1 ? static_cast<double>(label) / static_cast<double>(count - 1) : 0.0;
}

FrameSequence load_frames(const std::vector<fs::path>& paths, const TimeMap& time_map) {
  if (paths.empty()) throw DomainError("load_frames: no input files");
  std::vector<OrientedPointCloud> frames;
  std::vector<double> times;
  const int n = static_cast<int>(paths.size());
  for (int i = 0; i < n; ++i) {
    frames.push_back(read_oriented_cloud(paths[i]));
    times.push_back(time_map ? time_map(i, n) : linear_time(i, n));
  }
  return make_sequence(std::move(frames), std::move(times));
}

FrameSequence load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
  if (!doc.contains("frames") || !doc["frames"].is_array() || doc["frames"].empty()) {
    throw IoError(manifest.string() + ": manifest lists no frames");
  }
  std::vector<OrientedPointCloud> frames;
  std::vector<double> times;
  const fs::path base = manifest.parent_path();
  for (const auto& entry : doc["frames"]) {
    fs::path p = entry.at("path").get<std::string>();
    if (p.is_relative()) p = base / p;
    frames.push_back(read_oriented_cloud(p));
    times.push_back(entry.at("time").get<double>());
  }
  return make_sequence(std::move(frames), std::move(times));
}

}  // namespace fluidrecon
