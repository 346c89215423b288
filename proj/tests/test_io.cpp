#include "doctest.h"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/io.hpp"
#include "test_util.hpp"

#include "json.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

using namespace fluidrecon;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fluidrecon_test_io_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TriMesh unit_tetrahedron() {
  TriMesh m;
  m.vertices.resize(3, 4);
  m.vertices.col(0) = Vec3(0, 0, 0);
  m.vertices.col(1) = Vec3(1, 0, 0);
  m.vertices.col(2) = Vec3(0, 1, 0);
  m.vertices.col(3) = Vec3(0, 0, 1);
  m.triangles.resize(3, 4);
  m.triangles.col(0) = Eigen::Vector3i(0, 2, 1);
  m.triangles.col(1) = Eigen::Vector3i(0, 1, 3);
  m.triangles.col(2) = Eigen::Vector3i(0, 3, 2);
  m.triangles.col(3) = Eigen::Vector3i(1, 2, 3);
  return m;
}

TriMesh random_mesh(std::uint64_t seed) {
  TriMesh m;
  m.vertices = testutil::random_points3(50, seed);
  m.vertices.col(3) = Vec3(0.1, 1.0 / 3.0, -2e-17);
  m.triangles.resize(3, 40);
  for (int f = 0; f < 40; ++f) m.triangles.col(f) = Eigen::Vector3i(f, f + 1, f + 7);
  return m;
}

template <class T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

}  // namespace

TEST_CASE("tetrahedron OBJ matches the golden file byte for byte") {
  TempDir dir("golden");
  export_mesh(unit_tetrahedron(), dir / "tet.obj");
  CHECK(slurp(dir / "tet.obj") == slurp(fs::path(FLUIDRECON_TEST_DATA) / "tetrahedron.obj"));
}

TEST_CASE("tetrahedron PLY matches a hand-assembled byte stream") {
  TempDir dir("golden_ply");
  const TriMesh tet = unit_tetrahedron();
  export_mesh(tet, dir / "tet.ply");
  std::string expected =
      "ply\nformat binary_little_endian 1.0\nelement vertex 4\n"
      "property double x\nproperty double y\nproperty double z\n"
      "element face 4\nproperty list uchar int vertex_indices\nend_header\n";
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 3; ++a) put(expected, tet.vertices(a, i));
  for (int f = 0; f < 4; ++f) {
    put(expected, std::uint8_t{3});
    for (int k = 0; k < 3; ++k) put(expected, std::int32_t{tet.triangles(k, f)});
  }
  CHECK(slurp(dir / "tet.ply") == expected);
}

TEST_CASE("mesh round trips are exact in both formats") {
  TempDir dir("roundtrip");
  const TriMesh m = random_mesh(3);
  for (const char* name : {"m.obj", "m.ply"}) {
    CAPTURE(name);
    export_mesh(m, dir / name);
    const TriMesh back = load_mesh(dir / name);
    CHECK(back.n_triangles() == m.n_triangles());
    CHECK(back.triangles == m.triangles);
    CHECK(back.vertices == m.vertices);
  }
}

TEST_CASE("empty mesh exports a valid file with zero elements") {
  TempDir dir("empty");
  const TriMesh empty;
  for (const char* name : {"e.obj", "e.ply"}) {
    export_mesh(empty, dir / name);
    const TriMesh back = load_mesh(dir / name);
    CHECK(back.n_vertices() == 0);
    CHECK(back.n_triangles() == 0);
  }
  CHECK(slurp(dir / "e.obj").empty());
  CHECK(slurp(dir / "e.ply").find("element vertex 0\n") != std::string::npos);
}

TEST_CASE("format selection and write failures") {
  CHECK(format_from_path("a/B.OBJ") == MeshFormat::Obj);
  CHECK(format_from_path("x.Ply") == MeshFormat::Ply);
  CHECK_THROWS_AS(format_from_path("x.stl"), IoError);
  CHECK_THROWS_AS(export_mesh(unit_tetrahedron(), "/nonexistent_dir_zz/t.obj"), IoError);
  CHECK_THROWS_AS(load_mesh("/nonexistent_dir_zz/t.obj"), IoError);
  TriMesh bad = unit_tetrahedron();
  bad.triangles(0, 0) = 9;
  TempDir dir("bad");
  CHECK_THROWS_AS(export_mesh(bad, dir / "b.obj"), DomainError);
}

TEST_CASE("oriented cloud round trip through binary PLY") {
  TempDir dir("cloud");
  const OrientedPointCloud c = testutil::sphere_cloud(300, 0.7, 4);
  write_oriented_cloud(c, dir / "c.ply");
  const OrientedPointCloud back = read_oriented_cloud(dir / "c.ply");
  CHECK((back.points - c.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.normals - c.normals).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(back.areas == c.areas);
}

TEST_CASE("ASCII PLY with float normals and no areas") {
  TempDir dir("ascii");
  std::ofstream(dir / "a.ply") << "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 12\n"
                                  "property float x\nproperty float y\nproperty float z\n"
                                  "property float nx\nproperty float ny\nproperty float nz\n"
                                  "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
                               << [] {
                                    std::ostringstream s;
                                    for (int i = 0; i < 12; ++i) s << i * 0.25 << " 0 0 0 0 2\n";
                                    return s.str();
                                  }();
  const OrientedPointCloud c = read_oriented_cloud(dir / "a.ply");
  REQUIRE(c.size() == 12);
  CHECK(c.points(0, 5) == doctest::Approx(1.25));
  CHECK(c.normals.col(3) == Vec3(0, 0, 1));
  CHECK((c.areas.array() > 0.0).all());
}

TEST_CASE("reading clouds without normals fails") {
  TempDir dir("nonormals");
  export_mesh(unit_tetrahedron(), dir / "t.ply");
  CHECK_THROWS_AS(read_oriented_cloud(dir / "t.ply"), IoError);
  export_mesh(unit_tetrahedron(), dir / "t.obj");
  CHECK_THROWS_AS(read_oriented_cloud(dir / "t.obj"), IoError);
}

TEST_CASE("malformed files raise IoError") {
  TempDir dir("malformed");
  std::ofstream(dir / "a.ply") << "not a ply\n";
  CHECK_THROWS_AS(read_point_file(dir / "a.ply"), IoError);
  std::ofstream(dir / "b.ply") << "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\n";
  CHECK_THROWS_AS(read_point_file(dir / "b.ply"), IoError);
  std::ofstream(dir / "c.ply") << "ply\nformat binary_big_endian 1.0\nend_header\n";
  CHECK_THROWS_AS(read_point_file(dir / "c.ply"), IoError);
  {
    std::ofstream out(dir / "d.ply", std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
           "property double x\nproperty double y\nproperty double z\nend_header\n";
    const double xs[4] = {1, 2, 3, 4};
    out.write(reinterpret_cast<const char*>(xs), sizeof(xs));
  }
  CHECK_THROWS_AS(read_point_file(dir / "d.ply"), IoError);
  std::ofstream(dir / "e.obj") << "v 0 0 0\nv 1 0\n";
  CHECK_THROWS_AS(read_point_file(dir / "e.obj"), IoError);
  std::ofstream(dir / "f.obj") << "v 0 0 0\nf 1 x 2\n";
  CHECK_THROWS_AS(read_point_file(dir / "f.obj"), IoError);
  std::ofstream(dir / "g.obj") << "v 0 0 0\nv 1 0 0\nvn 0 0 1\n";
  CHECK_THROWS_AS(read_point_file(dir / "g.obj"), IoError);
}

TEST_CASE("OBJ faces: polygons are fanned and negative indices resolve") {
  TempDir dir("objfaces");
  std::ofstream(dir / "q.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\nf -4 -2 -1\n";
  const TriMesh m = load_mesh(dir / "q.obj");
  REQUIRE(m.n_triangles() == 3);
  CHECK(m.triangles.col(0) == Eigen::Vector3i(0, 1, 2));
  CHECK(m.triangles.col(1) == Eigen::Vector3i(0, 2, 3));
  CHECK(m.triangles.col(2) == Eigen::Vector3i(0, 2, 3));
}

TEST_CASE("three frames get times 0, 0.5, 1") {
  TempDir dir("frames");
  std::vector<fs::path> paths;
  for (int i = 0; i < 3; ++i) {
    paths.push_back(dir / ("f" + std::to_string(i) + ".ply"));
    write_oriented_cloud(testutil::sphere_cloud(200, 0.5, 10 + i, Vec3(0.2 * i, 0, 0)), paths.back());
  }
  const FrameSequence seq = load_frames(paths);
  REQUIRE(seq.size() == 3);
  CHECK(seq.times == std::vector<double>{0.0, 0.5, 1.0});
  // Union box x-range [-0.5, 0.9] padded by 10%.
  CHECK(seq.bbox.lo(0) == doctest::Approx(-0.57).epsilon(0.01));
  CHECK(seq.bbox.hi(0) == doctest::Approx(0.97).epsilon(0.01));

  const FrameSequence custom = load_frames(paths, [](int i, int) { return 2.0 * i + 1.0; });
  CHECK(custom.times == std::vector<double>{1.0, 3.0, 5.0});
  CHECK_THROWS_AS(load_frames(paths, [](int, int) { return 0.0; }), DomainError);
  CHECK_THROWS_AS(load_frames({}), DomainError);
  CHECK(linear_time(0, 1) == 0.0);
}

TEST_CASE("manifest loading resolves relative paths") {
  TempDir dir("manifest");
  fs::create_directories(dir / "sub");
  write_oriented_cloud(testutil::sphere_cloud(200, 0.5, 1), dir / "sub/a.ply");
  write_oriented_cloud(testutil::sphere_cloud(200, 0.5, 2), dir / "sub/b.ply");
  nlohmann::json doc;
  doc["frames"] = {{{"path", "a.ply"}, {"time", 0.25}}, {{"path", (dir / "sub/b.ply").string()}, {"time", 0.75}}};
  std::ofstream(dir / "sub/manifest.json") << doc.dump();
  const FrameSequence seq = load_manifest(dir / "sub/manifest.json");
  CHECK(seq.times == std::vector<double>{0.25, 0.75});

  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_manifest(dir / "bad.json"), IoError);
  std::ofstream(dir / "none.json") << "{\"frames\": []}";
  CHECK_THROWS_AS(load_manifest(dir / "none.json"), IoError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), IoError);
}
