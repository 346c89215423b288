#include "doctest.h"

#include "fluidrecon/correspondence.hpp"
#include "fluidrecon/errors.hpp"
#include "test_util.hpp"

#include <cmath>
#include <map>
#include <numbers>

using namespace fluidrecon;

namespace {

VelocityField constant_field(const Vec3& c) {
  return [c](const Eigen::Matrix3Xd& x, double) {
    Eigen::Matrix3Xd v(3, x.cols());
    v.colwise() = c;
    return v;
  };
}

Eigen::Matrix3Xd rotate_z(const Eigen::Matrix3Xd& x, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3Xd out = x;
  out.row(0) = c * x.row(0) - s * x.row(1);
  out.row(1) = s * x.row(0) + c * x.row(1);
  return out;
}

const VelocityField kRotation = [](const Eigen::Matrix3Xd& x, double) {
  Eigen::Matrix3Xd v = Eigen::Matrix3Xd::Zero(3, x.cols());
  v.row(0) = -x.row(1);
  v.row(1) = x.row(0);
  return v;
};

double rotation_error(const Eigen::Matrix3Xd& x, int steps) {
  const double quarter = 0.5 * std::numbers::pi;
  const FlowTrajectory tr = flow_points(x, kRotation, 0.0, quarter, steps);
  return (tr.end_points - rotate_z(x, quarter)).colwise().norm().maxCoeff();
}

// Icosahedron subdivided `levels` times, projected to the unit sphere.
TriMesh icosphere(int levels) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                         {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (Vec3& x : v) x.normalize();
  std::vector<Eigen::Vector3i> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = static_cast<int>(v.size()) - 1;
    };
    std::vector<Eigen::Vector3i> next;
    for (const auto& t : f) {
      const int ab = midpoint(t(0), t(1)), bc = midpoint(t(1), t(2)), ca = midpoint(t(2), t(0));
      next.emplace_back(t(0), ab, ca);
      next.emplace_back(t(1), bc, ab);
      next.emplace_back(t(2), ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    f = std::move(next);
  }
  TriMesh m;
  m.vertices.resize(3, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m.vertices.col(static_cast<Eigen::Index>(i)) = v[i];
  m.triangles.resize(3, static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) m.triangles.col(static_cast<Eigen::Index>(i)) = f[i];
  return m;
}

std::vector<std::vector<double>> floyd_warshall(const TriMesh& m) {
  const auto n = static_cast<std::size_t>(m.n_vertices());
  std::vector<std::vector<double>> d(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (Eigen::Index f = 0; f < m.n_triangles(); ++f)
    for (int k = 0; k < 3; ++k) {
      const int a = m.triangles(k, f), b = m.triangles((k + 1) % 3, f);
      const double len = (m.vertices.col(a) - m.vertices.col(b)).norm();
      d[a][b] = std::min(d[a][b], len);
      d[b][a] = d[a][b];
    }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

}  // namespace

TEST_CASE("constant and zero velocity flows") {
  const Eigen::Matrix3Xd x = testutil::random_points3(100, 1);
  const Vec3 c(0.3, -0.7, 0.2);
  const FlowTrajectory tr = flow_points(x, constant_field(c), 0.25, 1.0, 17);
  Eigen::Matrix3Xd expected = x;
  expected.colwise() += 0.75 * c;
  CHECK((tr.end_points - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(tr.start_points == x);
  CHECK(tr.n_steps == 17);
  CHECK(tr.t_start == 0.25);
  CHECK(tr.t_end == 1.0);

  CHECK(flow_points(x, constant_field(Vec3::Zero()), 0.0, 1.0, 50).end_points == x);

  const FlowTrajectory back = flow_points(x, constant_field(c), 1.0, 0.25, 3);
  expected = x;
  expected.colwise() -= 0.75 * c;
  CHECK((back.end_points - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("quarter turn of the rotational field") {
  const Eigen::Matrix3Xd x = testutil::random_points3(200, 2);
  CHECK(rotation_error(x, 10000) < 1e-3);
}

TEST_CASE("Euler error is first order in the step") {
  const Eigen::Matrix3Xd x = testutil::random_points3(50, 3);
  double prev = rotation_error(x, 50);
  for (int steps : {100, 200, 400, 800}) {
    const double err = rotation_error(x, steps);
    CHECK(err <= 0.5 * prev);
    CHECK(err >= 0.4 * prev);
    prev = err;
  }
}

TEST_CASE("time-dependent field uses the left endpoint of each step") {
  // v = (t, 0, 0): Euler sum of h * t_k = h^2 * (0 + 1 + ... + n-1).
  const VelocityField ramp = [](const Eigen::Matrix3Xd& x, double t) {
    Eigen::Matrix3Xd v = Eigen::Matrix3Xd::Zero(3, x.cols());
    v.row(0).setConstant(t);
    return v;
  };
  const Eigen::Matrix3Xd x = Eigen::Matrix3Xd::Zero(3, 1);
  const int n = 8;
  const double h = 1.0 / n;
  const FlowTrajectory tr = flow_points(x, ramp, 0.0, 1.0, n);
  CHECK(tr.end_points(0, 0) == doctest::Approx(h * h * n * (n - 1) / 2.0).epsilon(1e-14));
}

TEST_CASE("flow argument and numerical errors") {
  const Eigen::Matrix3Xd x = testutil::random_points3(4, 4);
  CHECK_THROWS_AS(flow_points(x, kRotation, 0.0, 1.0, 0), DomainError);
  const VelocityField explode = [](const Eigen::Matrix3Xd& p, double) { return Eigen::Matrix3Xd(1e300 * p); };
  try {
    flow_points(x, explode, 0.0, 1.0, 10);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("network velocity flow agrees with the batched network") {
  const SirenParams v = init_siren(3, 16, 4, 3, 30.0, 9);
  const Eigen::Matrix3Xd x = testutil::random_points3(30, 5, -0.5, 0.5);
  const VelocityField field = network_velocity(v);
  Eigen::Matrix4Xd q(4, 30);
  q.topRows(3) = x;
  q.row(3).setConstant(0.4);
  CHECK(field(x, 0.4) == forward_batch(v, q));
  CHECK(flow_points(x, v, 0.0, 0.5, 7).end_points == flow_points(x, field, 0.0, 0.5, 7).end_points);
  const SirenParams f = init_siren(2, 8, 4, 1, 30.0, 9);
  CHECK_THROWS_AS(network_velocity(f), DomainError);
}

TEST_CASE("nearest match equals an exhaustive scan") {
  const Eigen::Matrix3Xd target = testutil::random_points3(1000, 6);
  const Eigen::Matrix3Xd flowed = testutil::random_points3(1000, 7, -1.2, 1.2);
  const Matching m = nearest_match(flowed, target);
  REQUIRE(m.target.size() == 1000);
  for (Eigen::Index i = 0; i < flowed.cols(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < target.cols(); ++j) {
      const double d = (flowed.col(i) - target.col(j)).squaredNorm();
      if (d < best_d) best_d = d, best = j;
    }
    CHECK(m.target[i] == best);
    CHECK(m.residual[i] == doctest::Approx(std::sqrt(best_d)).epsilon(1e-14));
  }
}

TEST_CASE("nearest match exact hits and identity") {
  const Eigen::Matrix3Xd target = testutil::random_points3(300, 8);
  const Matching id = nearest_match(target, target);
  for (Eigen::Index i = 0; i < target.cols(); ++i) {
    CHECK(id.target[i] == i);
    CHECK(id.residual[i] == 0.0);
  }
  Eigen::Matrix3Xd dup(3, 3);
  dup << 1, 0, 1, 0, 0, 0, 0, 0, 0;
  const Matching tie = nearest_match(Eigen::Matrix3Xd(Vec3(1, 0, 0)), dup);
  CHECK(tie.target[0] == 0);
  CHECK_THROWS_AS(nearest_match(target, Eigen::Matrix3Xd(3, 0)), DomainError);
}

TEST_CASE("geodesic errors on a single edge and identical matches") {
  TriMesh strip;
  strip.vertices.resize(3, 4);
  strip.vertices << 0, 1, 0, 1, 0, 0, 2, 2, 0, 0, 0, 0;
  strip.triangles.resize(3, 2);
  strip.triangles << 0, 1, 1, 3, 2, 2;
  const MeshGraph g(strip);
  // (0,0) (1,0) (0,2) (1,2): corner to opposite corner is 3 along either side.
  const double diameter = 3.0;
  CHECK(g.diameter() == doctest::Approx(diameter).epsilon(1e-14));
  const GeodesicErrors e = geodesic_errors({1, 0, 3}, {0, 0, 3}, strip);
  CHECK(e.errors[0] == doctest::Approx(1.0 / diameter).epsilon(1e-14));
  CHECK(e.errors[1] == 0.0);
  CHECK(e.errors[2] == 0.0);
  CHECK(e.disconnected == 0);
  CHECK_THROWS_AS(geodesic_errors({0}, {0, 1}, strip), DomainError);
  CHECK_THROWS_AS(geodesic_errors({7}, {0}, strip), DomainError);
}

TEST_CASE("icosphere graph distances match Floyd-Warshall") {
  const TriMesh ico = icosphere(2);
  const auto all = floyd_warshall(ico);
  const MeshGraph g(ico);
  double diameter = 0.0;
  for (const auto& row : all)
    for (double d : row) diameter = std::max(diameter, d);
  CHECK(g.diameter() == doctest::Approx(diameter).epsilon(1e-14));

  std::vector<Eigen::Index> pred, gt;
  for (Eigen::Index i = 0; i < ico.n_vertices(); ++i) {
    Eigen::Index anti = 0;
    (ico.vertices + ico.vertices.col(i).replicate(1, ico.n_vertices())).colwise().norm().minCoeff(&anti);
    pred.push_back(i);
    gt.push_back(anti);
  }
  const GeodesicErrors e = geodesic_errors(pred, gt, ico);
  for (std::size_t k = 0; k < pred.size(); ++k)
    CHECK(e.errors[k] == doctest::Approx(all[pred[k]][gt[k]] / diameter).epsilon(1e-14));
  const auto d0 = g.distances_from(0);
  for (std::size_t j = 0; j < d0.size(); ++j) CHECK(d0[j] == doctest::Approx(all[0][j]).epsilon(1e-14));
}

TEST_CASE("geodesic errors are symmetric") {
  const TriMesh ico = icosphere(2);
  Rng rng = make_rng({11});
  std::vector<Eigen::Index> a, b;
  for (int i = 0; i < 300; ++i) {
    a.push_back(static_cast<Eigen::Index>(uniform01(rng) * ico.n_vertices()));
    b.push_back(static_cast<Eigen::Index>(uniform01(rng) * ico.n_vertices()));
  }
  const GeodesicErrors ab = geodesic_errors(a, b, ico);
  const GeodesicErrors ba = geodesic_errors(b, a, ico);
  CHECK(ab.errors == ba.errors);
  for (double e : ab.errors) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}

TEST_CASE("disconnected pairs count as full error") {
  TriMesh two = icosphere(0);
  const Eigen::Index n = two.n_vertices();
  TriMesh other = two;
  other.vertices.row(0).array() += 5.0;
  other.triangles.array() += static_cast<int>(n);
  TriMesh both;
  both.vertices.resize(3, 2 * n);
  both.vertices << two.vertices, other.vertices;
  both.triangles.resize(3, 2 * two.n_triangles());
  both.triangles << two.triangles, other.triangles;
  const GeodesicErrors e = geodesic_errors({0, 1}, {n, 0}, both);
  CHECK(e.errors[0] == 1.0);
  CHECK(e.errors[1] < 1.0);
  CHECK(e.disconnected == 1);
  CHECK(std::isinf(MeshGraph(both).distances_from(0)[n]));
}
