#include "doctest.h"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/random.hpp"
#include "fluidrecon/reference/siren_reference.hpp"
#include "fluidrecon/siren.hpp"
#include "test_util.hpp"

#include <cmath>
#include <sstream>

using namespace fluidrecon;

namespace {

SirenParams zero_net(int hidden, int out) {
  SirenParams p = init_siren(2, hidden, 4, out, 30.0, 1);
  for (auto& layer : p.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return p;
}

/// The fixed-weight network evaluated by tests/oracles/siren_forward.py.
SirenParams scripted_net() {
  const int dims[] = {4, 8, 8, 1};
  SirenParams p;
  p.omega0 = 30.0;
  for (int k = 0; k < 3; ++k) {
    DenseLayer layer{Eigen::MatrixXd(dims[k + 1], dims[k]), Eigen::VectorXd(dims[k + 1])};
    for (int r = 0; r < dims[k + 1]; ++r) {
      for (int c = 0; c < dims[k]; ++c) {
        layer.weight(r, c) = 0.5 * std::sin(1.3 * k + 0.7 * r + 0.11 * c + 0.3) / (k ? c + 1.0 : 1.0);
      }
      layer.bias(r) = 0.2 * std::cos(0.9 * k + 0.5 * r);
    }
    p.layers.push_back(layer);
  }
  return p;
}

Eigen::Matrix4Xd random_points(int n, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  Eigen::Matrix4Xd pts(4, n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 4; ++a) pts(a, i) = uniform(rng, -1.0, 1.0);
  return pts;
}

std::array<double, 4> arr(const Vec4& p) { return {p(0), p(1), p(2), p(3)}; }

}  // namespace

TEST_CASE("init_siren builds the layer chain") {
  const SirenParams p = init_siren(5, 256, 4, 1, 30.0, 1);
  REQUIRE(p.n_layers() == 5);
  CHECK(p.layers[0].weight.rows() == 256);
  CHECK(p.layers[0].weight.cols() == 4);
  for (int k = 1; k < 4; ++k) {
    CHECK(p.layers[k].weight.rows() == 256);
    CHECK(p.layers[k].weight.cols() == 256);
  }
  CHECK(p.layers[4].weight.rows() == 1);
  CHECK(p.layers[4].weight.cols() == 256);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("init_siren is deterministic and respects the init bounds") {
  CHECK(init_siren(3, 16, 4, 3, 30.0, 42) == init_siren(3, 16, 4, 3, 30.0, 42));
  CHECK_FALSE(init_siren(3, 16, 4, 3, 30.0, 42) == init_siren(3, 16, 4, 3, 30.0, 43));

  const SirenParams p = init_siren(2, 8, 4, 1, 30.0, 7);
  CHECK(p.layers[0].weight.cwiseAbs().maxCoeff() <= 0.25);
  const double hidden_bound = std::sqrt(6.0 / 8) / 30.0;
  CHECK(p.layers[1].weight.cwiseAbs().maxCoeff() <= hidden_bound);
}

TEST_CASE("init_siren rejects a network without hidden layer") {
  CHECK_THROWS_AS(init_siren(1, 8, 4, 1, 30.0, 1), ConfigError);
  CHECK_THROWS_AS(init_siren(3, 0, 4, 1, 30.0, 1), ConfigError);
  CHECK_THROWS_AS(init_siren(3, 8, 4, 1, 0.0, 1), ConfigError);
}

TEST_CASE("validate catches broken shape chains and non-finite weights") {
  SirenParams p = init_siren(3, 8, 4, 1, 30.0, 1);
  p.layers[1].weight.resize(8, 7);
  p.layers[1].weight.setZero();
  CHECK_THROWS_AS(p.validate(), ConfigError);
  SirenParams q = init_siren(3, 8, 4, 1, 30.0, 1);
  q.layers[2].bias(0) = std::nan("");
  CHECK_THROWS_AS(q.validate(), NumericalError);
}

TEST_CASE("forward: closed-form networks") {
  CHECK(forward(zero_net(8, 1), Vec4(0.3, -0.2, 0.1, 0.5))(0) == 0.0);

  SirenParams sine;
  sine.omega0 = 1.0;
  sine.layers.push_back({Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)});
  sine.layers[0].weight(0, 0) = 1.0;
  sine.layers.push_back({Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)});
  for (double x : {-0.9, -0.1, 0.0, 0.4, 1.3}) {
    const Vec4 p(x, 0.7, -0.3, 0.2);
    CHECK(forward(sine, p)(0) == doctest::Approx(std::sin(x)).epsilon(1e-15));
    const FieldEval e = eval_with_jacobian(sine, p);
    CHECK(e.input_jacobian(0, 0) == doctest::Approx(std::cos(x)).epsilon(1e-15));
    CHECK(e.input_jacobian(0, 1) == 0.0);
    CHECK(e.input_jacobian(0, 2) == 0.0);
    CHECK(e.input_jacobian(0, 3) == 0.0);
  }
}

TEST_CASE("forward matches frozen values from the scripted oracle") {
  // tests/oracles/siren_forward.py
  const double expected[] = {0.034898931782670138, -0.17109764261365351, -0.069401970390395723,
                             -0.18757454560841724, 0.041814267755523861};
  const SirenParams p = scripted_net();
  for (int i = 0; i < 5; ++i) {
    const Vec4 x(0.1 * i - 0.3, 0.05 * i, -0.2 + 0.07 * i, 0.3 - 0.04 * i);
    CHECK(std::abs(forward(p, x)(0) - expected[i]) < 1e-12);
  }
}

TEST_CASE("batched forward matches the serial reference") {
  const SirenParams p = init_siren(2, 8, 4, 3, 30.0, 11);
  const Eigen::Matrix4Xd pts = random_points(100, 5);
  const Eigen::MatrixXd batched = forward_batch(p, pts);
  for (int i = 0; i < pts.cols(); ++i) {
    const auto ref = reference::evaluate(p, arr(pts.col(i)));
    for (int o = 0; o < 3; ++o) CHECK(std::abs(batched(o, i) - ref.value[o]) < 1e-12);
  }
}

TEST_CASE("forward rejects non-finite input") {
  const SirenParams p = init_siren(2, 8, 4, 1, 30.0, 1);
  CHECK_THROWS_AS(forward(p, Vec4(std::nan(""), 0, 0, 0)), DomainError);
  CHECK_THROWS_AS(eval_with_jacobian(p, Vec4(0, INFINITY, 0, 0)), DomainError);
}

TEST_CASE("eval_with_jacobian value equals forward exactly") {
  const SirenParams p = init_siren(3, 16, 4, 3, 30.0, 2);
  const Eigen::Matrix4Xd pts = random_points(50, 9);
  for (int i = 0; i < pts.cols(); ++i) {
    const Eigen::VectorXd a = forward(p, pts.col(i));
    const Eigen::VectorXd b = eval_with_jacobian(p, pts.col(i)).value;
    CHECK(a == b);
  }
}

TEST_CASE("analytic jacobian agrees with central differences") {
  const SirenParams p = init_siren(3, 16, 4, 3, 30.0, 3);
  const Eigen::Matrix4Xd pts = random_points(200, 10);
  const double h = 1e-4;
  double worst = 0.0;
  for (int i = 0; i < pts.cols(); ++i) {
    const Vec4 x = pts.col(i);
    const FieldEval e = eval_with_jacobian(p, x);
    Eigen::MatrixXd fd(3, 4);
    for (int j = 0; j < 4; ++j) {
      Vec4 hi = x, lo = x;
      hi(j) += h;
      lo(j) -= h;
      fd.col(j) = (forward(p, hi) - forward(p, lo)) / (2 * h);
    }
    worst = std::max(worst, testutil::relative_error(e.input_jacobian, fd));
  }
  CHECK(worst < 1e-5);

  const FieldEval z = eval_with_jacobian(zero_net(8, 3), Vec4(0.1, 0.2, 0.3, 0.4));
  CHECK(z.input_jacobian.isZero(0.0));
}

TEST_CASE("batched jacobian matches the serial reference") {
  const SirenParams p = init_siren(3, 12, 4, 3, 30.0, 4);
  const Eigen::Matrix4Xd pts = random_points(300, 12);
  SirenTape tape(p, pts, true);
  for (int i = 0; i < pts.cols(); ++i) {
    const auto ref = reference::evaluate(p, arr(pts.col(i)));
    for (int o = 0; o < 3; ++o)
      for (int j = 0; j < 4; ++j) CHECK(std::abs(tape.jacobian_block(j)(o, i) - ref.jacobian[o][j]) < 1e-10);
  }
}

TEST_CASE("backprop of the value matches finite differences") {
  const SirenParams p = init_siren(2, 8, 4, 1, 30.0, 21);
  const Vec4 x(0.2, -0.4, 0.1, 0.6);
  Upstream up{Eigen::MatrixXd::Ones(1, 1), {}};
  const ParamGradient g = backprop(p, Eigen::Matrix4Xd(x), up);
  const auto fd = testutil::finite_difference_gradient(
      p, [&](const SirenParams& q) { return forward(q, x)(0); }, 1e-6);
  CHECK(testutil::relative_error(testutil::flatten(g), fd) < 1e-4);
}

TEST_CASE("backprop through the jacobian matches second-order finite differences") {
  const SirenParams p = init_siren(2, 8, 4, 1, 30.0, 22);
  const Vec4 x(-0.3, 0.5, 0.2, 0.1);
  Upstream up{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 4)};
  up.jacobian(0, 0) = 1.0;  // loss = df/dx
  const ParamGradient g = backprop(p, Eigen::Matrix4Xd(x), up);
  const auto fd = testutil::finite_difference_gradient(
      p, [&](const SirenParams& q) { return eval_with_jacobian(q, x).input_jacobian(0, 0); }, 1e-6);
  CHECK(testutil::relative_error(testutil::flatten(g), fd) < 1e-3);
}

TEST_CASE("backprop matches the serial reference on mixed upstreams") {
  const SirenParams p = init_siren(3, 8, 4, 3, 30.0, 23);
  const Eigen::Matrix4Xd pts = random_points(20, 31);
  Rng rng = make_rng({99});
  Upstream up{Eigen::MatrixXd(3, 20), Eigen::MatrixXd(3, 80)};
  for (Eigen::Index i = 0; i < up.value.size(); ++i) up.value.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < up.jacobian.size(); ++i) up.jacobian.data()[i] = uniform(rng, -1, 1);

  const ParamGradient batched = backprop(p, pts, up);
  ParamGradient serial = ParamGradient::zeros_like(p);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> gv(3);
    std::vector<std::array<double, 4>> gj(3);
    for (int o = 0; o < 3; ++o) {
      gv[o] = up.value(o, i);
      for (int j = 0; j < 4; ++j) gj[o][j] = up.jacobian(o, j * 20 + i);
    }
    serial += reference::backprop_point(p, arr(pts.col(i)), gv, gj);
  }
  CHECK(testutil::relative_error(testutil::flatten(batched), testutil::flatten(serial)) < 1e-12);
}

TEST_CASE("backprop: zero upstream gives zero gradient, batches are additive") {
  const SirenParams p = init_siren(3, 8, 4, 3, 30.0, 24);
  const Eigen::Matrix4Xd pts = random_points(600, 32);
  const Upstream zero{Eigen::MatrixXd::Zero(3, 600), Eigen::MatrixXd::Zero(3, 2400)};
  CHECK(backprop(p, pts, zero).is_zero());

  Rng rng = make_rng({5});
  Upstream up{Eigen::MatrixXd(3, 600), Eigen::MatrixXd(3, 2400)};
  for (Eigen::Index i = 0; i < up.value.size(); ++i) up.value.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < up.jacobian.size(); ++i) up.jacobian.data()[i] = uniform(rng, -1, 1);
  const ParamGradient whole = backprop(p, pts, up);

  ParamGradient sum = ParamGradient::zeros_like(p);
  for (int i = 0; i < 600; ++i) {
    Upstream one{up.value.col(i), Eigen::MatrixXd(3, 4)};
    for (int j = 0; j < 4; ++j) one.jacobian.col(j) = up.jacobian.col(j * 600 + i);
    sum += backprop(p, pts.col(i), one);
  }
  CHECK(testutil::relative_error(testutil::flatten(whole), testutil::flatten(sum)) < 1e-9);
}

TEST_CASE("backprop rejects mismatched upstream shapes") {
  const SirenParams p = init_siren(2, 8, 4, 3, 30.0, 1);
  const Eigen::Matrix4Xd pts = random_points(4, 1);
  CHECK_THROWS_AS(backprop(p, pts, Upstream{Eigen::MatrixXd::Zero(1, 4), {}}), DomainError);
  CHECK_THROWS_AS(backprop(p, pts, Upstream{Eigen::MatrixXd::Zero(3, 4), Eigen::MatrixXd::Zero(3, 5)}),
                  DomainError);
}

TEST_CASE("parameter dump round-trips bit-exactly and rejects truncation") {
  const SirenParams p = init_siren(3, 16, 4, 3, 30.0, 77);
  std::stringstream buf;
  write_params(buf, p);
  const std::string bytes = buf.str();
  std::stringstream in(bytes);
  const SirenParams q = read_params(in);
  CHECK(q == p);
  CHECK(param_hash(q) == param_hash(p));

  std::stringstream cut(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_params(cut), IoError);

  std::string bad = bytes;
  bad[4] = 9;  // version field
  std::stringstream wrong(bad);
  CHECK_THROWS_AS(read_params(wrong), IoError);
}
