#include "fluidrecon/reference/siren_reference.hpp"

#include <cmath>

namespace fluidrecon::reference {

namespace {

using Vec = std::vector<double>;

struct Activations {
  std::vector<Vec> pre;                    // omega0 * (W h + b) per hidden layer
  std::vector<Vec> hidden;                 // hidden[0] is the input
  std::vector<std::array<Vec, 4>> dpre;    // d(W h + b)/d input_j
  std::vector<std::array<Vec, 4>> dhidden; // dhidden[0] is the identity
};

Activations run(const SirenParams& params, const std::array<double, 4>& point) {
  const double w0 = params.omega0;
  const int hidden_layers = params.n_layers() - 1;
  Activations a;
  a.hidden.push_back(Vec(point.begin(), point.end()));
  std::array<Vec, 4> eye;
  for (int j = 0; j < 4; ++j) {
    eye[j].assign(4, 0.0);
    eye[j][j] = 1.0;
  }
  a.dhidden.push_back(eye);

  for (int k = 0; k < hidden_layers; ++k) {
    const auto& W = params.layers[k].weight;
    const auto& b = params.layers[k].bias;
    const int rows = static_cast<int>(W.rows());
    const int cols = static_cast<int>(W.cols());
    Vec pre(rows), h(rows);
    std::array<Vec, 4> dz, dh;
    for (int j = 0; j < 4; ++j) {
      dz[j].assign(rows, 0.0);
      dh[j].assign(rows, 0.0);
    }
    for (int r = 0; r < rows; ++r) {
      double s = b(r);
      for (int c = 0; c < cols; ++c) s += W(r, c) * a.hidden[k][c];
      pre[r] = w0 * s;
      h[r] = std::sin(pre[r]);
      for (int j = 0; j < 4; ++j) {
        double d = 0.0;
        for (int c = 0; c < cols; ++c) d += W(r, c) * a.dhidden[k][j][c];
        dz[j][r] = d;
        dh[j][r] = w0 * std::cos(pre[r]) * d;
      }
    }
    a.pre.push_back(pre);
    a.hidden.push_back(h);
    a.dpre.push_back(dz);
    a.dhidden.push_back(dh);
  }
  return a;
}

}  // namespace

PointEval evaluate(const SirenParams& params, const std::array<double, 4>& point) {
  const Activations a = run(params, point);
  const auto& W = params.layers.back().weight;
  const auto& b = params.layers.back().bias;
  const Vec& h = a.hidden.back();
  PointEval out;
  out.value.assign(W.rows(), 0.0);
  out.jacobian.assign(W.rows(), {0.0, 0.0, 0.0, 0.0});
  for (int r = 0; r < W.rows(); ++r) {
    double s = b(r);
    for (int c = 0; c < W.cols(); ++c) s += W(r, c) * h[c];
    out.value[r] = s;
    for (int j = 0; j < 4; ++j) {
      double d = 0.0;
      for (int c = 0; c < W.cols(); ++c) d += W(r, c) * a.dhidden.back()[j][c];
      out.jacobian[r][j] = d;
    }
  }
  return out;
}

ParamGradient backprop_point(const SirenParams& params, const std::array<double, 4>& point,
                             const std::vector<double>& g_value,
                             const std::vector<std::array<double, 4>>& g_jacobian) {
  const Activations a = run(params, point);
  const double w0 = params.omega0;
  const int L = params.n_layers();
  ParamGradient grad = ParamGradient::zeros_like(params);

  // Output layer: y = W h + b, J_j = W dh_j.
  const auto& Wl = params.layers[L - 1].weight;
  const Vec& h_last = a.hidden[L - 1];
  const auto& dh_last = a.dhidden[L - 1];
  Vec gh(Wl.cols(), 0.0);
  std::array<Vec, 4> gdh;
  for (int j = 0; j < 4; ++j) gdh[j].assign(Wl.cols(), 0.0);
  for (int r = 0; r < Wl.rows(); ++r) {
    grad.layers[L - 1].bias(r) += g_value[r];
    for (int c = 0; c < Wl.cols(); ++c) {
      double gw = g_value[r] * h_last[c];
      for (int j = 0; j < 4; ++j) gw += g_jacobian[r][j] * dh_last[j][c];
      grad.layers[L - 1].weight(r, c) += gw;
      gh[c] += Wl(r, c) * g_value[r];
      for (int j = 0; j < 4; ++j) gdh[j][c] += Wl(r, c) * g_jacobian[r][j];
    }
  }

  for (int k = L - 2; k >= 0; --k) {
    const auto& W = params.layers[k].weight;
    const Vec& pre = a.pre[k];
    const Vec& h_in = a.hidden[k];
    const auto& dh_in = a.dhidden[k];
    const auto& dz = a.dpre[k];
    const int rows = static_cast<int>(W.rows());
    const int cols = static_cast<int>(W.cols());
    Vec gz(rows);
    std::array<Vec, 4> gdz;
    for (int j = 0; j < 4; ++j) gdz[j].assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double c = std::cos(pre[r]);
      const double s = std::sin(pre[r]);
      double g = gh[r] * w0 * c;
      for (int j = 0; j < 4; ++j) {
        gdz[j][r] = gdh[j][r] * w0 * c;
        g -= gdh[j][r] * w0 * w0 * s * dz[j][r];
      }
      gz[r] = g;
    }
    Vec gh_in(cols, 0.0);
    std::array<Vec, 4> gdh_in;
    for (int j = 0; j < 4; ++j) gdh_in[j].assign(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      grad.layers[k].bias(r) += gz[r];
      for (int c = 0; c < cols; ++c) {
        double gw = gz[r] * h_in[c];
        for (int j = 0; j < 4; ++j) gw += gdz[j][r] * dh_in[j][c];
        grad.layers[k].weight(r, c) += gw;
        gh_in[c] += W(r, c) * gz[r];
        for (int j = 0; j < 4; ++j) gdh_in[j][c] += W(r, c) * gdz[j][r];
      }
    }
    gh = std::move(gh_in);
    gdh = std::move(gdh_in);
  }
  return grad;
}

}  // namespace fluidrecon::reference
