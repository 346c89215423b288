#include "fluidrecon/siren.hpp"

#include "fluidrecon/binary_io.hpp"
#include "fluidrecon/errors.hpp"
#include "fluidrecon/parallel.hpp"
#include "fluidrecon/random.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace fluidrecon {

std::size_t SirenParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

void SirenParams::validate() const {
  if (layers.size() < 2) throw ConfigError("siren needs at least 2 layers (one hidden layer)");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ConfigError("omega0 must be positive");
  if (layers.front().weight.cols() != kInputDim) {
    throw ConfigError("first layer must take 4 inputs (x, y, z, t)");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    if (layer.weight.rows() < 1 || layer.weight.cols() < 1) {
      throw ConfigError("layer " + std::to_string(k) + " is empty");
    }
    if (layer.bias.size() != layer.weight.rows()) {
      throw ConfigError("layer " + std::to_string(k) + " bias does not match weight rows");
    }
    if (k > 0 && layer.weight.cols() != layers[k - 1].weight.rows()) {
      throw ConfigError("layer " + std::to_string(k) + " input does not chain with previous output");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NumericalError("layer " + std::to_string(k) + " has non-finite entries");
    }
  }
}

bool SirenParams::operator==(const SirenParams& other) const {
  if (omega0 != other.omega0 || layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

ParamGradient ParamGradient::zeros_like(const SirenParams& params) {
  ParamGradient g;
  g.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return g;
}

ParamGradient& ParamGradient::operator+=(const ParamGradient& other) {
  if (layers.empty()) {
    layers = other.layers;
    return *this;
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
  }
  return *this;
}

ParamGradient& ParamGradient::operator*=(double s) {
  for (auto& layer : layers) {
    layer.weight *= s;
    layer.bias *= s;
  }
  return *this;
}

bool ParamGradient::congruent_with(const SirenParams& params) const {
  if (layers.size() != params.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].weight.rows() != params.layers[k].weight.rows() ||
        layers[k].weight.cols() != params.layers[k].weight.cols() ||
        layers[k].bias.size() != params.layers[k].bias.size()) {
      return false;
    }
  }
  return true;
}

bool ParamGradient::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool ParamGradient::is_zero() const {
  for (const auto& layer : layers) {
    if (!layer.weight.isZero(0.0) || !layer.bias.isZero(0.0)) return false;
  }
  return true;
}

double ParamGradient::squared_norm() const {
  double s = 0.0;
  for (const auto& layer : layers) s += layer.weight.squaredNorm() + layer.bias.squaredNorm();
  return s;
}

SirenParams init_siren(int n_layers, int hidden_dim, int in_dim, int out_dim, double omega0,
                       std::uint64_t seed) {
  if (n_layers < 2) throw ConfigError("siren needs at least 2 layers (one hidden layer)");
  if (hidden_dim < 1 || in_dim < 1 || out_dim < 1) throw ConfigError("siren dims must be positive");
  if (!(omega0 > 0.0)) throw ConfigError("omega0 must be positive");

  Rng rng = make_rng({seed});
  SirenParams params;
  params.omega0 = omega0;
  for (int k = 0; k < n_layers; ++k) {
    const int fan_in = k == 0 ? in_dim : hidden_dim;
    const int fan_out = k == n_layers - 1 ? out_dim : hidden_dim;
    const double bound = k == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / omega0;
    // Bias follows the usual linear-layer default, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    const double bias_bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = uniform(rng, -bound, bound);
    for (int r = 0; r < fan_out; ++r) layer.bias(r) = uniform(rng, -bias_bound, bias_bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

// ---------------------------------------------------------------------------

SirenTape::SirenTape(const SirenParams& params, const Eigen::Matrix4Xd& points, bool with_jacobian)
    : params_(&params), with_jacobian_(with_jacobian), input_(points) {
  const Eigen::Index n = points.cols();
  const double w0 = params.omega0;
  const int hidden_layers = params.n_layers() - 1;
  sin_.resize(hidden_layers);
  cos_.resize(hidden_layers);
  if (with_jacobian) {
    dpre_.resize(hidden_layers);
    dhidden_.resize(hidden_layers);
  }

  for (int k = 0; k < hidden_layers; ++k) {
    const auto& layer = params.layers[k];
    const Eigen::Index h = layer.weight.rows();
    Eigen::MatrixXd pre = k == 0 ? Eigen::MatrixXd(layer.weight * input_)
                                 : Eigen::MatrixXd(layer.weight * sin_[k - 1]);
    pre.colwise() += layer.bias;
    pre *= w0;
    sin_[k] = pre.array().sin().matrix();
    cos_[k] = pre.array().cos().matrix();

    if (with_jacobian) {
      Eigen::MatrixXd& dpre = dpre_[k];
      if (k == 0) {
        dpre.resize(h, 4 * n);
        for (int j = 0; j < kInputDim; ++j) dpre.middleCols(j * n, n).colwise() = layer.weight.col(j);
      } else {
        dpre.noalias() = layer.weight * dhidden_[k - 1];
      }
      Eigen::MatrixXd& dh = dhidden_[k];
      dh.resize(h, 4 * n);
      for (int j = 0; j < kInputDim; ++j) {
        dh.middleCols(j * n, n) = w0 * cos_[k].cwiseProduct(dpre.middleCols(j * n, n));
      }
    }
  }

  const auto& last = params.layers.back();
  value_.noalias() = last.weight * sin_.back();
  value_.colwise() += last.bias;
  if (with_jacobian) jacobian_.noalias() = last.weight * dhidden_.back();
}

void SirenTape::backward(const Upstream& upstream, ParamGradient& grad,
                         Eigen::Matrix4Xd* input_grad) const {
  const SirenParams& params = *params_;
  const Eigen::Index n = batch();
  const double w0 = params.omega0;
  const int hidden_layers = params.n_layers() - 1;
  const bool jac_path = upstream.jacobian.size() > 0;
  if (jac_path && !with_jacobian_) {
    throw DomainError("jacobian upstream given but tape was recorded without jacobian");
  }
  if (upstream.value.rows() != params.out_dim() || upstream.value.cols() != n) {
    throw DomainError("upstream value shape does not match network output");
  }
  if (jac_path && (upstream.jacobian.rows() != params.out_dim() || upstream.jacobian.cols() != 4 * n)) {
    throw DomainError("upstream jacobian shape does not match network output");
  }
  if (grad.layers.empty()) grad = ParamGradient::zeros_like(params);

  const auto& last = params.layers.back();
  auto& glast = grad.layers.back();
  glast.weight.noalias() += upstream.value * sin_.back().transpose();
  glast.bias += upstream.value.rowwise().sum();
  Eigen::MatrixXd g_hidden = last.weight.transpose() * upstream.value;
  Eigen::MatrixXd g_dhidden;
  if (jac_path) {
    glast.weight.noalias() += upstream.jacobian * dhidden_.back().transpose();
    g_dhidden = last.weight.transpose() * upstream.jacobian;
  }

  for (int k = hidden_layers - 1; k >= 0; --k) {
    const auto& layer = params.layers[k];
    auto& glayer = grad.layers[k];
    const Eigen::MatrixXd wcos = w0 * cos_[k];
    Eigen::MatrixXd g_pre = g_hidden.cwiseProduct(wcos);
    Eigen::MatrixXd g_dpre;
    if (jac_path) {
      g_dpre.resize(g_dhidden.rows(), g_dhidden.cols());
      Eigen::MatrixXd second = Eigen::MatrixXd::Zero(g_pre.rows(), n);
      for (int j = 0; j < kInputDim; ++j) {
        g_dpre.middleCols(j * n, n) = g_dhidden.middleCols(j * n, n).cwiseProduct(wcos);
        second += g_dhidden.middleCols(j * n, n).cwiseProduct(dpre_[k].middleCols(j * n, n));
      }
      // d/dpre of w0*cos(w0*pre) is -w0^2*sin(w0*pre).
      g_pre -= (w0 * w0) * sin_[k].cwiseProduct(second);
    }

    if (k == 0) {
      glayer.weight.noalias() += g_pre * input_.transpose();
      if (jac_path) {
        for (int j = 0; j < kInputDim; ++j) {
          glayer.weight.col(j) += g_dpre.middleCols(j * n, n).rowwise().sum();
        }
      }
    } else {
      glayer.weight.noalias() += g_pre * sin_[k - 1].transpose();
      if (jac_path) glayer.weight.noalias() += g_dpre * dhidden_[k - 1].transpose();
    }
    glayer.bias += g_pre.rowwise().sum();

    if (k > 0) {
      g_hidden.noalias() = layer.weight.transpose() * g_pre;
      if (jac_path) g_dhidden.noalias() = layer.weight.transpose() * g_dpre;
    } else if (input_grad != nullptr) {
      input_grad->noalias() = layer.weight.transpose() * g_pre;
    }
  }
}

// ---------------------------------------------------------------------------

Eigen::VectorXd forward(const SirenParams& params, const Vec4& point) {
  if (!point.allFinite()) throw DomainError("forward: non-finite input point");
  return SirenTape(params, point, false).value().col(0);
}

FieldEval eval_with_jacobian(const SirenParams& params, const Vec4& point) {
  if (!point.allFinite()) throw DomainError("eval_with_jacobian: non-finite input point");
  SirenTape tape(params, point, true);
  FieldEval out;
  out.value = tape.value().col(0);
  out.input_jacobian = tape.jacobian();
  return out;
}

Eigen::MatrixXd forward_batch(const SirenParams& params, const Eigen::Matrix4Xd& points) {
  Eigen::MatrixXd out(params.out_dim(), points.cols());
  parallel_chunks(points.cols(), kDefaultChunk, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
    SirenTape tape(params, points.middleCols(b, e - b), false);
    out.middleCols(b, e - b) = tape.value();
  });
  return out;
}

ParamGradient backprop(const SirenParams& params, const Eigen::Matrix4Xd& samples,
                       const Upstream& upstream) {
  const Eigen::Index n = samples.cols();
  const bool jac_path = upstream.jacobian.size() > 0;
  if (upstream.value.rows() != params.out_dim() || upstream.value.cols() != n) {
    throw DomainError("backprop: upstream value shape mismatch");
  }
  if (jac_path && (upstream.jacobian.rows() != params.out_dim() || upstream.jacobian.cols() != 4 * n)) {
    throw DomainError("backprop: upstream jacobian shape mismatch");
  }
  std::vector<ParamGradient> partial(chunk_count(n));
  parallel_chunks(n, kDefaultChunk, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
    const Eigen::Index m = e - b;
    SirenTape tape(params, samples.middleCols(b, m), jac_path);
    Upstream local;
    local.value = upstream.value.middleCols(b, m);
    if (jac_path) {
      local.jacobian.resize(params.out_dim(), 4 * m);
      for (int j = 0; j < kInputDim; ++j) {
        local.jacobian.middleCols(j * m, m) = upstream.jacobian.middleCols(j * n + b, m);
      }
    }
    partial[c] = ParamGradient::zeros_like(params);
    tape.backward(local, partial[c]);
  });
  ParamGradient total = ParamGradient::zeros_like(params);
  for (const auto& g : partial) total += g;
  return total;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kParamsMagic[5] = "SIRN";
constexpr std::uint32_t kParamsVersion = 1;
}  // namespace

void write_params(std::ostream& out, const SirenParams& params) {
  params.validate();
  binio::write_magic(out, kParamsMagic, kParamsVersion);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_layers()));
  binio::write<double>(out, params.omega0);
  for (const auto& layer : params.layers) {
    binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.rows()));
    binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.cols()));
  }
  for (const auto& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) binio::write<double>(out, layer.weight(r, c));
    binio::write_array(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  if (!out) throw IoError("failed writing network parameters");
}

SirenParams read_params(std::istream& in) {
  binio::expect_magic(in, kParamsMagic, kParamsVersion);
  const auto n_layers = binio::read<std::uint32_t>(in);
  if (n_layers < 2 || n_layers > 1024) throw IoError("implausible layer count in parameter file");
  SirenParams params;
  params.omega0 = binio::read<double>(in);
  params.layers.resize(n_layers);
  for (auto& layer : params.layers) {
    const auto rows = binio::read<std::uint32_t>(in);
    const auto cols = binio::read<std::uint32_t>(in);
    if (rows == 0 || cols == 0 || rows > (1u << 16) || cols > (1u << 16)) {
      throw IoError("implausible layer shape in parameter file");
    }
    layer.weight.resize(rows, cols);
    layer.bias.resize(rows);
  }
  for (auto& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = binio::read<double>(in);
    binio::read_array(in, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  try {
    params.validate();
  } catch (const std::runtime_error& e) {
    throw IoError(std::string("parameter file describes an invalid network: ") + e.what());
  }
  return params;
}

void save_params(const std::filesystem::path& path, const SirenParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_params(out, params);
}

SirenParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_params(in);
}

std::uint64_t param_hash(const SirenParams& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const double* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& layer : params.layers) {
    mix(layer.weight.data(), layer.weight.size());
    mix(layer.bias.data(), layer.bias.size());
  }
  mix(&params.omega0, 1);
  return h;
}

}  // namespace fluidrecon
