#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace fluidrecon {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

/// Inputs are (x, y, z, t).
inline constexpr int kInputDim = 4;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Weights of a sinusoidal coordinate network
///
///   h_0 = p,  h_k = sin(omega0 * (W_k h_{k-1} + b_k)),  y = W_L h_{L-1} + b_L
///
/// `layers.size()` is the number of affine layers; every layer except the
/// last is followed by a sine activation.
struct SirenParams {
  std::vector<DenseLayer> layers;
  double omega0 = 30.0;

  int n_layers() const { return static_cast<int>(layers.size()); }
  int in_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().weight.rows()); }
  int hidden_dim() const { return static_cast<int>(layers.front().weight.rows()); }
  std::size_t parameter_count() const;

  /// Throws ConfigError on broken shape chain, non-finite entries or omega0 <= 0.
  void validate() const;

  bool operator==(const SirenParams& other) const;
};

/// Gradient with respect to every weight and bias of a SirenParams.
struct ParamGradient {
  std::vector<DenseLayer> layers;

  static ParamGradient zeros_like(const SirenParams& params);
  ParamGradient& operator+=(const ParamGradient& other);
  ParamGradient& operator*=(double s);
  bool congruent_with(const SirenParams& params) const;
  bool all_finite() const;
  bool is_zero() const;
  double squared_norm() const;
};

/// Network output and its jacobian with respect to (x, y, z, t).
struct FieldEval {
  Eigen::VectorXd value;           // out_dim
  Eigen::MatrixXd input_jacobian;  // out_dim x 4
};

SirenParams init_siren(int n_layers, int hidden_dim, int in_dim, int out_dim, double omega0,
                       std::uint64_t seed);

Eigen::VectorXd forward(const SirenParams& params, const Vec4& point);
FieldEval eval_with_jacobian(const SirenParams& params, const Vec4& point);

// ---------------------------------------------------------------------------
// Batched kernels. Points are columns of a 4 x B matrix. Jacobians are stored
// as out_dim x 4B with column block j holding d(output)/d(input_j).

/// Values only, parallel over chunks of columns.
Eigen::MatrixXd forward_batch(const SirenParams& params, const Eigen::Matrix4Xd& points);

/// Seeds for reverse mode: d(loss)/d(value) and optionally d(loss)/d(jacobian).
struct Upstream {
  Eigen::MatrixXd value;     // out_dim x B
  Eigen::MatrixXd jacobian;  // out_dim x 4B, or empty when the loss ignores the jacobian
};

/// Activations of one forward pass over a small batch, kept for backward().
/// Forward-mode tangents of the four inputs are propagated alongside the values
/// when `with_jacobian` is set.
class SirenTape {
 public:
  SirenTape(const SirenParams& params, const Eigen::Matrix4Xd& points, bool with_jacobian);

  Eigen::Index batch() const { return input_.cols(); }
  const Eigen::MatrixXd& value() const { return value_; }
  /// out_dim x 4B, empty when recorded without jacobian.
  const Eigen::MatrixXd& jacobian() const { return jacobian_; }
  auto jacobian_block(int j) const { return jacobian_.middleCols(j * batch(), batch()); }

  /// Accumulates d(loss)/d(params) into `grad`; writes d(loss)/d(input) to
  /// `input_grad` (4 x B) when non-null. Second-order terms through the
  /// jacobian path are included when `upstream.jacobian` is non-empty.
  void backward(const Upstream& upstream, ParamGradient& grad,
                Eigen::Matrix4Xd* input_grad = nullptr) const;

 private:
  const SirenParams* params_;
  bool with_jacobian_;
  Eigen::Matrix4Xd input_;
  std::vector<Eigen::MatrixXd> sin_;  // per hidden layer, h x B
  std::vector<Eigen::MatrixXd> cos_;
  std::vector<Eigen::MatrixXd> dpre_;    // tangents of pre-activations, h x 4B
  std::vector<Eigen::MatrixXd> dhidden_; // tangents of activations, h x 4B
  Eigen::MatrixXd value_;
  Eigen::MatrixXd jacobian_;
};

/// Parameter gradient of a scalar loss for the given upstream seeds, summed
/// over samples with a deterministic chunked reduction.
ParamGradient backprop(const SirenParams& params, const Eigen::Matrix4Xd& samples,
                       const Upstream& upstream);

// ---------------------------------------------------------------------------
// Checkpoint dump: magic "SIRN", version, dims, omega0, row-major weights.

void write_params(std::ostream& out, const SirenParams& params);
SirenParams read_params(std::istream& in);
void save_params(const std::filesystem::path& path, const SirenParams& params);
SirenParams load_params(const std::filesystem::path& path);

/// FNV-1a over the raw bytes of every parameter.
std::uint64_t param_hash(const SirenParams& params);

}  // namespace fluidrecon
