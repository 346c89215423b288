#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/siren.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace fluidrecon {

/// Penalty applied to each PDE / reconstruction residual before averaging.
enum class ResidualNorm { L1, Squared };

struct LossWeights {
  double lambda1 = 10.0;  // divergence
  double lambda2 = 10.0;  // advection
  double lambda3 = 0.1;   // self-advection
  void validate() const;
};

struct LossReport {
  int epoch = 0;
  int phase = 0;
  double recon = 0.0;
  double div = 0.0;
  double advect = 0.0;
  double ns = 0.0;
  double total = 0.0;
  Eigen::Index recon_samples = 0;
  Eigen::Index pde_samples = 0;
  Eigen::Index clamped = 0;

  static double weighted_total(double recon, double div, double advect, double ns, const LossWeights& w) {
    return recon + w.lambda1 * div + w.lambda2 * advect + w.lambda3 * ns;
  }
};

/// A loss value with its parameter gradients. Gradients for a network the loss
/// does not train are left empty.
struct LossTerm {
  double value = 0.0;
  ParamGradient grad_f;
  ParamGradient grad_v;
  Eigen::Index samples = 0;
  Eigen::Index clamped = 0;
};

/// Points of one supervised frame with their ground-truth signed distances.
struct SupervisionBatch {
  Eigen::Matrix3Xd points;
  Eigen::VectorXd target;
  double time = 0.0;
  double frame_gap = 1.0;
};

SupervisionBatch make_supervision(const SdfOracle& oracle, Eigen::Matrix3Xd points, double time,
                                  double frame_gap);

/// Linear warp: the geometry network is queried at
/// (x + delta * v(x, t), t + delta), one delta per sample.
struct Warp {
  const SirenParams* velocity = nullptr;
  Eigen::VectorXd deltas;
  double t_lo = -1e300;  // warped times are clamped into [t_lo, t_hi]
  double t_hi = 1e300;
  bool into_velocity = true;  // propagate the recon gradient through the warp point into v
};

/// Mean penalty of f(x, t) (or its warped query) minus the target signed distance.
LossTerm recon_loss(const SirenParams& f, const SupervisionBatch& batch, const Warp* warp = nullptr,
                    ResidualNorm norm = ResidualNorm::L1);

/// Mean penalty of the divergence of v over (x, t) samples; gradient for v.
LossTerm div_loss(const SirenParams& v, const Eigen::Matrix4Xd& samples,
                  ResidualNorm norm = ResidualNorm::L1);

/// Mean penalty of df/dt + v . grad f; gradient for v only, f is held fixed.
LossTerm advect_loss(const SirenParams& f, const SirenParams& v, const Eigen::Matrix4Xd& samples,
                     ResidualNorm norm = ResidualNorm::L1);

/// Mean of the summed per-component penalty of dv/dt + (v . grad) v; gradient for v.
LossTerm ns_loss(const SirenParams& v, const Eigen::Matrix4Xd& samples,
                 ResidualNorm norm = ResidualNorm::L1);

/// div, advect and ns from a single velocity pass. `coeffs` scale each term's
/// gradient contribution; a term with enabled == false is neither evaluated
/// nor differentiated.
struct PdeCoefficients {
  double div = 1.0, advect = 1.0, ns = 1.0;
  bool div_enabled = true, advect_enabled = true, ns_enabled = true;
};
struct PdeTerms {
  double div = 0.0, advect = 0.0, ns = 0.0;
  ParamGradient grad_v;
  Eigen::Index samples = 0;
};
PdeTerms pde_losses(const SirenParams* f, const SirenParams& v, const Eigen::Matrix4Xd& samples,
                    const PdeCoefficients& coeffs, ResidualNorm norm = ResidualNorm::L1);

// ---------------------------------------------------------------------------
// Pointwise residuals. Jacobian columns are d/dx, d/dy, d/dz, d/dt.

using Jacobian3 = Eigen::Matrix<double, 3, 4>;
using Jacobian1 = Eigen::Matrix<double, 1, 4>;

inline double divergence_residual(const Jacobian3& jv) { return jv(0, 0) + jv(1, 1) + jv(2, 2); }

inline double advection_residual(const Jacobian1& jf, const Vec3& v) {
  return jf(0, 3) + v.dot(jf.head<3>().transpose());
}

inline Vec3 self_advection_residual(const Jacobian3& jv, const Vec3& v) {
  return jv.col(3) + jv.leftCols<3>() * v;
}

/// Loss integrands evaluated on arbitrary differentiable fields, for checking
/// residual definitions against closed-form solutions without a network.
namespace functional {

using Field = std::function<FieldEval(const Vec4&)>;

double div_loss(const Field& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm = ResidualNorm::L1);
double advect_loss(const Field& f, const Field& v, const Eigen::Matrix4Xd& samples,
                   ResidualNorm norm = ResidualNorm::L1);
double ns_loss(const Field& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm = ResidualNorm::L1);

/// A network wrapped as a Field whose jacobian comes from central differences
/// of forward() with step h.
Field finite_difference_field(const SirenParams& params, double h = 1e-4);
Field network_field(const SirenParams& params);

}  // namespace functional

// ---------------------------------------------------------------------------

/// Everything one optimizer step consumes.
struct TrainingBatch {
  std::vector<SupervisionBatch> recon;
  std::vector<Eigen::VectorXd> warp_unit;  // per recon batch, uniform in [-1, 1]
  Eigen::Matrix4Xd pde;
};

struct LossOptions {
  ResidualNorm norm = ResidualNorm::L1;
  bool warp_into_velocity = true;
  double t_min = 0.0;
  double t_max = 1.0;
};

struct TotalLoss {
  LossReport report;
  ParamGradient grad_f;  // zero when f is not trained in this phase
  ParamGradient grad_v;
};

/// Phase 1: recon only (f). Phase 2: div + advect + ns (v, f frozen).
/// Phase 3: everything, with warp offsets delta = progress * frame_gap * unit.
TotalLoss total_loss(int phase, const SirenParams& f, const SirenParams& v, const TrainingBatch& batch,
                     const LossWeights& weights, double warp_progress, const LossOptions& options = {});

}  // namespace fluidrecon
