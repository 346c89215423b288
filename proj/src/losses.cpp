#include "fluidrecon/losses.hpp"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace fluidrecon {

void LossWeights::validate() const {
  for (double w : {lambda1, lambda2, lambda3}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
  }
}

namespace {

inline double penalty(double r, ResidualNorm norm) { return norm == ResidualNorm::L1 ? std::abs(r) : r * r; }

inline double penalty_slope(double r, ResidualNorm norm) {
  if (norm == ResidualNorm::Squared) return 2.0 * r;
  return static_cast<double>((r > 0.0) - (r < 0.0));
}

Eigen::Matrix4Xd with_time(const Eigen::Matrix3Xd& points, double t) {
  Eigen::Matrix4Xd out(4, points.cols());
  out.topRows(3) = points;
  out.row(3).setConstant(t);
  return out;
}

}  // namespace

SupervisionBatch make_supervision(const SdfOracle& oracle, Eigen::Matrix3Xd points, double time,
                                  double frame_gap) {
  SupervisionBatch batch;
  batch.target = oracle.signed_distances(points);
  batch.points = std::move(points);
  batch.time = time;
  batch.frame_gap = frame_gap;
  return batch;
}

LossTerm recon_loss(const SirenParams& f, const SupervisionBatch& batch, const Warp* warp, ResidualNorm norm) {
  const Eigen::Index n = batch.points.cols();
  if (n == 0) throw DomainError("recon_loss: empty supervision batch");
  if (batch.target.size() != n) throw DomainError("recon_loss: one target per point required");
  const bool warped = warp != nullptr;
  if (warped && (warp->velocity == nullptr || warp->deltas.size() != n)) {
    throw DomainError("recon_loss: warp needs a velocity network and one offset per point");
  }
  const bool into_v = warped && warp->into_velocity;
  const double inv_n = 1.0 / static_cast<double>(n);

  struct Partial {
    double sum = 0.0;
    Eigen::Index clamped = 0;
    ParamGradient gf, gv;
  };
  std::vector<Partial> partial(chunk_count(n));

  parallel_chunks(n, kDefaultChunk, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
    const Eigen::Index m = e - b;
    Partial& out = partial[c];
    Eigen::Matrix4Xd query = with_time(batch.points.middleCols(b, m), batch.time);
    std::optional<SirenTape> vtape;
    if (warped) {
      vtape.emplace(*warp->velocity, query, false);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double delta = warp->deltas(b + i);
        query.block<3, 1>(0, i) += delta * vtape->value().col(i);
        const double t = batch.time + delta;
        const double tc = std::clamp(t, warp->t_lo, warp->t_hi);
        if (tc != t) ++out.clamped;
        query(3, i) = tc;
      }
    }
    SirenTape ftape(f, query, false);
    Upstream up{Eigen::MatrixXd(1, m), {}};
    for (Eigen::Index i = 0; i < m; ++i) {
      const double r = ftape.value()(0, i) - batch.target(b + i);
      out.sum += penalty(r, norm);
      up.value(0, i) = penalty_slope(r, norm) * inv_n;
    }
    out.gf = ParamGradient::zeros_like(f);
    if (into_v) {
      Eigen::Matrix4Xd g_query(4, m);
      ftape.backward(up, out.gf, &g_query);
      Upstream vup{Eigen::MatrixXd(3, m), {}};
      for (Eigen::Index i = 0; i < m; ++i) vup.value.col(i) = warp->deltas(b + i) * g_query.block<3, 1>(0, i);
      out.gv = ParamGradient::zeros_like(*warp->velocity);
      vtape->backward(vup, out.gv);
    } else {
      ftape.backward(up, out.gf);
    }
  });

  LossTerm term;
  term.samples = n;
  term.grad_f = ParamGradient::zeros_like(f);
  if (warped) term.grad_v = ParamGradient::zeros_like(*warp->velocity);
  double sum = 0.0;
  for (const auto& p : partial) {
    sum += p.sum;
    term.clamped += p.clamped;
    term.grad_f += p.gf;
    if (into_v) term.grad_v += p.gv;
  }
  term.value = sum * inv_n;
  return term;
}

PdeTerms pde_losses(const SirenParams* f, const SirenParams& v, const Eigen::Matrix4Xd& samples,
                    const PdeCoefficients& coeffs, ResidualNorm norm) {
  const Eigen::Index n = samples.cols();
  if (n == 0) throw DomainError("pde_losses: no samples");
  if (v.out_dim() != 3) throw DomainError("pde_losses: velocity network must have 3 outputs");
  if (coeffs.advect_enabled && (f == nullptr || f->out_dim() != 1)) {
    throw DomainError("pde_losses: advection needs a scalar geometry network");
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  struct Partial {
    double div = 0.0, advect = 0.0, ns = 0.0;
    ParamGradient gv;
  };
  std::vector<Partial> partial(chunk_count(n));

  parallel_chunks(n, kDefaultChunk, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
    const Eigen::Index m = e - b;
    Partial& out = partial[c];
    const Eigen::Matrix4Xd x = samples.middleCols(b, m);
    SirenTape vtape(v, x, true);
    const Eigen::MatrixXd& V = vtape.value();
    const Eigen::MatrixXd& JV = vtape.jacobian();  // 3 x 4m
    Upstream up{Eigen::MatrixXd::Zero(3, m), Eigen::MatrixXd::Zero(3, 4 * m)};
    auto jv = [&](int row, int j, Eigen::Index i) { return JV(row, j * m + i); };
    auto gj = [&](int row, int j, Eigen::Index i) -> double& { return up.jacobian(row, j * m + i); };

    if (coeffs.div_enabled) {
      const double scale = coeffs.div * inv_n;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double r = jv(0, 0, i) + jv(1, 1, i) + jv(2, 2, i);
        out.div += penalty(r, norm);
        const double g = scale * penalty_slope(r, norm);
        for (int a = 0; a < 3; ++a) gj(a, a, i) += g;
      }
    }

    if (coeffs.advect_enabled) {
      SirenTape ftape(*f, x, true);
      const Eigen::MatrixXd& JF = ftape.jacobian();  // 1 x 4m
      const double scale = coeffs.advect * inv_n;
      for (Eigen::Index i = 0; i < m; ++i) {
        double r = JF(0, 3 * m + i);
        for (int a = 0; a < 3; ++a) r += V(a, i) * JF(0, a * m + i);
        out.advect += penalty(r, norm);
        const double g = scale * penalty_slope(r, norm);
        for (int a = 0; a < 3; ++a) up.value(a, i) += g * JF(0, a * m + i);
      }
    }

    if (coeffs.ns_enabled) {
      const double scale = coeffs.ns * inv_n;
      for (Eigen::Index i = 0; i < m; ++i) {
        for (int a = 0; a < 3; ++a) {
          double r = jv(a, 3, i);
          for (int j = 0; j < 3; ++j) r += jv(a, j, i) * V(j, i);
          out.ns += penalty(r, norm);
          const double g = scale * penalty_slope(r, norm);
          gj(a, 3, i) += g;
          for (int j = 0; j < 3; ++j) {
            gj(a, j, i) += g * V(j, i);
            up.value(j, i) += g * jv(a, j, i);
          }
        }
      }
    }

    out.gv = ParamGradient::zeros_like(v);
    vtape.backward(up, out.gv);
  });

  PdeTerms terms;
  terms.samples = n;
  terms.grad_v = ParamGradient::zeros_like(v);
  double div = 0.0, advect = 0.0, ns = 0.0;
  for (const auto& p : partial) {
    div += p.div;
    advect += p.advect;
    ns += p.ns;
    terms.grad_v += p.gv;
  }
  terms.div = div * inv_n;
  terms.advect = advect * inv_n;
  terms.ns = ns * inv_n;
  return terms;
}

LossTerm div_loss(const SirenParams& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm) {
  PdeCoefficients c;
  c.advect_enabled = c.ns_enabled = false;
  PdeTerms t = pde_losses(nullptr, v, samples, c, norm);
  return {t.div, {}, std::move(t.grad_v), t.samples, 0};
}

LossTerm advect_loss(const SirenParams& f, const SirenParams& v, const Eigen::Matrix4Xd& samples,
                     ResidualNorm norm) {
  PdeCoefficients c;
  c.div_enabled = c.ns_enabled = false;
  PdeTerms t = pde_losses(&f, v, samples, c, norm);
  // f is held fixed: its gradient is identically zero.
  return {t.advect, ParamGradient::zeros_like(f), std::move(t.grad_v), t.samples, 0};
}

LossTerm ns_loss(const SirenParams& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm) {
  PdeCoefficients c;
  c.div_enabled = c.advect_enabled = false;
  PdeTerms t = pde_losses(nullptr, v, samples, c, norm);
  return {t.ns, {}, std::move(t.grad_v), t.samples, 0};
}

// ---------------------------------------------------------------------------

namespace functional {

namespace {
Jacobian3 jac3(const FieldEval& e) {
  if (e.input_jacobian.rows() != 3 || e.input_jacobian.cols() != 4) {
    throw DomainError("expected a 3-component field");
  }
  return e.input_jacobian;
}
Jacobian1 jac1(const FieldEval& e) {
  if (e.input_jacobian.rows() != 1 || e.input_jacobian.cols() != 4) {
    throw DomainError("expected a scalar field");
  }
  return e.input_jacobian;
}
}  // namespace

double div_loss(const Field& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) sum += penalty(divergence_residual(jac3(v(samples.col(i)))), norm);
  return sum / static_cast<double>(samples.cols());
}

double advect_loss(const Field& f, const Field& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const Vec4 p = samples.col(i);
    const Vec3 vel = v(p).value;
    sum += penalty(advection_residual(jac1(f(p)), vel), norm);
  }
  return sum / static_cast<double>(samples.cols());
}

double ns_loss(const Field& v, const Eigen::Matrix4Xd& samples, ResidualNorm norm) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const FieldEval e = v(samples.col(i));
    const Vec3 r = self_advection_residual(jac3(e), e.value);
    for (int a = 0; a < 3; ++a) sum += penalty(r(a), norm);
  }
  return sum / static_cast<double>(samples.cols());
}

Field finite_difference_field(const SirenParams& params, double h) {
  return [params, h](const Vec4& p) {
    FieldEval e;
    e.value = forward(params, p);
    e.input_jacobian.resize(e.value.size(), 4);
    for (int j = 0; j < 4; ++j) {
      Vec4 hi = p, lo = p;
      hi(j) += h;
      lo(j) -= h;
      e.input_jacobian.col(j) = (forward(params, hi) - forward(params, lo)) / (2.0 * h);
    }
    return e;
  };
}

Field network_field(const SirenParams& params) {
  return [params](const Vec4& p) { return eval_with_jacobian(params, p); };
}

}  // namespace functional

// ---------------------------------------------------------------------------

TotalLoss total_loss(int phase, const SirenParams& f, const SirenParams& v, const TrainingBatch& batch,
                     const LossWeights& weights, double warp_progress, const LossOptions& options) {
  if (phase < 1 || phase > 3) throw DomainError("total_loss: phase must be 1, 2 or 3");
  weights.validate();
  TotalLoss out;
  out.report.phase = phase;
  out.grad_f = ParamGradient::zeros_like(f);
  out.grad_v = ParamGradient::zeros_like(v);

  if (phase != 2 && !batch.recon.empty()) {
    const double share = 1.0 / static_cast<double>(batch.recon.size());
    double recon = 0.0;
    for (std::size_t k = 0; k < batch.recon.size(); ++k) {
      const SupervisionBatch& sb = batch.recon[k];
      LossTerm term;
      if (phase == 3) {
        Warp warp;
        warp.velocity = &v;
        warp.deltas = (warp_progress * sb.frame_gap) * batch.warp_unit.at(k);
        warp.t_lo = options.t_min - sb.frame_gap;
        warp.t_hi = options.t_max + sb.frame_gap;
        warp.into_velocity = options.warp_into_velocity;
        term = recon_loss(f, sb, &warp, options.norm);
        if (options.warp_into_velocity) {
          term.grad_v *= share;
          out.grad_v += term.grad_v;
        }
      } else {
        term = recon_loss(f, sb, nullptr, options.norm);
      }
      recon += term.value;
      term.grad_f *= share;
      out.grad_f += term.grad_f;
      out.report.recon_samples += term.samples;
      out.report.clamped += term.clamped;
    }
    out.report.recon = recon * share;
  }

  if (phase != 1 && batch.pde.cols() > 0) {
    PdeCoefficients coeffs;
    coeffs.div = weights.lambda1;
    coeffs.advect = weights.lambda2;
    coeffs.ns = weights.lambda3;
    PdeTerms terms = pde_losses(&f, v, batch.pde, coeffs, options.norm);
    out.report.div = terms.div;
    out.report.advect = terms.advect;
    out.report.ns = terms.ns;
    out.report.pde_samples = terms.samples;
    out.grad_v += terms.grad_v;
  }

  out.report.total = LossReport::weighted_total(out.report.recon, out.report.div, out.report.advect,
                                                out.report.ns, weights);
  return out;
}

}  // namespace fluidrecon
