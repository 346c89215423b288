#include "fluidrecon/trainer.hpp"

#include "fluidrecon/binary_io.hpp"
#include "fluidrecon/errors.hpp"
#include "fluidrecon/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fluidrecon {

AdamState AdamState::zeros_like(const SirenParams& params) {
  return {ParamGradient::zeros_like(params), ParamGradient::zeros_like(params), 0};
}

bool AdamState::congruent_with(const SirenParams& params) const {
  return m.congruent_with(params) && v.congruent_with(params);
}

void adam_step(SirenParams& params, const ParamGradient& grad, AdamState& state, const AdamHyper& hyper) {
  if (!grad.congruent_with(params)) throw DomainError("adam_step: gradient shape differs from parameters");
  if (!state.congruent_with(params)) throw DomainError("adam_step: optimizer state shape differs from parameters");
  for (std::size_t k = 0; k < grad.layers.size(); ++k) {
    const auto bad_w = (!grad.layers[k].weight.array().isFinite()).count();
    const auto bad_b = (!grad.layers[k].bias.array().isFinite()).count();
    if (bad_w + bad_b > 0) {
      throw NumericalError("adam_step: non-finite gradient in layer " + std::to_string(k) + " (" +
                           std::to_string(bad_w) + " weights, " + std::to_string(bad_b) + " biases) at step " +
                           std::to_string(state.step + 1));
    }
  }
  SirenParams next = params;
  AdamState next_state = state;
  ++next_state.step;
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(next_state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(next_state.step));
  auto update = [&](auto p, auto m, auto v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    p -= hyper.lr * (m / c1) / ((v / c2).sqrt() + hyper.eps);
  };
  for (std::size_t k = 0; k < grad.layers.size(); ++k) {
    update(next.layers[k].weight.array(), next_state.m.layers[k].weight.array(),
           next_state.v.layers[k].weight.array(), grad.layers[k].weight.array());
    update(next.layers[k].bias.array(), next_state.m.layers[k].bias.array(), next_state.v.layers[k].bias.array(),
           grad.layers[k].bias.array());
  }
  for (std::size_t k = 0; k < next.layers.size(); ++k) {
    if (!next.layers[k].weight.allFinite() || !next.layers[k].bias.allFinite() ||
        !next_state.v.layers[k].weight.allFinite() || !next_state.v.layers[k].bias.allFinite()) {
      throw NumericalError("adam_step: update overflows in layer " + std::to_string(k) + " at step " +
                           std::to_string(next_state.step));
    }
  }
  params = std::move(next);
  state = std::move(next_state);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[5] = "FRCK";
constexpr std::uint32_t kCheckpointVersion = 2;

void write_moments(std::ostream& out, const ParamGradient& g) {
  for (const auto& layer : g.layers) {
    binio::write_array(out, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    binio::write_array(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
}

ParamGradient read_moments(std::istream& in, const SirenParams& shape) {
  ParamGradient g = ParamGradient::zeros_like(shape);
  for (auto& layer : g.layers) {
    binio::read_array(in, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    binio::read_array(in, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return g;
}

void write_adam(std::ostream& out, const AdamState& s) {
  binio::write<std::int64_t>(out, s.step);
  write_moments(out, s.m);
  write_moments(out, s.v);
}

AdamState read_adam(std::istream& in, const SirenParams& shape) {
  AdamState s;
  s.step = binio::read<std::int64_t>(in);
  s.m = read_moments(in, shape);
  s.v = read_moments(in, shape);
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainState& state) {
  binio::write_magic(out, kCheckpointMagic, kCheckpointVersion);
  binio::write<std::int32_t>(out, state.epoch);
  write_params(out, state.f);
  write_params(out, state.v);
  write_adam(out, state.adam_f);
  write_adam(out, state.adam_v);
  binio::write<std::uint64_t>(out, state.history.size());
  for (const LossReport& r : state.history) {
    binio::write<std::int32_t>(out, r.epoch);
    binio::write<std::int32_t>(out, r.phase);
    const double values[5] = {r.recon, r.div, r.advect, r.ns, r.total};
    binio::write_array(out, values, 5);
    binio::write<std::int64_t>(out, r.recon_samples);
    binio::write<std::int64_t>(out, r.pde_samples);
    binio::write<std::int64_t>(out, r.clamped);
  }
  binio::write_array(out, state.bbox.lo.data(), 3);
  binio::write_array(out, state.bbox.hi.data(), 3);
  binio::write<std::uint64_t>(out, state.times.size());
  binio::write_array(out, state.times.data(), state.times.size());
}

TrainState read_checkpoint(std::istream& in) {
  binio::expect_magic(in, kCheckpointMagic, kCheckpointVersion);
  TrainState s;
  s.epoch = binio::read<std::int32_t>(in);
  if (s.epoch < 0) throw IoError("checkpoint has a negative epoch");
  s.f = read_params(in);
  s.v = read_params(in);
  s.adam_f = read_adam(in, s.f);
  s.adam_v = read_adam(in, s.v);
  const auto n = binio::read<std::uint64_t>(in);
  if (n != static_cast<std::uint64_t>(s.epoch)) throw IoError("checkpoint history length differs from its epoch");
  s.history.resize(n);
  for (LossReport& r : s.history) {
    r.epoch = binio::read<std::int32_t>(in);
    r.phase = binio::read<std::int32_t>(in);
    double values[5];
    binio::read_array(in, values, 5);
    r.recon = values[0], r.div = values[1], r.advect = values[2], r.ns = values[3], r.total = values[4];
    r.recon_samples = binio::read<std::int64_t>(in);
    r.pde_samples = binio::read<std::int64_t>(in);
    r.clamped = binio::read<std::int64_t>(in);
  }
  binio::read_array(in, s.bbox.lo.data(), 3);
  binio::read_array(in, s.bbox.hi.data(), 3);
  const auto n_times = binio::read<std::uint64_t>(in);
  if (n_times > (1u << 24)) throw IoError("checkpoint frame count is implausible");
  s.times.resize(n_times);
  binio::read_array(in, s.times.data(), s.times.size());
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after checkpoint");
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    write_checkpoint(out, state);
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

int phase_of(const TrainConfig& config, int epoch) {
  if (epoch < 0 || epoch >= config.total_epochs()) throw DomainError("epoch outside the training schedule");
  if (epoch < config.epochs_per_phase[0]) return 1;
  if (epoch < config.epochs_per_phase[0] + config.epochs_per_phase[1]) return 2;
  return 3;
}

double warp_progress(const TrainConfig& config, int epoch) {
  if (phase_of(config, epoch) != 3) return 0.0;
  const int k = epoch - config.epochs_per_phase[0] - config.epochs_per_phase[1];
  const int n = config.epochs_per_phase[2];
  return n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 1.0;
}

namespace {

TrainState fresh_state(const TrainConfig& c) {
  TrainState s;
  s.f = init_siren(c.f_layers, c.f_hidden, kInputDim, 1, c.omega0, 2 * c.seed);
  s.v = init_siren(c.v_layers, c.v_hidden, kInputDim, 3, c.omega0, 2 * c.seed + 1);
  s.adam_f = AdamState::zeros_like(s.f);
  s.adam_v = AdamState::zeros_like(s.v);
  return s;
}

bool matches(const SirenParams& p, int layers, int hidden, int out, double omega0) {
  return p.n_layers() == layers && p.hidden_dim() == hidden && p.out_dim() == out && p.omega0 == omega0;
}

}  // namespace

Trainer::Trainer(const FrameSequence& frames, TrainConfig config)
    : Trainer(frames, config, (config.validate(), fresh_state(config))) {}

Trainer::Trainer(const FrameSequence& frames, TrainConfig config, TrainState resume)
    : frames_(&frames), config_(std::move(config)), state_(std::move(resume)) {
  config_.validate();
  frames.validate();
  if (!matches(state_.f, config_.f_layers, config_.f_hidden, 1, config_.omega0) ||
      !matches(state_.v, config_.v_layers, config_.v_hidden, 3, config_.omega0)) {
    throw ConfigError("checkpoint networks do not match the [network] configuration");
  }
  if (!state_.adam_f.congruent_with(state_.f) || !state_.adam_v.congruent_with(state_.v)) {
    throw ConfigError("optimizer state does not match the networks");
  }
  state_.bbox = frames.bbox;
  state_.times = frames.times;
  oracles_.reserve(frames.size());
  for (const auto& frame : frames.frames) oracles_.emplace_back(frame);
}

TrainingBatch Trainer::make_batch(int epoch, int step, int phase) const {
  const FrameSequence& fs = *frames_;
  const auto e = static_cast<std::uint64_t>(epoch);
  const auto s = static_cast<std::uint64_t>(step);
  const Eigen::Index m = config_.points_per_time;
  TrainingBatch batch;
  if (phase != 2) {
    Rng rng = make_rng({config_.seed, e, s, 1});
    const double sigma = config_.near_surface_sigma * fs.bbox.diagonal();
    for (std::size_t i = 0; i < fs.size(); ++i) {
      Eigen::Matrix3Xd pts =
          sample_supervision_points(fs.bbox, fs.frames[i], m, config_.uniform_fraction, sigma, rng);
      batch.recon.push_back(make_supervision(oracles_[i], std::move(pts), fs.times[i], fs.frame_gap(i)));
      Eigen::VectorXd unit(m);
      if (phase == 3) {
        for (Eigen::Index j = 0; j < m; ++j) unit(j) = uniform(rng, -1.0, 1.0);
      } else {
        unit.setZero();
      }
      batch.warp_unit.push_back(std::move(unit));
    }
  }
  if (phase != 1) {
    Rng rng = make_rng({config_.seed, e, s, 2});
    batch.pde = sample_spacetime(fs.bbox, fs.t_min(), fs.t_max(), config_.times_per_epoch, m, rng()).spacetime();
  }
  return batch;
}

LossReport Trainer::run_epoch() {
  if (finished()) throw DomainError("training schedule already complete");
  const int epoch = state_.epoch;
  const int phase = phase_of(config_, epoch);
  const double progress = warp_progress(config_, epoch);
  const AdamHyper hyper{config_.lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps};
  LossOptions options;
  options.norm = config_.residual_norm;
  options.warp_into_velocity = config_.warp_into_velocity;
  options.t_min = frames_->t_min();
  options.t_max = frames_->t_max();

  // Work on copies so a failure mid-epoch leaves the state untouched.
  SirenParams f = state_.f, v = state_.v;
  AdamState adam_f = state_.adam_f, adam_v = state_.adam_v;
  LossReport report;
  report.epoch = epoch + 1;
  report.phase = phase;
  for (int step = 0; step < config_.steps_per_epoch; ++step) {
    const TrainingBatch batch = make_batch(epoch, step, phase);
    const TotalLoss loss = total_loss(phase, f, v, batch, config_.weights, progress, options);
    const LossReport& r = loss.report;
    if (!std::isfinite(r.total)) {
      char msg[256];
      std::snprintf(msg, sizeof(msg),
                    "non-finite loss at epoch %d (phase %d, step %d): recon=%g div=%g advect=%g ns=%g", epoch + 1,
                    phase, step, r.recon, r.div, r.advect, r.ns);
      throw NumericalError(msg);
    }
    const bool train_f = phase != 2, train_v = phase != 1;
    if ((train_f && !loss.grad_f.all_finite()) || (train_v && !loss.grad_v.all_finite())) {
      throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch + 1) + " (phase " +
                           std::to_string(phase) + ")");
    }
    if (train_f) adam_step(f, loss.grad_f, adam_f, hyper);
    if (train_v) adam_step(v, loss.grad_v, adam_v, hyper);
    report.recon += r.recon;
    report.div += r.div;
    report.advect += r.advect;
    report.ns += r.ns;
    report.recon_samples += r.recon_samples;
    report.pde_samples += r.pde_samples;
    report.clamped += r.clamped;
  }
  const double share = 1.0 / config_.steps_per_epoch;
  report.recon *= share;
  report.div *= share;
  report.advect *= share;
  report.ns *= share;
  report.total = LossReport::weighted_total(report.recon, report.div, report.advect, report.ns, config_.weights);

  state_.f = std::move(f);
  state_.v = std::move(v);
  state_.adam_f = std::move(adam_f);
  state_.adam_v = std::move(adam_v);
  state_.epoch = epoch + 1;
  state_.history.push_back(report);
  return report;
}

void Trainer::run(const TrainHooks& hooks, int until_epoch) {
  const int target = until_epoch < 0 ? config_.total_epochs() : std::min(until_epoch, config_.total_epochs());
  bool saved = false;
  while (state_.epoch < target) {
    try {
      const LossReport r = run_epoch();
      saved = false;
      if (hooks.on_epoch) hooks.on_epoch(r);
    } catch (const NumericalError&) {
      if (hooks.checkpoint_path) save_checkpoint(state_, *hooks.checkpoint_path);
      throw;
    }
    if (hooks.checkpoint_path && config_.checkpoint_every > 0 && state_.epoch % config_.checkpoint_every == 0) {
      save_checkpoint(state_, *hooks.checkpoint_path);
      saved = true;
    }
  }
  if (hooks.checkpoint_path && !saved) save_checkpoint(state_, *hooks.checkpoint_path);
}

TrainState train(const FrameSequence& frames, const TrainConfig& config, const TrainHooks& hooks) {
  if (frames.frames.empty()) throw DomainError("train: empty frame list");
  Trainer trainer(frames, config);
  trainer.run(hooks);
  return trainer.state();
}

void write_loss_csv(const std::vector<LossReport>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,phase,recon,div,advect,ns,total\n";
  char line[256];
  for (const LossReport& r : history) {
    std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.phase, r.recon, r.div,
                  r.advect, r.ns, r.total);
    out << line;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fluidrecon
