#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/losses.hpp"
#include "fluidrecon/siren.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fluidrecon {

struct TrainConfig {
  // [train]
  std::array<int, 3> epochs_per_phase{200, 200, 200};
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int times_per_epoch = 16;
  int points_per_time = 4096;
  std::uint64_t seed = 0;
  int checkpoint_every = 50;  // 0 disables periodic checkpoints
  int steps_per_epoch = 1;
  // [weights]
  LossWeights weights;
  // [network]
  int f_layers = 5;
  int f_hidden = 256;
  int v_layers = 5;
  int v_hidden = 256;
  double omega0 = 30.0;
  // [loss]
  ResidualNorm residual_norm = ResidualNorm::L1;
  double uniform_fraction = 0.5;     // share of recon points uniform in the box
  double near_surface_sigma = 0.01;  // jitter of the rest, times the box diagonal
  bool warp_into_velocity = true;

  int total_epochs() const { return epochs_per_phase[0] + epochs_per_phase[1] + epochs_per_phase[2]; }
  /// Throws ConfigError.
  void validate() const;
};

/// Sectioned key/value text ([train], [weights], [network], [loss]) with keys
/// named after the TrainConfig fields. Unknown keys are errors.
TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config(std::istream& in);
/// Sets "section.key" from text; throws ConfigError on unknown keys or bad values.
void set_config_value(TrainConfig& config, const std::string& dotted_key, const std::string& value);
/// All settable "section.key" names.
std::vector<std::string> config_keys();
/// The effective configuration in the same text format.
std::string format_config(const TrainConfig& config);

// ---------------------------------------------------------------------------

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamGradient m;
  ParamGradient v;
  std::int64_t step = 0;
  static AdamState zeros_like(const SirenParams& params);
  bool congruent_with(const SirenParams& params) const;
};

/// One bias-corrected Adam update. A non-congruent or non-finite gradient, or
/// an update that overflows, throws before anything is modified.
void adam_step(SirenParams& params, const ParamGradient& grad, AdamState& state, const AdamHyper& hyper);

// ---------------------------------------------------------------------------

/// Everything needed to continue training.
struct TrainState {
  SirenParams f;
  SirenParams v;
  AdamState adam_f;
  AdamState adam_v;
  int epoch = 0;  // completed epochs
  std::vector<LossReport> history;
  // Domain of the frames trained on, so extraction and matching need no inputs.
  Aabb bbox;
  std::vector<double> times;
};

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(std::ostream& out, const TrainState& state);
TrainState read_checkpoint(std::istream& in);

/// Phase (1, 2, 3) of a zero-based global epoch index.
int phase_of(const TrainConfig& config, int epoch);
/// Warp schedule in phase 3: 0 at its first epoch, 1 at its last, linear.
double warp_progress(const TrainConfig& config, int epoch);

struct TrainHooks {
  std::function<void(const LossReport&)> on_epoch;
  /// Periodic and final checkpoints go here when set.
  std::optional<std::filesystem::path> checkpoint_path;
};

class Trainer {
 public:
  /// Fresh networks from config.seed. `frames` must outlive the trainer.
  Trainer(const FrameSequence& frames, TrainConfig config);
  /// Continues from a saved state; its networks must match the config.
  Trainer(const FrameSequence& frames, TrainConfig config, TrainState resume);

  /// Runs one epoch and returns its report. Throws NumericalError on a
  /// non-finite loss or gradient, leaving the state at the last good epoch.
  LossReport run_epoch();
  /// Runs until `until_epoch` completed epochs (default: all).
  void run(const TrainHooks& hooks = {}, int until_epoch = -1);

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  bool finished() const { return state_.epoch >= config_.total_epochs(); }

 private:
  TrainingBatch make_batch(int epoch, int step, int phase) const;

  const FrameSequence* frames_;
  TrainConfig config_;
  TrainState state_;
  std::vector<SdfOracle> oracles_;
};

/// Convenience wrapper: fresh Trainer run to completion.
TrainState train(const FrameSequence& frames, const TrainConfig& config, const TrainHooks& hooks = {});

/// CSV with header epoch,phase,recon,div,advect,ns,total; values printed
/// with 17 significant digits.
void write_loss_csv(const std::vector<LossReport>& history, const std::filesystem::path& path);

}  // namespace fluidrecon
