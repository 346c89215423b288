#include "cli.hpp"

#include "fluidrecon/correspondence.hpp"
#include "fluidrecon/errors.hpp"
#include "fluidrecon/evaluation.hpp"
#include "fluidrecon/extraction.hpp"
#include "fluidrecon/io.hpp"
#include "fluidrecon/parallel.hpp"
#include "fluidrecon/scenes.hpp"
#include "fluidrecon/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace fluidrecon::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
  std::vector<std::string> sets;
  std::vector<std::string> argv;
};

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw UsageError("--out DIR is required");
  std::error_code ec;
  fs::create_directories(g.out, ec);
  if (ec) throw IoError("cannot create " + g.out + ": " + ec.message());
  return g.out;
}

/// Written last; its presence marks a finished run.
class RunManifest {
 public:
  RunManifest(std::string command, const Globals& g) {
    doc_["tool"] = "fluidrecon";
    doc_["version"] = kToolVersion;
    doc_["command"] = std::move(command);
    doc_["argv"] = g.argv;
    doc_["threads"] = max_threads();
    if (g.seed) doc_["seed"] = *g.seed;
  }
  json& doc() { return doc_; }
  void add_artifact(const fs::path& p) { artifacts_.push_back(p); }
  void write(const fs::path& dir) {
    json paths = json::array();
    for (const auto& p : artifacts_) {
      if (!fs::exists(p)) throw IoError("artifact missing at manifest time: " + p.string());
      paths.push_back(p.string());
    }
    doc_["artifacts"] = paths;
    const fs::path path = dir / "run_manifest.json";
    fs::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream f(tmp);
      f << doc_.dump(2) << '\n';
      if (!f) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot write " + path.string() + ": " + ec.message());
  }

 private:
  json doc_;
  std::vector<fs::path> artifacts_;
};

std::string env_name(const std::string& dotted) {
  std::string name = "FLUIDRECON_";
  for (char c : dotted) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

// Precedence: defaults < config file < environment < --set < --seed.
TrainConfig effective_config(const Globals& g) {
  TrainConfig config = g.config.empty() ? TrainConfig{} : load_config(g.config);
  for (const std::string& key : config_keys()) {
    if (const char* v = std::getenv(env_name(key).c_str())) set_config_value(config, key, v);
  }
  for (const std::string& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.seed = *g.seed;
  config.validate();
  return config;
}

json config_json(const TrainConfig& config) {
  json j;
  std::istringstream text(format_config(config));
  std::string line, section;
  while (std::getline(text, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    j[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

FrameSequence load_inputs(const std::string& manifest, const std::vector<std::string>& inputs) {
  if (!manifest.empty() && !inputs.empty()) throw UsageError("give either --frames or --inputs, not both");
  if (!manifest.empty()) return load_manifest(manifest);
  if (inputs.empty()) throw UsageError("no input frames (use --frames MANIFEST or --inputs FILE...)");
  return load_frames(std::vector<fs::path>(inputs.begin(), inputs.end()));
}

// ---------------------------------------------------------------------------

struct GenSceneArgs {
  std::string kind;
  int frames = 8;
  int points = 5000;
  std::optional<double> radius, speed;
};

void run_gen_scene(const GenSceneArgs& a, const Globals& g, std::ostream& out) {
  SceneSpec spec = SceneSpec::for_kind(scene_kind_from_string(a.kind));
  spec.n_frames = a.frames;
  spec.points_per_frame = a.points;
  spec.seed = g.seed.value_or(0);
  if (a.radius) spec.radius = *a.radius;
  if (a.speed) spec.speed = *a.speed;
  spec.validate();
  const fs::path dir = require_out(g);
  RunManifest manifest("gen-scene", g);
  const Scene scene = generate(spec);
  const fs::path scene_manifest = write_scene(scene, dir);
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.ply", i);
    manifest.add_artifact(dir / name);
  }
  manifest.add_artifact(scene_manifest);
  manifest.doc()["scene"] = {{"kind", a.kind}, {"n_frames", spec.n_frames}, {"points_per_frame", spec.points_per_frame}};
  manifest.write(dir);
  out << "wrote " << scene.frames.size() << " frames to " << dir.string() << "\n";
}

struct TrainArgs {
  std::string frames;
  std::vector<std::string> inputs;
  std::string resume;
  bool quiet = false;
};

void run_train(const TrainArgs& a, const Globals& g, std::ostream& out) {
  const TrainConfig config = effective_config(g);
  const FrameSequence frames = load_inputs(a.frames, a.inputs);
  const fs::path dir = require_out(g);
  RunManifest manifest("train", g);
  manifest.doc()["config"] = config_json(config);
  manifest.doc()["seed"] = config.seed;

  std::optional<Trainer> trainer;
  if (a.resume.empty()) {
    trainer.emplace(frames, config);
  } else {
    trainer.emplace(frames, config, load_checkpoint(a.resume));
  }

  const fs::path checkpoint = dir / "checkpoint.frck";
  const fs::path loss_csv = dir / "loss.csv";
  const fs::path config_ini = dir / "config.ini";
  {
    std::ofstream f(config_ini);
    f << format_config(config);
    if (!f) throw IoError("failed writing " + config_ini.string());
  }

  std::array<double, 3> durations{0.0, 0.0, 0.0};
  auto last = Clock::now();
  TrainHooks hooks;
  hooks.checkpoint_path = checkpoint;
  hooks.on_epoch = [&](const LossReport& r) {
    const auto now = Clock::now();
    durations[r.phase - 1] += std::chrono::duration<double>(now - last).count();
    last = now;
    if (!a.quiet && (r.epoch % 10 == 0 || r.epoch == config.total_epochs())) {
      char line[200];
      std::snprintf(line, sizeof(line), "epoch %d phase %d recon %.6g div %.6g advect %.6g ns %.6g total %.6g\n",
                    r.epoch, r.phase, r.recon, r.div, r.advect, r.ns, r.total);
      out << line << std::flush;
    }
  };
  try {
    trainer->run(hooks);
  } catch (const NumericalError&) {
    write_loss_csv(trainer->state().history, loss_csv);
    throw;
  }
  write_loss_csv(trainer->state().history, loss_csv);

  manifest.doc()["phase_durations_s"] = durations;
  manifest.doc()["epochs"] = trainer->state().epoch;
  manifest.add_artifact(checkpoint);
  manifest.add_artifact(loss_csv);
  manifest.add_artifact(config_ini);
  manifest.write(dir);
  out << "trained " << trainer->state().epoch << " epochs; checkpoint " << checkpoint.string() << "\n";
}

struct ReconstructArgs {
  std::string checkpoint;
  std::vector<double> times;
  bool all = false;
  int res = 64;
  std::string format = "obj";
  double iso = 0.0;
};

void run_reconstruct(const ReconstructArgs& a, const Globals& g, std::ostream& out) {
  if (a.all == !a.times.empty()) throw UsageError("give exactly one of --time T or --all");
  if (a.format != "obj" && a.format != "ply") throw UsageError("--format must be obj or ply");
  const TrainState state = load_checkpoint(a.checkpoint);
  if (state.bbox.degenerate()) throw IoError(a.checkpoint + ": checkpoint has no domain box");
  const fs::path dir = require_out(g);
  RunManifest manifest("reconstruct", g);
  std::vector<std::pair<double, std::string>> jobs;
  if (a.all) {
    for (std::size_t i = 0; i < state.times.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "mesh_%03zu.", i);
      jobs.emplace_back(state.times[i], name + a.format);
    }
  } else {
    for (double t : a.times) jobs.emplace_back(t, "mesh_t" + shortest(t) + "." + a.format);
  }
  for (const auto& [t, name] : jobs) {
    const TriMesh mesh = marching_cubes(sample_grid(state.f, t, a.res, state.bbox), a.iso);
    const fs::path path = dir / name;
    export_mesh(mesh, path);
    manifest.add_artifact(path);
    out << "t=" << shortest(t) << " " << path.string() << " vertices " << mesh.n_vertices() << " triangles "
        << mesh.n_triangles() << "\n";
  }
  manifest.doc()["resolution"] = a.res;
  manifest.write(dir);
}

struct MatchArgs {
  std::string checkpoint, source, target;
  std::optional<double> t_start, t_end;
  std::optional<int> steps;
};

void run_match(const MatchArgs& a, const Globals& g, std::ostream& out) {
  const TrainState state = load_checkpoint(a.checkpoint);
  if (state.times.size() < 2 && (!a.t_start || !a.t_end)) {
    throw UsageError("checkpoint records no frame times; pass --t-start and --t-end");
  }
  const double t0 = a.t_start.value_or(state.times.empty() ? 0.0 : state.times.front());
  const double t1 = a.t_end.value_or(state.times.empty() ? 0.0 : state.times.back());
  const int gaps = std::max<int>(1, static_cast<int>(state.times.size()) - 1);
  const int steps = a.steps.value_or(kStepsPerFrameGap * gaps);
  const Eigen::Matrix3Xd source = read_point_file(a.source).points;
  const Eigen::Matrix3Xd target = read_point_file(a.target).points;
  const fs::path dir = require_out(g);
  RunManifest manifest("match", g);

  const FlowTrajectory traj = flow_points(source, state.v, t0, t1, steps);
  const Matching m = nearest_match(traj.end_points, target);
  const fs::path csv = dir / "matches.csv";
  {
    std::ofstream f(csv);
    f << "source_index,target_index,residual\n";
    char line[96];
    for (std::size_t i = 0; i < m.target.size(); ++i) {
      std::snprintf(line, sizeof(line), "%zu,%ld,%.17g\n", i, static_cast<long>(m.target[i]), m.residual[i]);
      f << line;
    }
    if (!f) throw IoError("failed writing " + csv.string());
  }
  double mean = 0.0;
  for (double r : m.residual) mean += r;
  mean /= std::max<std::size_t>(1, m.residual.size());
  manifest.add_artifact(csv);
  manifest.doc()["flow"] = {{"t_start", t0}, {"t_end", t1}, {"n_steps", steps}};
  manifest.write(dir);
  out << "matched " << m.target.size() << " points; mean residual " << shortest(mean) << "\n";
}

struct EvalArgs {
  std::string pred, gt, mesh;
  long samples = 100000;
  bool squared = false;
  int thresholds = 101;
};

std::vector<Eigen::Index> read_matching_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<Eigen::Index> targets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string src, tgt;
    if (!std::getline(ss, src, ',') || !std::getline(ss, tgt, ',')) {
      throw IoError(path.string() + ": malformed matching row '" + line + "'");
    }
    long value = 0;
    const auto [ptr, ec] = std::from_chars(tgt.data(), tgt.data() + tgt.size(), value);
    if (ec != std::errc() || ptr != tgt.data() + tgt.size()) {
      throw IoError(path.string() + ": bad target index '" + tgt + "'");
    }
    targets.push_back(value);
  }
  return targets;
}

bool is_csv(const std::string& p) {
  std::string ext = fs::path(p).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv";
}

void run_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  const std::uint64_t seed = g.seed.value_or(0);
  std::optional<RunManifest> manifest;
  fs::path dir;
  if (!g.out.empty()) {
    dir = require_out(g);
    manifest.emplace("eval", g);
  }

  if (is_csv(a.pred) != is_csv(a.gt)) throw UsageError("--pred and --gt must both be meshes or both matchings");
  if (is_csv(a.pred)) {
    if (a.mesh.empty()) throw UsageError("matching evaluation needs --mesh TARGET_MESH");
    const auto pred = read_matching_csv(a.pred);
    const auto gt = read_matching_csv(a.gt);
    const TriMesh mesh = load_mesh(a.mesh);
    for (const auto* m : {&pred, &gt}) {
      for (Eigen::Index i : *m) {
        if (i < 0 || i >= mesh.n_vertices()) throw IoError("matching refers to a vertex outside the mesh");
      }
    }
    const GeodesicErrors ge = geodesic_errors(pred, gt, mesh);
    const MatchingCurve curve = matching_curve(ge.errors, uniform_thresholds(a.thresholds));
    double mean = 0.0;
    for (double e : ge.errors) mean += e;
    mean /= static_cast<double>(ge.errors.size());
    out << "mean_geodesic_error " << shortest(mean) << "\n";
    out << "disconnected " << ge.disconnected << "\n";
    if (manifest) {
      const fs::path csv = dir / "matching_curve.csv";
      std::ofstream f(csv);
      f << "threshold,fraction\n";
      for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
        f << shortest(curve.thresholds[k]) << "," << shortest(curve.fractions[k]) << "\n";
      }
      if (!f) throw IoError("failed writing " + csv.string());
      manifest->add_artifact(csv);
      manifest->doc()["mean_geodesic_error"] = mean;
      manifest->write(dir);
    }
    return;
  }

  if (a.samples < 1) throw UsageError("--samples must be >= 1");
  const TriMesh pred = load_mesh(a.pred);
  const TriMesh gt = load_mesh(a.gt);
  const double value = mesh_chamfer(pred, gt, a.samples, seed, a.squared);
  out << "chamfer " << shortest(value) << "\n";
  if (manifest) {
    const fs::path csv = dir / "metrics.csv";
    std::ofstream f(csv);
    f << "metric,value\n" << (a.squared ? "chamfer_squared," : "chamfer,") << shortest(value) << "\n";
    if (!f) throw IoError("failed writing " + csv.string());
    manifest->add_artifact(csv);
    manifest->doc()["chamfer"] = value;
    manifest->write(dir);
  }
}

int fail(std::ostream& err, int code, const char* category, const std::string& message) {
  err << "error: " << category << ": " << message << "\n";
  return code;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn a 4D implicit geometry field and a velocity field from oriented point-cloud frames.",
               "fluidrecon"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  Globals g;
  g.argv = args;
  app.add_option("--config", g.config, "Training config file")->envname("FLUIDRECON_CONFIG");
  app.add_option("--seed", g.seed, "Random seed")->envname("FLUIDRECON_SEED");
  app.add_option("--threads", g.threads, "Worker threads (0 = runtime default)")
      ->envname("FLUIDRECON_THREADS")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "Output directory")->envname("FLUIDRECON_OUT");
  app.add_option("--set", g.sets, "Config override section.key=value (repeatable)");

  GenSceneArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Write a synthetic frame sequence and its manifest");
  gen_cmd->add_option("--kind", gen.kind, "translating_sphere | merging_spheres | rotating_box | swirl")
      ->required();
  gen_cmd->add_option("--frames", gen.frames, "Number of frames");
  gen_cmd->add_option("--points", gen.points, "Points per frame");
  gen_cmd->add_option("--radius", gen.radius, "Sphere radius override");
  gen_cmd->add_option("--speed", gen.speed, "Translation or approach speed override");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Three-phase training");
  train_cmd->add_option("--frames", tr.frames, "Scene manifest (JSON)");
  train_cmd->add_option("--inputs", tr.inputs, "Frame files in time order");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch output");

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Extract meshes from a checkpoint");
  rec_cmd->add_option("--checkpoint", rec.checkpoint, "Checkpoint file")->required();
  rec_cmd->add_option("--time", rec.times, "Time to extract (repeatable)");
  rec_cmd->add_flag("--all", rec.all, "Extract every supervised frame time");
  rec_cmd->add_option("--res", rec.res, "Grid resolution")->check(CLI::Range(2, 1024));
  rec_cmd->add_option("--format", rec.format, "obj | ply");
  rec_cmd->add_option("--iso", rec.iso, "Iso value");

  MatchArgs mt;
  auto* match_cmd = app.add_subcommand("match", "Flow source points and match them to target vertices");
  match_cmd->add_option("--checkpoint", mt.checkpoint, "Checkpoint file")->required();
  match_cmd->add_option("--source", mt.source, "Source points (PLY/OBJ)")->required();
  match_cmd->add_option("--target", mt.target, "Target points (PLY/OBJ)")->required();
  match_cmd->add_option("--t-start", mt.t_start, "Start time (default: first frame)");
  match_cmd->add_option("--t-end", mt.t_end, "End time (default: last frame)");
  match_cmd->add_option("--steps", mt.steps, "Euler steps")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Chamfer between meshes, or matching curve between matchings");
  eval_cmd->add_option("--pred", ev.pred, "Predicted mesh or matching CSV")->required();
  eval_cmd->add_option("--gt", ev.gt, "Ground-truth mesh or matching CSV")->required();
  eval_cmd->add_option("--mesh", ev.mesh, "Target mesh for geodesic matching errors");
  eval_cmd->add_option("--samples", ev.samples, "Surface samples per mesh");
  eval_cmd->add_flag("--squared", ev.squared, "Squared chamfer variant");
  eval_cmd->add_option("--thresholds", ev.thresholds, "Matching-curve threshold count")->check(CLI::Range(2, 100000));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    fail(err, kUsage, "usage", e.what());
    err << app.help();
    return kUsage;
  }

  try {
    if (g.threads > 0) set_num_threads(g.threads);
    if (gen_cmd->parsed()) run_gen_scene(gen, g, out);
    if (train_cmd->parsed()) run_train(tr, g, out);
    if (rec_cmd->parsed()) run_reconstruct(rec, g, out);
    if (match_cmd->parsed()) run_match(mt, g, out);
    if (eval_cmd->parsed()) run_eval(ev, g, out);
  } catch (const UsageError& e) {
    fail(err, kUsage, "usage", e.what());
    err << app.help();
    return kUsage;
  } catch (const ConfigError& e) {
    return fail(err, kConfig, "config", e.what());
  } catch (const DomainError& e) {
    return fail(err, kUsage, "usage", e.what());
  } catch (const IoError& e) {
    return fail(err, kIo, "io", e.what());
  } catch (const NumericalError& e) {
    return fail(err, kNumerical, "numerical", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(err, kIo, "io", e.what());
  } catch (const std::exception& e) {
    return fail(err, kNumerical, "internal", e.what());
  }
  return kOk;
}

}  // namespace fluidrecon::cli
