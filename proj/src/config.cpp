#include "fluidrecon/errors.hpp"
#include "fluidrecon/trainer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fluidrecon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct Field {
  const char* key;
  std::function<void(TrainConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(const char* key, T TrainConfig::*member) {
  return {key, [member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_number(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field weight_field(const char* key, double LossWeights::*member) {
  return {key,
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.weights.*member = parse_number<double>(k, v);
          },
          [member](const TrainConfig& c) { return format_number(c.weights.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"train.epochs_per_phase",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         std::stringstream ss(v);
         std::string item;
         std::vector<int> values;
         while (std::getline(ss, item, ',')) values.push_back(parse_number<int>(k, item));
         if (values.size() != 3) throw ConfigError(k + ": expected three comma-separated integers");
         c.epochs_per_phase = {values[0], values[1], values[2]};
       },
       [](const TrainConfig& c) {
         return std::to_string(c.epochs_per_phase[0]) + "," + std::to_string(c.epochs_per_phase[1]) + "," +
                std::to_string(c.epochs_per_phase[2]);
       }},
      number_field("train.lr", &TrainConfig::lr),
      number_field("train.adam_beta1", &TrainConfig::adam_beta1),
      number_field("train.adam_beta2", &TrainConfig::adam_beta2),
      number_field("train.adam_eps", &TrainConfig::adam_eps),
      number_field("train.times_per_epoch", &TrainConfig::times_per_epoch),
      number_field("train.points_per_time", &TrainConfig::points_per_time),
      number_field("train.seed", &TrainConfig::seed),
      number_field("train.checkpoint_every", &TrainConfig::checkpoint_every),
      number_field("train.steps_per_epoch", &TrainConfig::steps_per_epoch),
      weight_field("weights.lambda1", &LossWeights::lambda1),
      weight_field("weights.lambda2", &LossWeights::lambda2),
      weight_field("weights.lambda3", &LossWeights::lambda3),
      number_field("network.f_layers", &TrainConfig::f_layers),
      number_field("network.f_hidden", &TrainConfig::f_hidden),
      number_field("network.v_layers", &TrainConfig::v_layers),
      number_field("network.v_hidden", &TrainConfig::v_hidden),
      number_field("network.omega0", &TrainConfig::omega0),
      {"loss.residual_norm",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         const std::string s = trim(v);
         if (s == "l1") {
           c.residual_norm = ResidualNorm::L1;
         } else if (s == "squared") {
           c.residual_norm = ResidualNorm::Squared;
         } else {
           throw ConfigError(k + ": expected 'l1' or 'squared', got '" + v + "'");
         }
       },
       [](const TrainConfig& c) { return std::string(c.residual_norm == ResidualNorm::L1 ? "l1" : "squared"); }},
      number_field("loss.uniform_fraction", &TrainConfig::uniform_fraction),
      number_field("loss.near_surface_sigma", &TrainConfig::near_surface_sigma),
      {"loss.warp_into_velocity",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.warp_into_velocity = parse_bool(k, v); },
       [](const TrainConfig& c) { return std::string(c.warp_into_velocity ? "true" : "false"); }},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  for (int e : epochs_per_phase) {
    if (e < 0) throw ConfigError("train.epochs_per_phase must be >= 0");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2 must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (times_per_epoch < 1) throw ConfigError("train.times_per_epoch must be >= 1");
  if (points_per_time < 1) throw ConfigError("train.points_per_time must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (steps_per_epoch < 1) throw ConfigError("train.steps_per_epoch must be >= 1");
  try {
    weights.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (f_layers < 2 || v_layers < 2) throw ConfigError("network layers must be >= 2");
  if (f_hidden < 1 || v_hidden < 1) throw ConfigError("network hidden width must be >= 1");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ConfigError("network.omega0 must be > 0");
  if (!(uniform_fraction >= 0.0 && uniform_fraction <= 1.0)) {
    throw ConfigError("loss.uniform_fraction must lie in [0, 1]");
  }
  if (!(near_surface_sigma >= 0.0) || !std::isfinite(near_surface_sigma)) {
    throw ConfigError("loss.near_surface_sigma must be >= 0");
  }
}

void set_config_value(TrainConfig& config, const std::string& dotted_key, const std::string& value) {
  for (const Field& f : fields()) {
    if (dotted_key == f.key) {
      f.set(config, dotted_key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + dotted_key + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.emplace_back(f.key);
  return keys;
}

TrainConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.message() + " at line " + std::to_string(e.line()));
  }
  TrainConfig config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError("key '" + section + "' outside of a section");
    }
    for (const auto& [key, node] : entries) set_config_value(config, section + "." + key, node.data());
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += key.substr(dot + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace fluidrecon
