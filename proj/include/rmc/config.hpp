#pragma once

// Experiment configuration. Every field has a `key = value` spelling used by
// config files, by `--set key=value` on the command line and by the run
// manifest, so a manifest can be fed back in as a config file.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmc/a2c.hpp"
#include "rmc/cell.hpp"
#include "rmc/curriculum.hpp"
#include "rmc/gradient_monitor.hpp"
#include "rmc/icm.hpp"
#include "rmc/nn.hpp"

namespace rmc {

enum class EnvKind { Srmc, Grmc };

inline const char* env_name(EnvKind e) { return e == EnvKind::Srmc ? "srmc" : "grmc"; }

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  EnvKind env = EnvKind::Srmc;
  std::uint64_t seed = 0;
  long episodes = 100000;
  /// Terminal target; with curriculum on it must equal the last stage.
  Counts targets{20, 20};
  int process_time = 1;
  int max_steps = 0;

  bool icm_on = true;
  bool gm_on = false;
  bool cl_on = false;
  /// Divide the intrinsic reward by its running standard deviation.
  bool r_int_normalize = false;

  A2cConfig a2c;
  IcmConfig icm;
  OptimConfig optim;
  GmConfig gm;

  std::vector<int> cl_stages;  // empty: environment default
  double cl_threshold = 0.95;
  int cl_window = 100;

  int hidden = 64;
  int hidden_layers = 2;

  std::string out_dir;
  long checkpoint_every = 0;
  int log_every = 100;

  /// Environment defaults for targets and budget.
  static RunConfig defaults_for(EnvKind env) {
    RunConfig c;
    c.env = env;
    if (env == EnvKind::Grmc) {
      c.targets = {7, 7};
      c.episodes = 200000;
    }
    return c;
  }

  CellConfig cell_config(Counts t) const { return {t, process_time, max_steps, seed}; }

  CurriculumPlan curriculum_plan() const {
    if (!cl_on) return {{targets}, cl_threshold, cl_window};
    std::vector<int> stages = cl_stages;
    if (stages.empty()) {
      if (env == EnvKind::Srmc)
        stages = {5, 10, 15, 20};
      else
        for (int n = 1; n <= 7; ++n) stages.push_back(n);
    }
    return CurriculumPlan::symmetric(stages, cl_threshold, cl_window);
  }

  void validate() const {
    if (episodes < 0) throw ConfigError("episodes must be >= 0");
    if (targets[0] < 0 || targets[1] < 0) throw ConfigError("targets must be >= 0");
    if (process_time < 1) throw ConfigError("process_time must be >= 1");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (hidden < 1 || hidden_layers < 1) throw ConfigError("hidden sizes must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (log_every < 0) throw ConfigError("log_every must be >= 0");
    try {
      a2c.validate();
      icm.validate();
      optim.validate();
      gm.validate();
      const auto plan = curriculum_plan();
      plan.validate();
      if (plan.stages.back() != targets)
        throw ConfigError("curriculum final stage (" + std::to_string(plan.stages.back()[0]) + "," +
                          std::to_string(plan.stages.back()[1]) + ") differs from targets (" +
                          std::to_string(targets[0]) + "," + std::to_string(targets[1]) + ")");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects on/off, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
  return out;
}

inline std::string join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

inline std::string fmt_double(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, Field>>& fields() {
  using C = RunConfig;
  using S = const std::string&;
  auto dbl = [](double C::*outer) {
    return Field{[outer](C& c, S k, S v) { c.*outer = parse_double(k, v); },
                 [outer](const C& c) { return fmt_double(c.*outer); }};
  };
  static const std::vector<std::pair<std::string, Field>> table = {
      {"env",
       {[](C& c, S k, S v) {
          if (v == "srmc") c.env = EnvKind::Srmc;
          else if (v == "grmc") c.env = EnvKind::Grmc;
          else throw ConfigError("'" + k + "' expects srmc or grmc, got '" + v + "'");
        },
        [](const C& c) { return std::string(env_name(c.env)); }}},
      {"seed", {[](C& c, S k, S v) { c.seed = static_cast<std::uint64_t>(parse_int(k, v)); },
                [](const C& c) { return std::to_string(c.seed); }}},
      {"episodes", {[](C& c, S k, S v) { c.episodes = static_cast<long>(parse_int(k, v)); },
                    [](const C& c) { return std::to_string(c.episodes); }}},
      {"targets",
       {[](C& c, S k, S v) {
          auto xs = parse_int_list(k, v);
          if (xs.size() != 2) throw ConfigError("'" + k + "' expects two counts 'a,b'");
          c.targets = {xs[0], xs[1]};
        },
        [](const C& c) { return join({c.targets[0], c.targets[1]}); }}},
      {"process_time", {[](C& c, S k, S v) { c.process_time = static_cast<int>(parse_int(k, v)); },
                        [](const C& c) { return std::to_string(c.process_time); }}},
      {"max_steps", {[](C& c, S k, S v) { c.max_steps = static_cast<int>(parse_int(k, v)); },
                     [](const C& c) { return std::to_string(c.max_steps); }}},
      {"icm", {[](C& c, S k, S v) { c.icm_on = parse_bool(k, v); }, [](const C& c) { return std::string(c.icm_on ? "on" : "off"); }}},
      {"gm", {[](C& c, S k, S v) { c.gm_on = parse_bool(k, v); }, [](const C& c) { return std::string(c.gm_on ? "on" : "off"); }}},
      {"cl", {[](C& c, S k, S v) { c.cl_on = parse_bool(k, v); }, [](const C& c) { return std::string(c.cl_on ? "on" : "off"); }}},
      {"r_int_normalize", {[](C& c, S k, S v) { c.r_int_normalize = parse_bool(k, v); },
                           [](const C& c) { return std::string(c.r_int_normalize ? "on" : "off"); }}},
      {"gamma", {[](C& c, S k, S v) { c.a2c.gamma = parse_double(k, v); }, [](const C& c) { return fmt_double(c.a2c.gamma); }}},
      {"n_steps", {[](C& c, S k, S v) { c.a2c.n_steps = static_cast<int>(parse_int(k, v)); },
                   [](const C& c) { return std::to_string(c.a2c.n_steps); }}},
      {"value_weight", {[](C& c, S k, S v) { c.a2c.value_weight = parse_double(k, v); },
                        [](const C& c) { return fmt_double(c.a2c.value_weight); }}},
      {"entropy_weight", {[](C& c, S k, S v) { c.a2c.entropy_weight = parse_double(k, v); },
                          [](const C& c) { return fmt_double(c.a2c.entropy_weight); }}},
      {"eta", {[](C& c, S k, S v) { c.icm.eta = parse_double(k, v); }, [](const C& c) { return fmt_double(c.icm.eta); }}},
      {"beta", {[](C& c, S k, S v) { c.icm.beta = parse_double(k, v); }, [](const C& c) { return fmt_double(c.icm.beta); }}},
      {"lambda", {[](C& c, S k, S v) { c.icm.lambda = parse_double(k, v); }, [](const C& c) { return fmt_double(c.icm.lambda); }}},
      {"feature_dim", {[](C& c, S k, S v) { c.icm.feature_dim = static_cast<int>(parse_int(k, v)); },
                       [](const C& c) { return std::to_string(c.icm.feature_dim); }}},
      {"icm_hidden", {[](C& c, S k, S v) { c.icm.hidden = static_cast<int>(parse_int(k, v)); },
                      [](const C& c) { return std::to_string(c.icm.hidden); }}},
      {"learning_rate", {[](C& c, S k, S v) { c.optim.learning_rate = parse_double(k, v); },
                         [](const C& c) { return fmt_double(c.optim.learning_rate); }}},
      {"adam_beta1", {[](C& c, S k, S v) { c.optim.beta1 = parse_double(k, v); }, [](const C& c) { return fmt_double(c.optim.beta1); }}},
      {"adam_beta2", {[](C& c, S k, S v) { c.optim.beta2 = parse_double(k, v); }, [](const C& c) { return fmt_double(c.optim.beta2); }}},
      {"adam_epsilon", {[](C& c, S k, S v) { c.optim.epsilon = parse_double(k, v); },
                        [](const C& c) { return fmt_double(c.optim.epsilon); }}},
      {"max_grad_norm", {[](C& c, S k, S v) { c.optim.max_grad_norm = parse_double(k, v); },
                         [](const C& c) { return fmt_double(c.optim.max_grad_norm); }}},
      {"gm_decay", {[](C& c, S k, S v) { c.gm.decay = parse_double(k, v); }, [](const C& c) { return fmt_double(c.gm.decay); }}},
      {"gm_min_keep", {[](C& c, S k, S v) { c.gm.min_keep = parse_double(k, v); },
                       [](const C& c) { return fmt_double(c.gm.min_keep); }}},
      {"gm_refresh_every", {[](C& c, S k, S v) { c.gm.refresh_every = static_cast<int>(parse_int(k, v)); },
                            [](const C& c) { return std::to_string(c.gm.refresh_every); }}},
      {"gm_ramp_fraction", {[](C& c, S k, S v) { c.gm.ramp_fraction = parse_double(k, v); },
                            [](const C& c) { return fmt_double(c.gm.ramp_fraction); }}},
      {"cl_stages", {[](C& c, S k, S v) { c.cl_stages = parse_int_list(k, v); }, [](const C& c) { return join(c.cl_stages); }}},
      {"cl_threshold", dbl(&C::cl_threshold)},
      {"cl_window", {[](C& c, S k, S v) { c.cl_window = static_cast<int>(parse_int(k, v)); },
                     [](const C& c) { return std::to_string(c.cl_window); }}},
      {"hidden", {[](C& c, S k, S v) { c.hidden = static_cast<int>(parse_int(k, v)); },
                  [](const C& c) { return std::to_string(c.hidden); }}},
      {"hidden_layers", {[](C& c, S k, S v) { c.hidden_layers = static_cast<int>(parse_int(k, v)); },
                         [](const C& c) { return std::to_string(c.hidden_layers); }}},
      {"out", {[](C& c, S, S v) { c.out_dir = v; }, [](const C& c) { return c.out_dir; }}},
      {"checkpoint_every", {[](C& c, S k, S v) { c.checkpoint_every = static_cast<long>(parse_int(k, v)); },
                            [](const C& c) { return std::to_string(c.checkpoint_every); }}},
      {"log_every", {[](C& c, S k, S v) { c.log_every = static_cast<int>(parse_int(k, v)); },
                     [](const C& c) { return std::to_string(c.log_every); }}},
  };
  return table;
}

}  // namespace detail

/// Sets one key; unknown keys are a ConfigError.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : detail::fields()) {
    if (name == key) {
      field.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
inline ConfigEntries parse_config_text(const std::string& text, const std::string& origin = "config") {
  ConfigEntries entries;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    entries.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return entries;
}

inline ConfigEntries read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Builds a config from entries applied in order (later wins). The last
/// `env` entry picks the environment defaults everything else starts from.
inline RunConfig build_config(const ConfigEntries& entries) {
  RunConfig cfg;
  for (const auto& [k, v] : entries)
    if (k == "env") set_config_value(cfg, k, v);
  cfg = RunConfig::defaults_for(cfg.env);
  bool explicit_targets = false;
  for (const auto& [k, v] : entries) {
    if (k == "env") continue;
    set_config_value(cfg, k, v);
    explicit_targets = explicit_targets || k == "targets";
  }
  // A curriculum without explicit targets ends at its own final stage.
  if (cfg.cl_on && !explicit_targets) {
    const auto plan = cfg.curriculum_plan();
    if (!plan.stages.empty()) cfg.targets = plan.stages.back();
  }
  return cfg;
}

/// Canonical `key = value` echo of every field.
inline std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : detail::fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace rmc
