// Command-line front end: train, evaluate, exhaustive-search oracle, plot
// data extraction and a graph listing of the cell layouts.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rmc/config.hpp"
#include "rmc/grmc.hpp"
#include "rmc/oracle.hpp"
#include "rmc/plotdata.hpp"
#include "rmc/trainer.hpp"

namespace fs = std::filesystem;
using namespace rmc;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

EnvKind parse_env(const std::string& s) {
  if (s == "srmc") return EnvKind::Srmc;
  if (s == "grmc") return EnvKind::Grmc;
  throw UsageError("--env expects srmc or grmc, got '" + s + "'");
}

Counts parse_targets(const std::string& s) {
  int a = 0, b = 0;
  char comma = 0, extra = 0;
  std::istringstream is(s);
  if (!(is >> a >> comma >> b) || comma != ',' || (is >> extra) || a < 0 || b < 0)
    throw UsageError("--targets expects two non-negative counts 'a,b', got '" + s + "'");
  return {a, b};
}

/// Makes sure `dir` exists and accepts files before any training starts.
void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".write_probe";
  std::ofstream os(probe);
  if (ec || !os) throw UsageError("output directory '" + dir.string() + "' is not writable");
  os.close();
  fs::remove(probe, ec);
}

std::string summary_line(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "episode %ld stage %zu targets %d,%d delivered %d,%d steps %d r_ext %.0f r_int %.4f loss_inv %.4f "
                "loss_fwd %.4f masked %.3f",
                r.episode, r.stage, r.targets[0], r.targets[1], r.delivered[0], r.delivered[1], r.steps, r.sum_r_ext,
                r.sum_r_int, r.loss_inverse, r.loss_forward, r.masked_fraction);
  return buf;
}

struct TrainArgs {
  std::string config_file;
  std::string env, icm, gm, cl, out, targets;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<long> episodes;
  std::optional<int> log_every;
  std::vector<std::string> sets;
};

RunConfig resolve_train_config(const TrainArgs& a) {
  ConfigEntries entries;
  if (!a.config_file.empty()) entries = read_config_file(a.config_file);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    entries.emplace_back(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) entries.emplace_back(key, v);
  };
  put("env", a.env);
  put("icm", a.icm);
  put("gm", a.gm);
  put("cl", a.cl);
  put("out", a.out);
  put("targets", a.targets);
  if (a.seed) put("seed", std::to_string(*a.seed));
  if (a.episodes) put("episodes", std::to_string(*a.episodes));
  if (a.log_every) put("log_every", std::to_string(*a.log_every));
  RunConfig cfg = build_config(entries);
  cfg.validate();
  return cfg;
}

int run_training(const RunConfig& cfg, const std::string& prefix, std::mutex& io) {
  Trainer trainer(cfg);
  trainer.train([&](const MetricsRow& row) {
    if (cfg.log_every > 0 && (row.episode + 1) % cfg.log_every == 0) {
      std::lock_guard<std::mutex> lock(io);
      std::cout << prefix << summary_line(row) << '\n' << std::flush;
    }
    return true;
  });
  std::lock_guard<std::mutex> lock(io);
  std::cout << prefix << "finished " << trainer.episodes_done() << " episodes, " << trainer.total_steps()
            << " steps, final stage " << trainer.curriculum().stage() << '\n';
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  if (a.seed && !a.seeds.empty()) throw UsageError("--seed and --seeds are mutually exclusive");
  const RunConfig base = resolve_train_config(a);
  std::mutex io;
  if (a.seeds.empty()) {
    if (!base.out_dir.empty()) ensure_writable(base.out_dir);
    return run_training(base, "", io);
  }
  std::vector<RunConfig> runs;
  for (auto s : a.seeds) {
    RunConfig c = base;
    c.seed = s;
    if (!base.out_dir.empty()) {
      c.out_dir = (fs::path(base.out_dir) / ("seed_" + std::to_string(s))).string();
      ensure_writable(c.out_dir);
    }
    runs.push_back(c);
  }
  std::vector<int> status(runs.size(), kOk);
  std::vector<std::string> errors(runs.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < runs.size(); ++i)
    workers.emplace_back([&, i] {
      try {
        status[i] = run_training(runs[i], "[seed " + std::to_string(runs[i].seed) + "] ", io);
      } catch (const std::exception& e) {
        status[i] = kRuntimeFailure;
        errors[i] = e.what();
      }
    });
  for (auto& w : workers) w.join();
  int rc = kOk;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (status[i] != kOk) {
      std::cerr << "error: seed " << runs[i].seed << ": " << errors[i] << '\n';
      rc = kRuntimeFailure;
    }
  return rc;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& env_s, const std::string& targets_s, int episodes,
                 bool trace) {
  const EnvKind env = parse_env(env_s);
  RunConfig cfg = RunConfig::defaults_for(env);
  if (!targets_s.empty()) cfg.targets = parse_targets(targets_s);
  if (!fs::is_directory(checkpoint)) throw UsageError("checkpoint directory '" + checkpoint + "' does not exist");
  const EvalReport rep = evaluate_checkpoint(checkpoint, env, cfg.cell_config(cfg.targets), episodes);
  std::cout << "episodes " << episodes << "\nsuccess_rate " << detail::fmt_double(rep.success_rate)
            << "\nmean_makespan " << detail::fmt_double(rep.mean_makespan) << '\n';
  if (trace)
    for (const auto& line : rep.trace) std::cout << "trace " << line << '\n';
  return kOk;
}

int cmd_oracle(const std::string& env_s, const std::string& targets_s) {
  const EnvKind env = parse_env(env_s);
  const Counts targets = parse_targets(targets_s);
  if (targets[0] + targets[1] > kOracleTargetBound)
    throw UsageError("oracle: targets a+b must be <= " + std::to_string(kOracleTargetBound) +
                     "; the joint state graph is searched exhaustively, so use a smaller instance");
  const Layout layout = layout_for(env);
  const auto r = optimal_makespan(layout, targets);
  if (!r) {
    std::cout << "unreachable\n";
    return kRuntimeFailure;
  }
  std::cout << "makespan " << r->makespan << "\nstates_explored " << r->states_explored << '\n';
  for (std::size_t t = 0; t < r->schedule.size(); ++t)
    std::cout << "step " << t << ' ' << layout.action_name(r->schedule[t][0]) << ' '
              << layout.action_name(r->schedule[t][1]) << '\n';
  return kOk;
}

int cmd_plotdata(const std::string& metrics, int window, const std::string& out) {
  if (window < 1) throw UsageError("--window must be >= 1");
  if (!fs::exists(metrics)) throw UsageError("metrics file '" + metrics + "' does not exist");
  MetricsSeries s;
  try {
    s = read_metrics_file(metrics);
  } catch (const MetricsFormatError& e) {
    throw UsageError(metrics + ": " + e.what());
  }
  const std::string parts = parts_output_csv(s, window);
  const std::string combined = combined_reward_csv(s, window);
  if (out.empty()) {
    std::cout << "# parts_output\n" << parts << "# combined_reward\n" << combined;
    return kOk;
  }
  ensure_writable(out);
  for (const auto& [name, text] : {std::pair{"parts_output.csv", &parts}, std::pair{"combined_reward.csv", &combined}}) {
    std::ofstream os(fs::path(out) / name);
    os << *text;
    if (!os) throw std::runtime_error("failed writing '" + (fs::path(out) / name).string() + "'");
  }
  std::cout << "wrote " << s.size() << " rows to " << out << '\n';
  return kOk;
}

int cmd_graph(const std::string& env_s) {
  std::cout << CellGraph(layout_for(parse_env(env_s))).adjacency_listing();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-robot manufacturing cell: training, evaluation and analysis"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a pair of agents");
  train->add_option("--config", ta.config_file, "key = value configuration file");
  train->add_option("--env", ta.env, "srmc or grmc");
  train->add_option("--icm", ta.icm, "on/off: curiosity-driven intrinsic reward");
  train->add_option("--gm", ta.gm, "on/off: gradient monitoring");
  train->add_option("--cl", ta.cl, "on/off: curriculum over work-piece targets");
  train->add_option("--seed", ta.seed, "random seed");
  train->add_option("--seeds", ta.seeds, "run several seeds in parallel (out/seed_N)")->delimiter(',');
  train->add_option("--episodes", ta.episodes, "episode budget");
  train->add_option("--out", ta.out, "output directory");
  train->add_option("--targets", ta.targets, "work-piece targets a,b");
  train->add_option("--log-every", ta.log_every, "print a summary every N episodes (0 = never)");
  train->add_option("--set", ta.sets, "override any config key: key=value");

  std::string ev_ckpt, ev_env = "srmc", ev_targets;
  int ev_episodes = 10;
  bool ev_trace = false;
  auto* evaluate = app.add_subcommand("evaluate", "Greedy rollouts of a saved checkpoint");
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
  evaluate->add_option("--env", ev_env, "srmc or grmc");
  evaluate->add_option("--targets", ev_targets, "work-piece targets a,b");
  evaluate->add_option("--episodes", ev_episodes, "number of rollouts")->check(CLI::NonNegativeNumber);
  evaluate->add_flag("--trace", ev_trace, "print the executed moves of the first rollout");

  std::string or_env = "srmc", or_targets;
  auto* oracle = app.add_subcommand("oracle", "Optimal makespan by exhaustive search");
  oracle->add_option("--env", or_env, "srmc or grmc");
  oracle->add_option("--targets", or_targets, "work-piece targets a,b")->required();

  std::string pd_metrics, pd_out;
  int pd_window = 100;
  auto* plot = app.add_subcommand("plotdata", "Smoothed figure series from a metrics file");
  plot->add_option("--metrics", pd_metrics, "metrics.csv written by train")->required();
  plot->add_option("--window", pd_window, "moving-average window");
  plot->add_option("--out", pd_out, "output directory (stdout when omitted)");

  std::string gr_env = "grmc";
  auto* graph = app.add_subcommand("graph", "Print the node/edge listing of a cell layout");
  graph->add_option("--env", gr_env, "srmc or grmc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*evaluate) return cmd_evaluate(ev_ckpt, ev_env, ev_targets, ev_episodes, ev_trace);
    if (*oracle) return cmd_oracle(or_env, or_targets);
    if (*plot) return cmd_plotdata(pd_metrics, pd_window, pd_out);
    if (*graph) return cmd_graph(gr_env);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
