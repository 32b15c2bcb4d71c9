#pragma once

// Training loop for the two transport agents. Each agent owns a policy
// network, a value network and an intrinsic curiosity module; rollouts are
// sliced per agent from the shared episode timeline and every agent updates
// on its own transitions only.

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rmc/a2c.hpp"
#include "rmc/cell.hpp"
#include "rmc/config.hpp"
#include "rmc/curriculum.hpp"
#include "rmc/gradient_monitor.hpp"
#include "rmc/grmc.hpp"
#include "rmc/icm.hpp"
#include "rmc/manifest.hpp"
#include "rmc/nn.hpp"
#include "rmc/srmc.hpp"

namespace rmc {

inline Layout layout_for(EnvKind env) { return env == EnvKind::Srmc ? srmc_layout() : grmc_layout(); }

inline Cell make_cell(EnvKind env, const CellConfig& cfg) { return Cell(layout_for(env), cfg); }

/// Verifies that the ICM built for `env` differs from the one built for every
/// other environment only in its environment-facing widths (observation size
/// into the encoder, action count into the forward head and out of the
/// inverse head). Returns an empty string on success, a description otherwise.
inline std::string icm_transfer_violation(const IcmConfig& cfg, EnvKind env) {
  const Layout here = layout_for(env);
  const auto mine = IcmArchitecture::make(cfg, static_cast<int>(here.observation_size()), here.num_actions());
  for (EnvKind other : {EnvKind::Srmc, EnvKind::Grmc}) {
    const Layout there = layout_for(other);
    const auto theirs = IcmArchitecture::make(cfg, static_cast<int>(there.observation_size()), there.num_actions());
    auto same_except = [](std::vector<LayerShape> a, std::vector<LayerShape> b, bool in_width, bool out_width,
                          std::size_t forward_extra) {
      if (a.size() != b.size()) return false;
      if (in_width) a.front().in = b.front().in;
      if (forward_extra) a.front().in = b.front().in;
      if (out_width) a.back().out = b.back().out;
      return a == b;
    };
    if (!same_except(mine.encoder, theirs.encoder, true, false, 0))
      return std::string("encoder differs from ") + env_name(other) + " beyond its input width";
    if (!same_except(mine.inverse, theirs.inverse, false, true, 0))
      return std::string("inverse head differs from ") + env_name(other) + " beyond its action width";
    if (!same_except(mine.forward, theirs.forward, false, false, 1))
      return std::string("forward head differs from ") + env_name(other) + " beyond its action width";
    if (mine.encoder.back().out != cfg.feature_dim || theirs.encoder.back().out != cfg.feature_dim)
      return "feature dimension is not the configured one";
  }
  return {};
}

/// Networks and per-network gradient monitors of one robot.
struct Agent {
  enum Net : std::size_t { kPolicy, kValue, kEncoder, kInverse, kForward, kNumNets };

  Mlp policy;
  Mlp value;
  Icm icm;
  std::array<GradientMonitor, kNumNets> monitors;
  long updates = 0;

  Agent() = default;

  Agent(int obs_dim, int num_actions, const RunConfig& cfg, std::mt19937_64& rng) {
    std::vector<int> hidden(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden);
    policy = Mlp(mlp_shape(obs_dim, hidden, num_actions, Activation::Tanh, Activation::Identity));
    value = Mlp(mlp_shape(obs_dim, hidden, 1, Activation::Tanh, Activation::Identity));
    policy.init(rng);
    value.init(rng);
    icm = Icm(cfg.icm, obs_dim, num_actions, rng);
    reset_monitors(cfg.gm);
  }

  void reset_monitors(const GmConfig& gm) {
    for (std::size_t i = 0; i < kNumNets; ++i) monitors[i] = GradientMonitor(net(i).num_params(), gm.decay);
  }

  Mlp& net(std::size_t i) {
    switch (i) {
      case kPolicy: return policy;
      case kValue: return value;
      case kEncoder: return icm.encoder();
      case kInverse: return icm.inverse_head();
      default: return icm.forward_head();
    }
  }

  void zero_grad() {
    for (std::size_t i = 0; i < kNumNets; ++i) net(i).zero_grad();
  }

  /// Mean masked fraction across the monitored networks.
  double masked_fraction() const {
    double s = 0;
    for (const auto& m : monitors) s += m.masked_fraction();
    return s / static_cast<double>(kNumNets);
  }
};

struct CombinedLoss {
  A2cLoss a2c;
  double inverse = 0;
  double forward = 0;
  double total = 0;
};

/// Accumulates the gradient of
///   lambda * (A2C loss) + (1 - beta) * L_I + beta * L_F
/// over one rollout into the agent's networks. With `icm_on` false only the
/// A2C loss is used, unscaled.
inline CombinedLoss accumulate_combined_gradients(Agent& agent, const Trajectory& traj, const A2cConfig& a2c,
                                                  const IcmConfig& icm, bool icm_on) {
  CombinedLoss out;
  const double lambda = icm_on ? icm.lambda : 1.0;
  const auto adv = compute_returns_advantages(traj, agent.value, a2c);
  out.a2c = a2c_loss(agent.policy, agent.value, traj, adv, a2c, lambda);
  if (icm_on) {
    for (const auto& tr : traj) {
      if (icm.beta < 1) out.inverse += agent.icm.inverse_loss(tr.obs, tr.next_obs, tr.action, 1.0 - icm.beta);
      if (icm.beta > 0) out.forward += agent.icm.forward_loss(tr.obs, tr.action, tr.next_obs, icm.beta);
    }
  }
  out.total = lambda * out.a2c.total + (1.0 - icm.beta) * out.inverse + icm.beta * out.forward;
  if (!std::isfinite(out.total)) throw NonFiniteError("combined loss is not finite");
  return out;
}

/// One optimizer step on every network of the agent. When gradient
/// monitoring is on, importances are updated from the raw gradients, the
/// masks are refreshed every `refresh_every` updates with `keep`, and masked
/// entries are zeroed and frozen in the optimizer.
inline void apply_update(Agent& agent, const OptimConfig& optim, const GmConfig& gm, bool gm_on, double keep,
                         bool icm_on) {
  ++agent.updates;
  const bool refresh = gm_on && agent.updates % gm.refresh_every == 0;
  for (std::size_t i = 0; i < Agent::kNumNets; ++i) {
    if (!icm_on && i >= Agent::kEncoder) break;
    Mlp& net = agent.net(i);
    if (gm_on) {
      auto& mon = agent.monitors[i];
      mon.observe(net.grads());
      if (refresh) mon.refresh_mask(keep);
      mon.apply(net.grads());
      net.adam_step(optim, mon.mask());
    } else {
      net.adam_step(optim);
    }
  }
}

struct MetricsRow {
  long episode = 0;
  std::size_t stage = 0;
  Counts targets{};
  Counts delivered{};
  int steps = 0;
  double sum_r_ext = 0;
  double sum_r_int = 0;
  double sum_combined = 0;
  double loss_inverse = 0;
  double loss_forward = 0;
  double loss_policy = 0;
  double loss_value = 0;
  double masked_fraction = 0;
  double wall_time = 0;

  bool success() const { return delivered == targets; }

  static constexpr const char* kHeader =
      "episode,stage,target_wp1,target_wp2,delivered_wp1,delivered_wp2,steps,sum_r_ext,sum_r_int,sum_combined,"
      "loss_inverse,loss_forward,loss_policy,loss_value,masked_fraction,wall_time";

  std::string to_csv() const {
    std::ostringstream os;
    os << episode << ',' << stage << ',' << targets[0] << ',' << targets[1] << ',' << delivered[0] << ','
       << delivered[1] << ',' << steps << ',' << detail::fmt_double(sum_r_ext) << ',' << detail::fmt_double(sum_r_int)
       << ',' << detail::fmt_double(sum_combined) << ',' << detail::fmt_double(loss_inverse) << ','
       << detail::fmt_double(loss_forward) << ',' << detail::fmt_double(loss_policy) << ','
       << detail::fmt_double(loss_value) << ',' << detail::fmt_double(masked_fraction) << ','
       << detail::fmt_double(wall_time);
    return os.str();
  }
};

/// Writes the per-agent checkpoint documents `agent0.ckpt`, `agent1.ckpt`.
inline void write_agent_checkpoint(std::ostream& os, const Agent& agent, std::size_t index, EnvKind env) {
  const auto& c = agent.icm.config();
  os << "rmc-agent-checkpoint 1\n";
  os << "agent " << index << '\n';
  os << "env " << env_name(env) << '\n';
  os << "obs_dim " << agent.policy.input_size() << '\n';
  os << "num_actions " << agent.policy.output_size() << '\n';
  os << "updates " << agent.updates << '\n';
  os << "icm " << detail::fmt_double(c.eta) << ' ' << detail::fmt_double(c.beta) << ' ' << detail::fmt_double(c.lambda)
     << ' ' << c.feature_dim << ' ' << c.hidden << '\n';
  agent.policy.write(os, "policy");
  agent.value.write(os, "value");
  agent.icm.encoder().write(os, "icm_encoder");
  agent.icm.inverse_head().write(os, "icm_inverse");
  agent.icm.forward_head().write(os, "icm_forward");
  os << "end\n";
}

struct LoadedAgent {
  Agent agent;
  std::string env;
  int obs_dim = 0;
  int num_actions = 0;
};

inline LoadedAgent read_agent_checkpoint(std::istream& is) {
  std::string tag, magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "rmc-agent-checkpoint" || version != 1)
    throw std::runtime_error("checkpoint: not an agent checkpoint");
  LoadedAgent out;
  std::size_t index = 0;
  IcmConfig c;
  auto expect = [&](const char* want) {
    if (!(is >> tag) || tag != want) throw std::runtime_error(std::string("checkpoint: expected '") + want + "'");
  };
  expect("agent");
  is >> index;
  expect("env");
  is >> out.env;
  expect("obs_dim");
  is >> out.obs_dim;
  expect("num_actions");
  is >> out.num_actions;
  expect("updates");
  is >> out.agent.updates;
  expect("icm");
  std::string eta, beta, lambda;
  is >> eta >> beta >> lambda >> c.feature_dim >> c.hidden;
  c.eta = std::strtod(eta.c_str(), nullptr);
  c.beta = std::strtod(beta.c_str(), nullptr);
  c.lambda = std::strtod(lambda.c_str(), nullptr);
  if (!is) throw std::runtime_error("checkpoint: truncated header");
  out.agent.policy = Mlp::read(is, "policy");
  out.agent.value = Mlp::read(is, "value");
  Mlp enc = Mlp::read(is, "icm_encoder");
  Mlp inv = Mlp::read(is, "icm_inverse");
  Mlp fwd = Mlp::read(is, "icm_forward");
  out.agent.icm = Icm(c, std::move(enc), std::move(inv), std::move(fwd));
  expect("end");
  if (out.agent.policy.input_size() != out.obs_dim || out.agent.policy.output_size() != out.num_actions)
    throw std::runtime_error("checkpoint: policy shape disagrees with header");
  return out;
}

inline void save_checkpoint(const std::filesystem::path& dir, const std::array<Agent, 2>& agents, EnvKind env) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto path = dir / ("agent" + std::to_string(i) + ".ckpt");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    write_agent_checkpoint(os, agents[i], i, env);
    if (!os) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
  }
}

inline std::array<LoadedAgent, 2> load_checkpoint(const std::filesystem::path& dir) {
  std::array<LoadedAgent, 2> out;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto path = dir / ("agent" + std::to_string(i) + ".ckpt");
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read checkpoint '" + path.string() + "'");
    out[i] = read_agent_checkpoint(is);
  }
  return out;
}

/// Human-readable dump of a rollout, written when a loss turns non-finite.
inline std::string dump_rollout(const Trajectory& traj) {
  std::ostringstream os;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& tr = traj[k];
    os << k << " action=" << tr.action << " r_ext=" << tr.r_ext << " r_int=" << tr.r_int << " done=" << tr.done
       << " truncated=" << tr.truncated << " invalid=" << tr.invalid << " obs=";
    for (double x : tr.obs) os << x << ' ';
    os << '\n';
  }
  return os.str();
}

class Trainer {
 public:
  explicit Trainer(RunConfig cfg)
      : cfg_(std::move(cfg)), curriculum_((cfg_.validate(), cfg_.curriculum_plan())), rng_(cfg_.seed) {
    if (auto why = icm_transfer_violation(cfg_.icm, cfg_.env); !why.empty())
      throw std::logic_error("icm transfer check failed: " + why);
    const Layout layout = layout_for(cfg_.env);
    obs_dim_ = static_cast<int>(layout.observation_size());
    num_actions_ = layout.num_actions();
    for (auto& a : agents_) a = Agent(obs_dim_, num_actions_, cfg_, rng_);
    start_ = std::chrono::steady_clock::now();
  }

  const RunConfig& config() const { return cfg_; }
  const Curriculum& curriculum() const { return curriculum_; }
  std::array<Agent, 2>& agents() { return agents_; }
  const std::array<Agent, 2>& agents() const { return agents_; }
  long episodes_done() const { return episode_; }
  long total_steps() const { return total_steps_; }

  /// Keep fraction of the gradient monitors at the current training progress.
  double current_keep_fraction() const {
    return keep_fraction(static_cast<double>(episode_), cfg_.gm.ramp_fraction * static_cast<double>(cfg_.episodes),
                         cfg_.gm.min_keep);
  }

  /// Plays one episode at the current curriculum targets while learning, then
  /// records the outcome with the curriculum.
  MetricsRow run_episode() {
    MetricsRow row;
    row.episode = episode_;
    row.stage = curriculum_.stage();
    row.targets = curriculum_.current_targets();
    const Cell cell = make_cell(cfg_.env, cfg_.cell_config(row.targets));

    CellState state = cell.reset();
    std::array<Trajectory, 2> rollout;
    std::vector<double> obs = cell.observe(state);
    int n_updates = 0;
    long n_transitions = 0;
    const double keep = current_keep_fraction();

    while (true) {
      const auto legal = cell.legal_mask(state);
      JointAction actions{};
      for (std::size_t i = 0; i < 2; ++i) actions[i] = select_action(agents_[i].policy, obs, legal, rng_).action;
      StepResult r = cell.step(state, actions, false);
      std::vector<double> next_obs = cell.observe(r.next);
      for (std::size_t i = 0; i < 2; ++i) {
        Transition& tr = r.transitions[i];
        tr.obs = obs;
        tr.next_obs = next_obs;
        tr.legal = legal;
        if (cfg_.icm_on) {
          tr.r_int = agents_[i].icm.intrinsic_reward(tr.obs, tr.action, tr.next_obs);
          if (cfg_.r_int_normalize) tr.r_int = r_int_scale_[i].normalize(tr.r_int);
        }
        row.sum_r_ext += tr.r_ext;
        row.sum_r_int += tr.r_int;
        rollout[i].push_back(std::move(tr));
      }
      state = r.next;
      obs = std::move(next_obs);
      ++row.steps;

      if (static_cast<int>(rollout[0].size()) >= cfg_.a2c.n_steps || state.terminated) {
        for (std::size_t i = 0; i < 2; ++i) {
          CombinedLoss loss;
          try {
            loss = accumulate_combined_gradients(agents_[i], rollout[i], cfg_.a2c, cfg_.icm, cfg_.icm_on);
            apply_update(agents_[i], cfg_.optim, cfg_.gm, cfg_.gm_on, keep, cfg_.icm_on);
          } catch (const NonFiniteError& e) {
            report_failure(rollout[i], e.what());
            throw;
          }
          row.loss_policy += loss.a2c.policy;
          row.loss_value += loss.a2c.value;
          row.loss_inverse += loss.inverse;
          row.loss_forward += loss.forward;
          n_transitions += static_cast<long>(rollout[i].size());
          rollout[i].clear();
          ++n_updates;
        }
      }
      if (state.terminated) break;
    }

    if (n_transitions > 0) {
      const double inv = 1.0 / static_cast<double>(n_transitions);
      row.loss_policy *= inv;
      row.loss_value *= inv;
      row.loss_inverse *= inv;
      row.loss_forward *= inv;
    }
    row.sum_combined = row.sum_r_ext + row.sum_r_int;
    row.delivered = state.delivered;
    row.masked_fraction = cfg_.gm_on ? 0.5 * (agents_[0].masked_fraction() + agents_[1].masked_fraction()) : 0.0;
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    total_steps_ += row.steps;
    ++episode_;
    curriculum_.record_episode(row.success());
    return row;
  }

  /// Runs the whole episode budget. Writes `metrics.csv` (flushed per episode),
  /// `manifest.txt`, periodic checkpoints and the final checkpoint under
  /// `out_dir` when set. `on_row` may return false to stop early.
  void train(const std::function<bool(const MetricsRow&)>& on_row = {}) {
    namespace fs = std::filesystem;
    std::ofstream metrics;
    const bool write = !cfg_.out_dir.empty();
    if (write) {
      fs::create_directories(cfg_.out_dir);
      write_manifest(cfg_, fs::path(cfg_.out_dir) / "manifest.txt");
      metrics.open(fs::path(cfg_.out_dir) / "metrics.csv");
      if (!metrics) throw std::runtime_error("cannot write metrics in '" + cfg_.out_dir + "'");
      metrics << MetricsRow::kHeader << '\n' << std::flush;
    }
    while (episode_ < cfg_.episodes) {
      const MetricsRow row = run_episode();
      if (write) {
        metrics << row.to_csv() << '\n' << std::flush;
        if (!metrics) throw std::runtime_error("failed writing metrics in '" + cfg_.out_dir + "'");
        if (cfg_.checkpoint_every > 0 && episode_ % cfg_.checkpoint_every == 0)
          save_checkpoint(fs::path(cfg_.out_dir) / ("checkpoint_" + std::to_string(episode_)), agents_, cfg_.env);
      }
      if (on_row && !on_row(row)) break;
    }
    if (write) save_checkpoint(fs::path(cfg_.out_dir) / "final", agents_, cfg_.env);
  }

 private:
  void report_failure(const Trajectory& traj, const std::string& why) const {
    if (cfg_.out_dir.empty()) return;
    std::filesystem::create_directories(cfg_.out_dir);
    std::ofstream os(std::filesystem::path(cfg_.out_dir) / "failed_rollout.txt");
    os << "# " << why << " at episode " << episode_ << '\n' << dump_rollout(traj);
  }

  RunConfig cfg_;
  Curriculum curriculum_;
  std::mt19937_64 rng_;
  std::array<RunningStd, 2> r_int_scale_;
  int obs_dim_ = 0;
  int num_actions_ = 0;
  std::array<Agent, 2> agents_;
  long episode_ = 0;
  long total_steps_ = 0;
  std::chrono::steady_clock::time_point start_;
};

struct EvalReport {
  double success_rate = 0;
  /// Mean steps of successful episodes; 0 when none succeeded.
  double mean_makespan = 0;
  std::vector<int> makespans;
  /// Executed moves of the first episode, one "t agent move" entry per move.
  std::vector<std::string> trace;
};

/// Greedy rollouts of a pair of agents without learning.
inline EvalReport evaluate_agents(const std::array<const Agent*, 2>& agents, EnvKind env, const CellConfig& cell_cfg,
                                  int episodes) {
  const Cell cell = make_cell(env, cell_cfg);
  for (const Agent* a : agents)
    if (a->policy.input_size() != static_cast<int>(cell.observation_size()) ||
        a->policy.output_size() != cell.num_actions())
      throw std::invalid_argument("evaluate: checkpoint observation/action size does not match the environment");
  EvalReport rep;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    CellState s = cell.reset();
    while (!s.terminated) {
      const auto obs = cell.observe(s);
      const auto legal = cell.legal_mask(s);
      JointAction act{greedy_action(agents[0]->policy, obs, legal), greedy_action(agents[1]->policy, obs, legal)};
      StepResult r = cell.step(s, act, false);
      if (e == 0)
        for (std::size_t i = 0; i < 2; ++i)
          if (r.executed[i])
            rep.trace.push_back(std::to_string(s.t) + " agent" + std::to_string(i) + " " +
                                cell.layout().action_name(act[i]));
      s = r.next;
    }
    if (s.targets_met()) {
      ++successes;
      rep.makespans.push_back(s.t);
    }
  }
  rep.success_rate = episodes > 0 ? double(successes) / episodes : 0.0;
  if (!rep.makespans.empty()) {
    double sum = 0;
    for (int m : rep.makespans) sum += m;
    rep.mean_makespan = sum / static_cast<double>(rep.makespans.size());
  }
  return rep;
}

inline EvalReport evaluate_checkpoint(const std::filesystem::path& dir, EnvKind env, const CellConfig& cell_cfg,
                                      int episodes) {
  const auto loaded = load_checkpoint(dir);
  return evaluate_agents({&loaded[0].agent, &loaded[1].agent}, env, cell_cfg, episodes);
}

}  // namespace rmc
