#pragma once

// Advantage actor-critic: masked categorical policy, n-step bootstrapped
// returns, and the policy/value/entropy loss with gradients.

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "rmc/cell.hpp"
#include "rmc/nn.hpp"

namespace rmc {

struct A2cConfig {
  double gamma = 0.99;
  int n_steps = 16;
  double value_weight = 0.5;
  double entropy_weight = 0.01;

  void validate() const {
    if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("a2c: gamma must lie in [0,1]");
    if (n_steps < 1) throw std::invalid_argument("a2c: n_steps must be >= 1");
    if (value_weight < 0 || entropy_weight < 0) throw std::invalid_argument("a2c: loss weights must be >= 0");
  }
};

/// One agent's slice of a rollout.
using Trajectory = std::vector<Transition>;

struct AdvantageEstimate {
  std::vector<double> returns;
  std::vector<double> values;
  std::vector<double> advantages;
};

struct ActionSample {
  ActionId action = kNoop;
  double log_prob = 0.0;
};

inline std::size_t count_legal(std::span<const std::uint8_t> mask) {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

/// Samples from the policy restricted to legal actions. A mask with a single
/// legal entry short-circuits without evaluating the network.
template <class Rng>
ActionSample select_action(const Mlp& policy, std::span<const double> obs, std::span<const std::uint8_t> legal, Rng& rng) {
  const std::size_t n_legal = count_legal(legal);
  if (n_legal == 0) throw std::invalid_argument("select_action: no legal action");
  if (n_legal == 1) {
    for (std::size_t i = 0; i < legal.size(); ++i)
      if (legal[i]) return {static_cast<ActionId>(i), 0.0};
  }
  const auto logits = policy.evaluate(obs);
  const auto p = masked_softmax(logits, legal);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0;
  std::size_t chosen = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!legal[i]) continue;
    chosen = i;
    acc += p[i];
    if (r < acc) break;
  }
  return {static_cast<ActionId>(chosen), std::log(p[chosen])};
}

/// Argmax over legal actions, lowest index on ties.
inline ActionId greedy_action(const Mlp& policy, std::span<const double> obs, std::span<const std::uint8_t> legal) {
  if (count_legal(legal) == 0) throw std::invalid_argument("greedy_action: no legal action");
  const auto logits = policy.evaluate(obs);
  std::size_t best = legal.size();
  for (std::size_t i = 0; i < legal.size(); ++i)
    if (legal[i] && (best == legal.size() || logits[i] > logits[best])) best = i;
  return static_cast<ActionId>(best);
}

/// return_k = sum_j gamma^j r_{k+j} + gamma^(n-k) v(s_n) (bootstrap dropped
/// when the rollout ends in `done`), advantage_k = return_k - v(s_k), with
/// r = r_ext + r_int.
inline AdvantageEstimate compute_returns_advantages(const Trajectory& traj, const Mlp& value, const A2cConfig& cfg) {
  AdvantageEstimate out;
  const std::size_t n = traj.size();
  out.returns.resize(n);
  out.values.resize(n);
  out.advantages.resize(n);
  if (n == 0) return out;
  double ret = traj.back().done ? 0.0 : value.evaluate(traj.back().next_obs)[0];
  for (std::size_t k = n; k-- > 0;) {
    ret = traj[k].r_ext + traj[k].r_int + cfg.gamma * ret;
    out.returns[k] = ret;
    out.values[k] = value.evaluate(traj[k].obs)[0];
    out.advantages[k] = ret - out.values[k];
  }
  return out;
}

struct A2cLoss {
  double total = 0;
  double policy = 0;
  double value = 0;
  double entropy = 0;
};

/// loss = -sum log pi(a_k|s_k) A_k + value_weight * sum (R_k - v(s_k))^2
///        - entropy_weight * sum H(pi(.|s_k)),
/// with advantages held constant. Gradients of `scale * loss` are added to
/// both networks' gradient buffers.
inline A2cLoss a2c_loss(Mlp& policy, Mlp& value, const Trajectory& traj, const AdvantageEstimate& adv,
                        const A2cConfig& cfg, double scale = 1.0) {
  A2cLoss loss;
  std::vector<double> g;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Transition& tr = traj[k];
    const double a_k = adv.advantages[k];

    const auto v = value.forward(tr.obs);
    const double diff = adv.returns[k] - v[0];
    loss.value += diff * diff;
    const double gv = -2.0 * cfg.value_weight * diff * scale;
    value.backward(std::span<const double>(&gv, 1));

    // A forced move contributes nothing: log pi = 0, H = 0, zero gradient.
    if (count_legal(tr.legal) <= 1) continue;
    const auto logits = policy.forward(tr.obs);
    const auto p = masked_softmax(logits, tr.legal);
    const auto act = static_cast<std::size_t>(tr.action);
    if (!tr.legal[act]) throw std::invalid_argument("a2c_loss: recorded action is not in its legal mask");
    double h = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0) h -= p[i] * std::log(p[i]);
    loss.policy -= std::log(p[act]) * a_k;
    loss.entropy += h;

    g.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!tr.legal[i]) continue;
      const double onehot = i == act ? 1.0 : 0.0;
      const double logp = p[i] > 0 ? std::log(p[i]) : 0.0;
      g[i] = scale * (a_k * (p[i] - onehot) + cfg.entropy_weight * p[i] * (logp + h));
    }
    policy.backward(g);
  }
  loss.total = loss.policy + cfg.value_weight * loss.value - cfg.entropy_weight * loss.entropy;
  if (!std::isfinite(loss.total)) throw NonFiniteError("a2c_loss: non-finite loss");
  return loss;
}

}  // namespace rmc
