#pragma once

// Intrinsic curiosity module: a feature encoder shared by an inverse-dynamics
// head (predicts the action from two consecutive features) and a
// forward-dynamics head (predicts the next feature from the current feature
// and the action). The forward prediction error is the intrinsic reward.
//
// The architecture depends on the environment only through the observation
// width and the action count, so one configuration serves every cell layout.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "rmc/cell.hpp"
#include "rmc/nn.hpp"

namespace rmc {

struct IcmConfig {
  double eta = 1.0;     // intrinsic reward scale
  double beta = 0.2;    // forward vs inverse weight
  double lambda = 1.0;  // policy-gradient weight
  int feature_dim = 16;
  int hidden = 64;

  void validate() const {
    if (!(eta > 0)) throw std::invalid_argument("icm: eta must be > 0");
    if (!(beta >= 0 && beta <= 1)) throw std::invalid_argument("icm: beta must lie in [0,1]");
    if (!(lambda > 0)) throw std::invalid_argument("icm: lambda must be > 0");
    if (feature_dim < 1 || hidden < 1) throw std::invalid_argument("icm: layer sizes must be >= 1");
  }

  friend bool operator==(const IcmConfig&, const IcmConfig&) = default;
};

/// Layer shapes of the three ICM networks for given environment widths.
struct IcmArchitecture {
  std::vector<LayerShape> encoder;
  std::vector<LayerShape> inverse;
  std::vector<LayerShape> forward;

  static IcmArchitecture make(const IcmConfig& cfg, int obs_dim, int num_actions) {
    const int h[] = {cfg.hidden};
    const int f = cfg.feature_dim;
    return {mlp_shape(obs_dim, h, f, Activation::Tanh, Activation::Tanh),
            mlp_shape(2 * f, h, num_actions, Activation::Tanh, Activation::Identity),
            mlp_shape(f + num_actions, h, f, Activation::Tanh, Activation::Identity)};
  }
};

class Icm {
 public:
  Icm() = default;

  Icm(const IcmConfig& cfg, int obs_dim, int num_actions, std::mt19937_64& rng)
      : cfg_(cfg), obs_dim_(obs_dim), num_actions_(num_actions) {
    cfg_.validate();
    const auto arch = IcmArchitecture::make(cfg, obs_dim, num_actions);
    encoder_ = Mlp(arch.encoder);
    inverse_ = Mlp(arch.inverse);
    forward_ = Mlp(arch.forward);
    encoder_.init(rng);
    inverse_.init(rng);
    forward_.init(rng);
  }

  Icm(const IcmConfig& cfg, Mlp encoder, Mlp inverse, Mlp forward)
      : cfg_(cfg), encoder_(std::move(encoder)), inverse_(std::move(inverse)), forward_(std::move(forward)) {
    obs_dim_ = encoder_.input_size();
    num_actions_ = inverse_.output_size();
    const auto arch = IcmArchitecture::make(cfg_, obs_dim_, num_actions_);
    if (arch.encoder != encoder_.layers() || arch.inverse != inverse_.layers() || arch.forward != forward_.layers())
      throw std::invalid_argument("icm: network shapes do not match the configured architecture");
  }

  const IcmConfig& config() const { return cfg_; }
  int obs_dim() const { return obs_dim_; }
  int num_actions() const { return num_actions_; }
  int feature_dim() const { return cfg_.feature_dim; }

  Mlp& encoder() { return encoder_; }
  Mlp& inverse_head() { return inverse_; }
  Mlp& forward_head() { return forward_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& inverse_head() const { return inverse_; }
  const Mlp& forward_head() const { return forward_; }

  std::vector<double> encode(std::span<const double> obs) const { return encoder_.evaluate(obs); }

  /// phi(s_t) concatenated with one-hot(a_t).
  std::vector<double> forward_input(std::span<const double> phi, ActionId action) const {
    check_action(action);
    std::vector<double> in(phi.begin(), phi.end());
    in.resize(phi.size() + static_cast<std::size_t>(num_actions_), 0.0);
    in[phi.size() + static_cast<std::size_t>(action)] = 1.0;
    return in;
  }

  /// Predicted next-state feature.
  std::vector<double> predict_next(std::span<const double> phi, ActionId action) const {
    return forward_.evaluate(forward_input(phi, action));
  }

  /// Cross-entropy of the inverse head's softmax against the taken action.
  /// Gradients of `scale * L_I` go into the inverse head and the encoder.
  double inverse_loss(std::span<const double> obs_t, std::span<const double> obs_next, ActionId action,
                      double scale = 1.0) {
    check_action(action);
    const auto phi_t = encode(obs_t);
    const auto phi_n = encode(obs_next);
    std::vector<double> in(phi_t);
    in.insert(in.end(), phi_n.begin(), phi_n.end());
    const auto logits = inverse_.forward(in);
    const auto p = softmax(logits);
    const auto a = static_cast<std::size_t>(action);
    const double loss = -std::log(std::max(p[a], std::numeric_limits<double>::min()));

    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = scale * (p[i] - (i == a ? 1.0 : 0.0));
    const auto g_in = inverse_.backward(g);
    const auto f = static_cast<std::ptrdiff_t>(cfg_.feature_dim);
    encoder_.forward(obs_t);
    encoder_.backward(std::span<const double>(g_in.data(), static_cast<std::size_t>(f)));
    encoder_.forward(obs_next);
    encoder_.backward(std::span<const double>(g_in.data() + f, static_cast<std::size_t>(f)));
    return loss;
  }

  /// 0.5 * ||phi_hat(s_{t+1}) - phi(s_{t+1})||^2. Both features are constants
  /// here; gradients of `scale * L_F` go into the forward head only.
  double forward_loss(std::span<const double> obs_t, ActionId action, std::span<const double> obs_next,
                      double scale = 1.0) {
    const auto phi_t = encode(obs_t);
    const auto phi_n = encode(obs_next);
    const auto pred = forward_.forward(forward_input(phi_t, action));
    double loss = 0;
    std::vector<double> g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - phi_n[i];
      loss += 0.5 * d * d;
      g[i] = scale * d;
    }
    forward_.backward(g);
    return loss;
  }

  /// Forward-model error without touching any gradient buffer.
  double prediction_error(std::span<const double> obs_t, ActionId action, std::span<const double> obs_next) const {
    const auto pred = predict_next(encode(obs_t), action);
    const auto phi_n = encode(obs_next);
    double loss = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) loss += 0.5 * (pred[i] - phi_n[i]) * (pred[i] - phi_n[i]);
    return loss;
  }

  /// r_int = eta * 0.5 * ||phi_hat(s_{t+1}) - phi(s_{t+1})||^2.
  double intrinsic_reward(std::span<const double> obs_t, ActionId action, std::span<const double> obs_next) const {
    return cfg_.eta * prediction_error(obs_t, action, obs_next);
  }

  void zero_grad() {
    encoder_.zero_grad();
    inverse_.zero_grad();
    forward_.zero_grad();
  }

 private:
  void check_action(ActionId a) const {
    if (a < 0 || a >= num_actions_) throw std::out_of_range("icm: action id out of range");
  }

  IcmConfig cfg_;
  int obs_dim_ = 0;
  int num_actions_ = 0;
  Mlp encoder_, inverse_, forward_;
};

/// Running standard deviation of the intrinsic reward (Welford). When enabled,
/// each reward is divided by the deviation of all rewards seen so far,
/// including itself; until two samples exist the reward passes through.
class RunningStd {
 public:
  double normalize(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
    const double sd = stddev();
    return sd > kEpsilon ? x / sd : x;
  }

  long count() const { return n_; }
  double stddev() const { return n_ < 2 ? 0.0 : std::sqrt(m2_ / static_cast<double>(n_ - 1)); }

  static constexpr double kEpsilon = 1e-8;

 private:
  long n_ = 0;
  double mean_ = 0;
  double m2_ = 0;
};

}  // namespace rmc
