#pragma once

// Small fully-connected networks with exact reverse-mode gradients and an
// Adam optimizer. Parameters, gradients and both moment accumulators live in
// flat arrays so that gradient masks can address every weight by index.

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmc {

enum class Activation { Identity, Tanh, Relu, Softmax };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "softmax") return Activation::Softmax;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

struct LayerShape {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Builds hidden layers of width `hidden` with `hidden_act`, then a final
/// layer with `out_act`.
inline std::vector<LayerShape> mlp_shape(int in, std::span<const int> hidden, int out, Activation hidden_act,
                                         Activation out_act) {
  std::vector<LayerShape> layers;
  int prev = in;
  for (int h : hidden) {
    layers.push_back({prev, h, hidden_act});
    prev = h;
  }
  layers.push_back({prev, out, out_act});
  return layers;
}

struct OptimConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double max_grad_norm = 0.5;

  void validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("optim: learning_rate must be > 0");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
      throw std::invalid_argument("optim: moment decays must lie in (0,1)");
    if (!(epsilon > 0)) throw std::invalid_argument("optim: epsilon must be > 0");
  }
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerically stable softmax (max-subtraction).
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
  for (double& x : p) x /= sum;
  return p;
}

/// Softmax restricted to entries with mask != 0; masked entries get exactly 0.
inline std::vector<double> masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (mask.size() != logits.size()) throw std::invalid_argument("masked_softmax: mask size mismatch");
  std::vector<double> p(logits.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) mx = std::max(mx, logits[i]);
  if (mx == -std::numeric_limits<double>::infinity()) throw std::invalid_argument("masked_softmax: empty mask");
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) sum += p[i] = std::exp(logits[i] - mx);
  for (double& x : p) x /= sum;
  return p;
}

/// A multilayer perceptron together with its gradient buffer and Adam state.
class Mlp {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Mlp() = default;

  explicit Mlp(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("mlp: no layers");
    std::size_t off = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.in <= 0 || l.out <= 0) throw std::invalid_argument("mlp: layer sizes must be positive");
      if (i > 0 && layers_[i - 1].out != l.in) throw std::invalid_argument("mlp: layer widths do not chain");
      if (l.act == Activation::Softmax && i + 1 != layers_.size())
        throw std::invalid_argument("mlp: softmax is only allowed on the output layer");
      w_off_.push_back(off);
      off += static_cast<std::size_t>(l.in) * l.out;
      b_off_.push_back(off);
      off += static_cast<std::size_t>(l.out);
    }
    params_.assign(off, 0.0);
    grads_.assign(off, 0.0);
    m_.assign(off, 0.0);
    v_.assign(off, 0.0);
    acts_.resize(layers_.size() + 1);
  }

  /// Uniform fan-in/fan-out scaled initialization; biases start at zero.
  void init(std::mt19937_64& rng) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const double limit = std::sqrt(6.0 / (l.in + l.out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (std::size_t j = 0; j < static_cast<std::size_t>(l.in) * l.out; ++j) params_[w_off_[i] + j] = dist(rng);
      for (int j = 0; j < l.out; ++j) params_[b_off_[i] + j] = 0.0;
    }
  }

  const std::vector<LayerShape>& layers() const { return layers_; }
  int input_size() const { return layers_.front().in; }
  int output_size() const { return layers_.back().out; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  long step_count() const { return step_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  /// Evaluates and caches activations for a following `backward`.
  std::span<const double> forward(std::span<const double> x) {
    check_input(x);
    acts_[0] = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      acts_[i + 1] = weight(i) * acts_[i] + bias(i);
      activate(layers_[i].act, acts_[i + 1]);
    }
    has_forward_ = true;
    const auto& y = acts_.back();
    return {y.data(), static_cast<std::size_t>(y.size())};
  }

  /// Evaluation without touching the backward cache.
  std::vector<double> evaluate(std::span<const double> x) const {
    check_input(x);
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Eigen::VectorXd z = weight(i) * a + bias(i);
      activate(layers_[i].act, z);
      a = std::move(z);
    }
    return {a.data(), a.data() + a.size()};
  }

  /// Accumulates d(loss)/d(params) into the gradient buffer given d(loss)/d(output)
  /// for the most recent `forward` input, and returns d(loss)/d(input).
  std::vector<double> backward(std::span<const double> grad_out) {
    if (!has_forward_) throw std::logic_error("mlp: backward called without a cached forward pass");
    if (grad_out.size() != static_cast<std::size_t>(output_size()))
      throw std::invalid_argument("mlp: output gradient size mismatch");
    Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(grad_out.data(), static_cast<Eigen::Index>(grad_out.size()));
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Eigen::VectorXd& y = acts_[i + 1];
      switch (layers_[i].act) {
        case Activation::Identity: break;
        case Activation::Tanh: g.array() *= 1.0 - y.array().square(); break;
        case Activation::Relu: g.array() *= (y.array() > 0).cast<double>(); break;
        case Activation::Softmax: g = y.cwiseProduct(g - Eigen::VectorXd::Constant(g.size(), g.dot(y))); break;
      }
      const auto& l = layers_[i];
      Eigen::Map<RowMatrix> gw(grads_.data() + w_off_[i], l.out, l.in);
      Eigen::Map<Eigen::VectorXd> gb(grads_.data() + b_off_[i], l.out);
      gw.noalias() += g * acts_[i].transpose();
      gb += g;
      g = weight(i).transpose() * g;
    }
    return {g.data(), g.data() + g.size()};
  }

  void zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  /// Adam update. Gradients are clipped to the configured global norm first;
  /// entries with mask == 0 are skipped entirely (parameter and moments stay
  /// put). Clears the gradient buffer and bumps the step count. Returns the
  /// pre-clip gradient norm.
  double adam_step(const OptimConfig& cfg, std::span<const std::uint8_t> mask = {}) {
    if (!mask.empty() && mask.size() != params_.size()) throw std::invalid_argument("adam: mask size mismatch");
    double sq = 0;
    for (std::size_t i = 0; i < grads_.size(); ++i) {
      if (!std::isfinite(grads_[i]))
        throw NonFiniteError("adam: non-finite gradient at parameter " + std::to_string(i));
      if (mask.empty() || mask[i]) sq += grads_[i] * grads_[i];
    }
    const double norm = std::sqrt(sq);
    const double scale = (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm) ? cfg.max_grad_norm / norm : 1.0;
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      const double g = grads_[i] * scale;
      m_[i] = cfg.beta1 * m_[i] + (1 - cfg.beta1) * g;
      v_[i] = cfg.beta2 * v_[i] + (1 - cfg.beta2) * g * g;
      params_[i] -= cfg.learning_rate * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg.epsilon);
    }
    zero_grad();
    return norm;
  }

  /// Text checkpoint: shapes, activations, parameters and optimizer state in
  /// row-major decimal with round-trip precision.
  void write(std::ostream& os, const std::string& name) const {
    os << "net " << name << ' ' << layers_.size() << '\n';
    for (const auto& l : layers_) os << "layer " << l.in << ' ' << l.out << ' ' << activation_name(l.act) << '\n';
    os << "step " << step_ << '\n';
    write_array(os, "params", params_);
    write_array(os, "adam_m", m_);
    write_array(os, "adam_v", v_);
  }

  static Mlp read(std::istream& is, const std::string& expected_name) {
    std::string tag, name;
    std::size_t n = 0;
    if (!(is >> tag >> name >> n) || tag != "net") throw std::runtime_error("checkpoint: expected 'net' record");
    if (name != expected_name) throw std::runtime_error("checkpoint: expected net '" + expected_name + "', got '" + name + "'");
    std::vector<LayerShape> layers(n);
    for (auto& l : layers) {
      std::string act;
      if (!(is >> tag >> l.in >> l.out >> act) || tag != "layer") throw std::runtime_error("checkpoint: bad layer record");
      l.act = parse_activation(act);
    }
    Mlp net(std::move(layers));
    if (!(is >> tag >> net.step_) || tag != "step") throw std::runtime_error("checkpoint: bad step record");
    read_array(is, "params", net.params_);
    read_array(is, "adam_m", net.m_);
    read_array(is, "adam_v", net.v_);
    return net;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.layers_ == b.layers_ && a.params_ == b.params_ && a.m_ == b.m_ && a.v_ == b.v_ && a.step_ == b.step_;
  }

 private:
  Eigen::Map<const RowMatrix> weight(std::size_t i) const {
    return {params_.data() + w_off_[i], layers_[i].out, layers_[i].in};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t i) const { return {params_.data() + b_off_[i], layers_[i].out}; }

  void check_input(std::span<const double> x) const {
    if (layers_.empty()) throw std::logic_error("mlp: empty network");
    if (x.size() != static_cast<std::size_t>(input_size()))
      throw std::invalid_argument("mlp: input size " + std::to_string(x.size()) + " does not match " +
                                  std::to_string(input_size()));
  }

  static void activate(Activation act, Eigen::VectorXd& z) {
    switch (act) {
      case Activation::Identity: break;
      case Activation::Tanh: z = z.array().tanh(); break;
      case Activation::Relu: z = z.cwiseMax(0.0); break;
      case Activation::Softmax: {
        const double mx = z.maxCoeff();
        z = (z.array() - mx).exp();
        z /= z.sum();
        break;
      }
    }
  }

  static void write_array(std::ostream& os, const char* tag, const std::vector<double>& xs) {
    os << tag << ' ' << xs.size();
    char buf[32];
    for (double x : xs) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      os << ' ' << buf;
    }
    os << '\n';
  }

  static void read_array(std::istream& is, const char* tag, std::vector<double>& xs) {
    std::string t;
    std::size_t n = 0;
    if (!(is >> t >> n) || t != tag) throw std::runtime_error(std::string("checkpoint: expected '") + tag + "'");
    if (n != xs.size()) throw std::runtime_error(std::string("checkpoint: size mismatch in '") + tag + "'");
    std::string word;
    for (auto& x : xs) {
      if (!(is >> word)) throw std::runtime_error("checkpoint: truncated array");
      x = std::strtod(word.c_str(), nullptr);
    }
  }

  std::vector<LayerShape> layers_;
  std::vector<std::size_t> w_off_, b_off_;
  std::vector<double> params_, grads_, m_, v_;
  long step_ = 0;
  std::vector<Eigen::VectorXd> acts_;
  bool has_forward_ = false;
};

}  // namespace rmc
