#pragma once

// Gradient monitoring: keep a running importance estimate per parameter
// (exponential average of |grad|) and let only the most important fraction
// of parameters receive updates. The kept fraction shrinks on a schedule,
// which narrows the part of the network that is still trained.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace rmc {

struct GmConfig {
  double decay = 0.99;
  double min_keep = 0.3;
  int refresh_every = 100;
  /// Fraction of the training budget over which the keep fraction ramps down.
  double ramp_fraction = 0.2;

  void validate() const {
    if (!(decay > 0 && decay < 1)) throw std::invalid_argument("gm: decay must lie in (0,1)");
    if (!(min_keep > 0 && min_keep <= 1)) throw std::invalid_argument("gm: min_keep must lie in (0,1]");
    if (refresh_every < 1) throw std::invalid_argument("gm: refresh_every must be >= 1");
    if (!(ramp_fraction >= 0 && ramp_fraction <= 1)) throw std::invalid_argument("gm: ramp_fraction must lie in [0,1]");
  }
};

/// max(f_min, 1 - progress/ramp * (1 - f_min)); a zero-length ramp jumps
/// straight to f_min.
inline double keep_fraction(double progress, double ramp, double min_keep) {
  if (ramp <= 0) return min_keep;
  return std::max(min_keep, 1.0 - progress / ramp * (1.0 - min_keep));
}

class GradientMonitor {
 public:
  GradientMonitor() = default;
  GradientMonitor(std::size_t n, double decay) : decay_(decay), importance_(n, 0.0), mask_(n, 1) {}

  std::size_t size() const { return importance_.size(); }
  const std::vector<double>& importance() const { return importance_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  long observations() const { return observations_; }

  void observe(std::span<const double> grads) {
    if (grads.size() != importance_.size()) throw std::invalid_argument("gm: gradient size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
      importance_[i] = decay_ * importance_[i] + (1 - decay_) * std::abs(grads[i]);
    ++observations_;
  }

  /// Keep the top `keep` fraction by importance; ties go to the lower index.
  const std::vector<std::uint8_t>& refresh_mask(double keep) {
    const std::size_t n = importance_.size();
    const auto k = static_cast<std::size_t>(std::llround(std::clamp(keep, 0.0, 1.0) * static_cast<double>(n)));
    if (k >= n) {
      std::fill(mask_.begin(), mask_.end(), 1);
      return mask_;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto more_important = [&](std::size_t a, std::size_t b) {
      return importance_[a] != importance_[b] ? importance_[a] > importance_[b] : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), more_important);
    std::fill(mask_.begin(), mask_.end(), 0);
    for (std::size_t i = 0; i < k; ++i) mask_[order[i]] = 1;
    return mask_;
  }

  /// Zero the gradients of masked parameters.
  void apply(std::span<double> grads) const {
    if (grads.size() != mask_.size()) throw std::invalid_argument("gm: gradient size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
      if (!mask_[i]) grads[i] = 0.0;
  }

  double masked_fraction() const {
    if (mask_.empty()) return 0.0;
    const auto kept = std::count(mask_.begin(), mask_.end(), std::uint8_t{1});
    return 1.0 - static_cast<double>(kept) / static_cast<double>(mask_.size());
  }

 private:
  double decay_ = 0.99;
  std::vector<double> importance_;
  std::vector<std::uint8_t> mask_;
  long observations_ = 0;
};

}  // namespace rmc
