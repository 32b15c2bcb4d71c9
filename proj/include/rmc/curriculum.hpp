#pragma once

// Staged work-piece targets. The learner advances to the next stage once the
// success rate over a full trailing window reaches the threshold.

#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmc/cell.hpp"

namespace rmc {

struct CurriculumPlan {
  std::vector<Counts> stages;
  double threshold = 0.95;
  int window = 100;

  /// Symmetric stages (n, n) for each n in `sizes`.
  static CurriculumPlan symmetric(const std::vector<int>& sizes, double threshold = 0.95, int window = 100) {
    CurriculumPlan p;
    for (int n : sizes) p.stages.push_back({n, n});
    p.threshold = threshold;
    p.window = window;
    return p;
  }

  static CurriculumPlan srmc() { return symmetric({5, 10, 15, 20}); }
  static CurriculumPlan grmc(int max_stage = 7) {
    std::vector<int> sizes;
    for (int n = 1; n <= max_stage; ++n) sizes.push_back(n);
    return symmetric(sizes);
  }
  static CurriculumPlan single(Counts target) { return {{target}, 0.95, 100}; }

  void validate() const {
    if (stages.empty()) throw std::invalid_argument("curriculum: no stages");
    if (!(threshold > 0 && threshold <= 1)) throw std::invalid_argument("curriculum: threshold must lie in (0,1]");
    if (window < 1) throw std::invalid_argument("curriculum: window must be >= 1");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (stages[i][0] < 0 || stages[i][1] < 0) throw std::invalid_argument("curriculum: negative target");
      if (i > 0 && stages[i][0] + stages[i][1] <= stages[i - 1][0] + stages[i - 1][1])
        throw std::invalid_argument("curriculum: stage totals must strictly increase");
    }
  }
};

class Curriculum {
 public:
  explicit Curriculum(CurriculumPlan plan) : plan_(std::move(plan)) { plan_.validate(); }

  const CurriculumPlan& plan() const { return plan_; }
  std::size_t stage() const { return stage_; }
  bool at_final_stage() const { return stage_ + 1 == plan_.stages.size(); }
  Counts current_targets() const { return plan_.stages[stage_]; }

  /// Success rate over the current (possibly partial) window.
  double success_rate() const { return recent_.empty() ? 0.0 : double(successes_) / double(recent_.size()); }

  /// Returns true when this episode advanced the stage.
  bool record_episode(bool success) {
    recent_.push_back(success);
    successes_ += success ? 1 : 0;
    if (static_cast<int>(recent_.size()) > plan_.window) {
      successes_ -= recent_.front() ? 1 : 0;
      recent_.pop_front();
    }
    if (at_final_stage() || static_cast<int>(recent_.size()) < plan_.window) return false;
    if (success_rate() < plan_.threshold) return false;
    ++stage_;
    recent_.clear();
    successes_ = 0;
    return true;
  }

 private:
  CurriculumPlan plan_;
  std::size_t stage_ = 0;
  std::deque<bool> recent_;
  int successes_ = 0;
};

}  // namespace rmc
