#pragma once

// Exhaustive breadth-first search over the joint-action state graph of a
// small cell instance. Each agent may pick any action legal in the pre-step
// state, the same choice set a masked policy sees.

#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rmc/cell.hpp"

namespace rmc {

struct MakespanResult {
  int makespan = 0;
  std::vector<JointAction> schedule;
  std::size_t states_explored = 0;
};

/// Largest a + b the oracle accepts; the joint state graph grows quickly.
inline constexpr int kOracleTargetBound = 4;

namespace detail {

// Clock parity matters (priority alternates); the absolute clock does not.
struct OracleKey {
  std::array<Slot, kMaxStations> slots;
  Counts input_remaining;
  Counts delivered;
  int parity;

  friend bool operator<(const OracleKey& a, const OracleKey& b) {
    auto tup = [](const OracleKey& k) {
      std::array<int, kMaxStations * 3 + 5> v{};
      std::size_t i = 0;
      for (const auto& s : k.slots) {
        v[i++] = s.occupied;
        v[i++] = s.occupied ? static_cast<int>(s.kind) : 0;
        v[i++] = s.occupied ? s.remaining : 0;
      }
      v[i++] = k.input_remaining[0];
      v[i++] = k.input_remaining[1];
      v[i++] = k.delivered[0];
      v[i++] = k.delivered[1];
      v[i++] = k.parity;
      return v;
    };
    return tup(a) < tup(b);
  }
};

inline OracleKey key_of(const CellState& s) {
  return {s.slots, s.input_remaining, s.delivered, s.t % 2};
}

}  // namespace detail

/// Minimal number of joint steps from reset until every target piece is
/// delivered, with one witness schedule. Returns nullopt if the targets are
/// unreachable. Throws if a + b exceeds kOracleTargetBound.
inline std::optional<MakespanResult> optimal_makespan(const Layout& layout, Counts targets, int process_time = 1) {
  if (targets[0] + targets[1] > kOracleTargetBound)
    throw std::invalid_argument("oracle: targets a+b must be <= " + std::to_string(kOracleTargetBound) +
                                " for exhaustive search; use a smaller instance");
  CellConfig cfg{targets, process_time, 1 << 30, 0};
  const Cell cell(layout, cfg);
  const CellState start = cell.reset();
  if (start.targets_met()) return MakespanResult{0, {}, 1};

  struct Parent {
    detail::OracleKey prev;
    JointAction action;
  };
  std::map<detail::OracleKey, std::optional<Parent>> seen;
  std::deque<CellState> frontier{start};
  seen.emplace(detail::key_of(start), std::nullopt);

  while (!frontier.empty()) {
    CellState s = frontier.front();
    frontier.pop_front();
    const auto legal = cell.legal_actions(s);
    for (ActionId a0 : legal) {
      for (ActionId a1 : legal) {
        StepResult r = cell.step(s, {a0, a1}, false);
        auto key = detail::key_of(r.next);
        if (seen.count(key)) continue;
        seen.emplace(key, Parent{detail::key_of(s), {a0, a1}});
        if (r.next.targets_met()) {
          MakespanResult out;
          out.makespan = r.next.t;
          out.states_explored = seen.size();
          for (auto k = key;;) {
            const auto& p = seen.at(k);
            if (!p) break;
            out.schedule.push_back(p->action);
            k = p->prev;
          }
          std::reverse(out.schedule.begin(), out.schedule.end());
          return out;
        }
        r.next.terminated = false;
        frontier.push_back(r.next);
      }
    }
  }
  return std::nullopt;
}

}  // namespace rmc
