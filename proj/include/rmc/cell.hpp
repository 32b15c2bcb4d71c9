#pragma once

// Shared domain model for the robot manufacturing cells: stations, work-piece
// routes, the per-agent action table and the two-agent transition function.
// Both the simple cell and the graph cell are instances of `Cell` with a
// different `Layout`.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rmc {

enum class WorkPieceKind : std::uint8_t { WP1 = 0, WP2 = 1 };
inline constexpr std::size_t kNumKinds = 2;
inline constexpr std::array<WorkPieceKind, kNumKinds> kAllKinds{WorkPieceKind::WP1, WorkPieceKind::WP2};

inline constexpr std::size_t kind_index(WorkPieceKind k) { return static_cast<std::size_t>(k); }

inline std::string_view kind_name(WorkPieceKind k) { return k == WorkPieceKind::WP1 ? "WP1" : "WP2"; }

enum class StationId : std::uint8_t { IB1, IB2, M1, M2, M3, OB, MB1, MB2, MB3 };
inline constexpr std::size_t kMaxStations = 9;

enum class StationRole : std::uint8_t { Input, Machine, Buffer, Output };

inline constexpr StationRole role_of(StationId s) {
  switch (s) {
    case StationId::IB1:
    case StationId::IB2:
      return StationRole::Input;
    case StationId::M1:
    case StationId::M2:
    case StationId::M3:
      return StationRole::Machine;
    case StationId::MB1:
    case StationId::MB2:
    case StationId::MB3:
      return StationRole::Buffer;
    case StationId::OB:
      return StationRole::Output;
  }
  return StationRole::Buffer;
}

inline std::string_view station_name(StationId s) {
  static constexpr std::array<std::string_view, kMaxStations> names{"IB1", "IB2", "M1", "M2", "M3",
                                                                     "OB",  "MB1", "MB2", "MB3"};
  return names[static_cast<std::size_t>(s)];
}

inline std::string_view role_name(StationRole r) {
  switch (r) {
    case StationRole::Input: return "input";
    case StationRole::Machine: return "machine";
    case StationRole::Buffer: return "buffer";
    case StationRole::Output: return "output";
  }
  return "?";
}

/// Occupancy of one station. `remaining` counts processing steps left and is
/// only ever positive on a machine.
struct Slot {
  bool occupied = false;
  WorkPieceKind kind = WorkPieceKind::WP1;
  int remaining = 0;

  static constexpr Slot empty() { return {}; }
  static constexpr Slot holding(WorkPieceKind k, int remaining = 0) { return {true, k, remaining}; }

  constexpr bool ready() const { return occupied && remaining == 0; }

  friend constexpr bool operator==(const Slot& a, const Slot& b) {
    if (a.occupied != b.occupied) return false;
    return !a.occupied || (a.kind == b.kind && a.remaining == b.remaining);
  }
};

using Counts = std::array<int, kNumKinds>;

/// Full snapshot of a cell. Slots are indexed by node index of the owning
/// layout; entries past `Layout::size()` stay empty. Input and output
/// stations never hold a slot payload: inputs are tracked by
/// `input_remaining`, the output by `delivered`.
struct CellState {
  std::array<Slot, kMaxStations> slots{};
  Counts input_remaining{};
  Counts delivered{};
  Counts target{};
  int t = 0;
  bool terminated = false;

  int in_flight(WorkPieceKind k) const {
    int n = 0;
    for (const auto& s : slots) n += (s.occupied && s.kind == k) ? 1 : 0;
    return n;
  }

  bool targets_met() const { return delivered == target; }

  friend bool operator==(const CellState&, const CellState&) = default;
};

/// One transport: move a piece of `kind` from `from` to `to`.
struct Move {
  WorkPieceKind kind;
  StationId from;
  StationId to;
  friend constexpr bool operator==(const Move&, const Move&) = default;
};

using ActionId = int;
inline constexpr ActionId kNoop = 0;

/// Stations in node order, per-kind routes, and the action table derived from
/// them (NOOP at 0, then every consecutive route pair, WP1 first).
class Layout {
 public:
  Layout(std::string name, std::vector<StationId> stations, std::array<std::vector<StationId>, kNumKinds> routes)
      : name_(std::move(name)), stations_(std::move(stations)), routes_(std::move(routes)) {
    if (stations_.size() > kMaxStations) throw std::invalid_argument("layout: too many stations");
    node_of_.fill(-1);
    for (std::size_t i = 0; i < stations_.size(); ++i) {
      auto& slot = node_of_[static_cast<std::size_t>(stations_[i])];
      if (slot != -1) throw std::invalid_argument("layout: duplicate station");
      slot = static_cast<int>(i);
    }
    for (auto kind : kAllKinds) {
      const auto& route = routes_[kind_index(kind)];
      if (route.size() < 2) throw std::invalid_argument("layout: route too short");
      if (role_of(route.front()) != StationRole::Input || role_of(route.back()) != StationRole::Output)
        throw std::invalid_argument("layout: route must run from an input to the output");
      for (std::size_t i = 0; i < route.size(); ++i) {
        if (node_of_[static_cast<std::size_t>(route[i])] < 0)
          throw std::invalid_argument("layout: route visits a station outside the layout");
        if (i + 1 < route.size()) moves_.push_back({kind, route[i], route[i + 1]});
      }
    }
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return stations_.size(); }
  const std::vector<StationId>& stations() const { return stations_; }
  const std::vector<StationId>& route(WorkPieceKind k) const { return routes_[kind_index(k)]; }

  /// Node index of a station, or -1 when the station is not part of this layout.
  int node_of(StationId s) const { return node_of_[static_cast<std::size_t>(s)]; }

  /// Action table size including NOOP.
  int num_actions() const { return static_cast<int>(moves_.size()) + 1; }

  /// The move behind a non-NOOP action.
  const Move& move(ActionId a) const {
    if (a <= kNoop || a >= num_actions()) throw std::out_of_range("layout: action id has no move");
    return moves_[static_cast<std::size_t>(a - 1)];
  }

  const std::vector<Move>& moves() const { return moves_; }

  std::string action_name(ActionId a) const {
    if (a == kNoop) return "NOOP";
    const auto& m = move(a);
    return std::string(kind_name(m.kind)) + ":" + std::string(station_name(m.from)) + "->" +
           std::string(station_name(m.to));
  }

  std::size_t observation_size() const { return 5 * size() + 2 * kNumKinds; }

 private:
  std::string name_;
  std::vector<StationId> stations_;
  std::array<std::vector<StationId>, kNumKinds> routes_;
  std::array<int, kMaxStations> node_of_{};
  std::vector<Move> moves_;
};

/// Per-station one-hot categories used by the observation encoding.
enum class SlotCategory : int { Empty = 0, Wp1Processing = 1, Wp1Ready = 2, Wp2Processing = 3, Wp2Ready = 4 };

inline SlotCategory categorize(const Slot& s) {
  if (!s.occupied) return SlotCategory::Empty;
  const bool processing = s.remaining > 0;
  if (s.kind == WorkPieceKind::WP1) return processing ? SlotCategory::Wp1Processing : SlotCategory::Wp1Ready;
  return processing ? SlotCategory::Wp2Processing : SlotCategory::Wp2Ready;
}

/// Fixed-length observation: a 5-way one-hot per station in node order, then
/// input_remaining and delivered per kind, each divided by the kind's target
/// (0 when the target is 0).
inline std::vector<double> encode_observation(const CellState& state, const Layout& layout) {
  std::vector<double> obs(layout.observation_size(), 0.0);
  for (std::size_t i = 0; i < layout.size(); ++i)
    obs[5 * i + static_cast<std::size_t>(categorize(state.slots[i]))] = 1.0;
  std::size_t base = 5 * layout.size();
  auto norm = [&](int v, std::size_t k) { return state.target[k] > 0 ? double(v) / state.target[k] : 0.0; };
  for (std::size_t k = 0; k < kNumKinds; ++k) obs[base + k] = norm(state.input_remaining[k], k);
  for (std::size_t k = 0; k < kNumKinds; ++k) obs[base + kNumKinds + k] = norm(state.delivered[k], k);
  return obs;
}

/// Per-agent record of one environment step.
struct Transition {
  std::vector<double> obs;
  ActionId action = kNoop;
  double r_ext = 0.0;
  double r_int = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  bool truncated = false;
  bool invalid = false;
  /// Legal-action mask seen when the action was chosen.
  std::vector<std::uint8_t> legal;
};

struct CellConfig {
  Counts targets{20, 20};
  int process_time = 1;
  /// 0 selects the default of 200 steps per target work-piece.
  int max_steps = 0;
  std::uint64_t seed = 0;

  int effective_max_steps() const {
    return max_steps > 0 ? max_steps : std::max(1, 200 * (targets[0] + targets[1]));
  }

  void validate() const {
    if (targets[0] < 0 || targets[1] < 0) throw std::invalid_argument("cell config: targets must be >= 0");
    if (process_time < 1) throw std::invalid_argument("cell config: process_time must be >= 1");
    if (max_steps < 0) throw std::invalid_argument("cell config: max_steps must be >= 1 (or 0 for default)");
  }
};

struct StepResult {
  CellState next;
  std::array<Transition, 2> transitions;
  /// Move actually executed per agent, empty for NOOP or invalid.
  std::array<std::optional<Move>, 2> executed;
};

using JointAction = std::array<ActionId, 2>;

/// Two-agent cell MDP over a layout. All member functions are const and pure;
/// the cell itself is an immutable value.
class Cell {
 public:
  Cell(Layout layout, CellConfig config) : layout_(std::move(layout)), config_(config) { config_.validate(); }

  const Layout& layout() const { return layout_; }
  const CellConfig& config() const { return config_; }
  int num_actions() const { return layout_.num_actions(); }
  std::size_t observation_size() const { return layout_.observation_size(); }
  int max_steps() const { return config_.effective_max_steps(); }

  CellState reset() const {
    CellState s;
    s.input_remaining = config_.targets;
    s.target = config_.targets;
    return s;
  }

  std::vector<double> observe(const CellState& s) const { return encode_observation(s, layout_); }

  bool is_legal(const CellState& s, ActionId a) const {
    if (a == kNoop) return true;
    if (a < 0 || a >= num_actions()) return false;
    const Move& m = layout_.move(a);
    const auto k = kind_index(m.kind);
    const int from = layout_.node_of(m.from);
    const int to = layout_.node_of(m.to);
    if (role_of(m.from) == StationRole::Input) {
      if (s.input_remaining[k] <= 0) return false;
    } else {
      const Slot& src = s.slots[static_cast<std::size_t>(from)];
      if (!src.ready() || src.kind != m.kind) return false;
    }
    if (role_of(m.to) == StationRole::Output) return true;
    return !s.slots[static_cast<std::size_t>(to)].occupied;
  }

  /// Mask over the action table; entry 0 (NOOP) is always set.
  std::vector<std::uint8_t> legal_mask(const CellState& s) const {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_actions()), 0);
    for (ActionId a = 0; a < num_actions(); ++a) mask[static_cast<std::size_t>(a)] = is_legal(s, a) ? 1 : 0;
    return mask;
  }

  std::vector<ActionId> legal_actions(const CellState& s) const {
    std::vector<ActionId> out;
    for (ActionId a = 0; a < num_actions(); ++a)
      if (is_legal(s, a)) out.push_back(a);
    return out;
  }

  /// Agent applied first at clock `t`; priority alternates with step parity.
  static constexpr std::size_t first_agent(int t) { return static_cast<std::size_t>(t % 2); }

  /// Advance one joint step. Actions are applied one after the other in
  /// priority order; an action illegal at its application time is executed as
  /// NOOP and flagged invalid. Machines then count down, the clock advances,
  /// and the episode terminates on delivery of all targets or at max_steps.
  /// `with_observations` = false skips filling the transition vectors.
  StepResult step(const CellState& state, JointAction actions, bool with_observations = true) const {
    if (state.terminated) throw std::logic_error("step: episode already terminated");
    for (ActionId a : actions)
      if (a < 0 || a >= num_actions()) throw std::out_of_range("step: action id out of range");

    StepResult out;
    CellState& next = out.next;
    next = state;
    std::vector<std::uint8_t> mask;
    if (with_observations) mask = legal_mask(state);

    const std::size_t first = first_agent(state.t);
    for (std::size_t n = 0; n < 2; ++n) {
      const std::size_t agent = (first + n) % 2;
      const ActionId a = actions[agent];
      Transition& tr = out.transitions[agent];
      tr.action = a;
      if (a == kNoop) continue;
      if (!is_legal(next, a)) {
        tr.invalid = true;
        continue;
      }
      const Move& m = layout_.move(a);
      apply_move(next, m);
      out.executed[agent] = m;
      if (role_of(m.to) == StationRole::Output) tr.r_ext = 1.0;
    }

    for (std::size_t i = 0; i < layout_.size(); ++i) {
      Slot& slot = next.slots[i];
      if (slot.occupied && role_of(layout_.stations()[i]) == StationRole::Machine && slot.remaining > 0)
        --slot.remaining;
    }
    next.t = state.t + 1;
    const bool done = next.targets_met();
    const bool truncated = !done && next.t >= max_steps();
    next.terminated = done || truncated;

    std::vector<double> obs, next_obs;
    if (with_observations) {
      obs = observe(state);
      next_obs = observe(next);
    }
    for (auto& tr : out.transitions) {
      tr.done = done;
      tr.truncated = truncated;
      if (with_observations) {
        tr.obs = obs;
        tr.next_obs = next_obs;
        tr.legal = mask;
      }
    }
    return out;
  }

 private:
  void apply_move(CellState& s, const Move& m) const {
    const auto k = kind_index(m.kind);
    if (role_of(m.from) == StationRole::Input)
      --s.input_remaining[k];
    else
      s.slots[static_cast<std::size_t>(layout_.node_of(m.from))] = Slot::empty();
    if (role_of(m.to) == StationRole::Output) {
      ++s.delivered[k];
      return;
    }
    const int remaining = role_of(m.to) == StationRole::Machine ? config_.process_time : 0;
    s.slots[static_cast<std::size_t>(layout_.node_of(m.to))] = Slot::holding(m.kind, remaining);
  }

  Layout layout_;
  CellConfig config_;
};

/// Stateful single-writer wrapper: owns the current state of one episode.
class Episode {
 public:
  explicit Episode(const Cell& cell) : cell_(&cell), state_(cell.reset()) {}

  const CellState& state() const { return state_; }
  const CellState& reset() { return state_ = cell_->reset(); }

  StepResult step(JointAction actions) {
    StepResult r = cell_->step(state_, actions);
    state_ = r.next;
    return r;
  }

 private:
  const Cell* cell_;
  CellState state_;
};

}  // namespace rmc
