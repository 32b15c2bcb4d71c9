#include <gtest/gtest.h>

#include <random>

#include "reference_cell.hpp"
#include "rmc/oracle.hpp"
#include "rmc/srmc.hpp"
#include "test_support.hpp"

using namespace rmc;

namespace {

ActionId action_of(const Layout& l, WorkPieceKind k, StationId from, StationId to) {
  for (ActionId a = 1; a < l.num_actions(); ++a)
    if (l.move(a) == Move{k, from, to}) return a;
  throw std::invalid_argument("no such action");
}

std::size_t node(const Cell& c, StationId s) { return static_cast<std::size_t>(c.layout().node_of(s)); }

}  // namespace

TEST(SrmcReset, PaperTargets) {
  SrmcEnv env(SrmcConfig{20, 20});
  const CellState s = env.reset();
  EXPECT_EQ(s.input_remaining, (Counts{20, 20}));
  EXPECT_EQ(s.delivered, (Counts{0, 0}));
  EXPECT_EQ(s.t, 0);
  for (const auto& slot : s.slots) EXPECT_FALSE(slot.occupied);
  EXPECT_EQ(env.max_steps(), 8000);
}

TEST(SrmcReset, EmptyTargetFinishesOnFirstStep) {
  SrmcEnv env(SrmcConfig{0, 0});
  const CellState s = env.reset();
  EXPECT_TRUE(s.targets_met());
  const auto r = env.step(s, {kNoop, kNoop});
  EXPECT_TRUE(r.transitions[0].done);
  EXPECT_TRUE(r.transitions[1].done);
  EXPECT_EQ(r.next.t, 1);
}

TEST(SrmcReset, Deterministic) {
  SrmcEnv env(SrmcConfig{4, 3});
  EXPECT_EQ(env.reset(), env.reset());
}

TEST(SrmcLegalActions, InitialState) {
  SrmcEnv env(SrmcConfig{1, 1});
  const auto& l = env.layout();
  const auto legal = env.legal_actions(env.reset());
  const std::vector<ActionId> want{kNoop, action_of(l, WorkPieceKind::WP1, StationId::IB1, StationId::M1),
                                   action_of(l, WorkPieceKind::WP2, StationId::IB2, StationId::M2)};
  EXPECT_EQ(legal, want);
}

TEST(SrmcLegalActions, ProcessingBlocksDeparture) {
  SrmcEnv env(SrmcConfig{1, 1, 2});
  CellState s = env.reset();
  s.input_remaining[0] = 0;
  s.slots[node(env, StationId::M1)] = Slot::holding(WorkPieceKind::WP1, 1);
  const ActionId m1_m2 = action_of(env.layout(), WorkPieceKind::WP1, StationId::M1, StationId::M2);
  EXPECT_FALSE(env.is_legal(s, m1_m2));
  s.slots[node(env, StationId::M1)].remaining = 0;
  EXPECT_TRUE(env.is_legal(s, m1_m2));
}

TEST(SrmcLegalActions, MatchesRuleCheckerOnAllReachableStates) {
  const auto rules = reference::Rules::simple();
  SrmcEnv env(SrmcConfig{1, 1});
  std::size_t checked = 0;
  for (const auto& r : reference::reachable(rules, 1, 1)) {
    const CellState s = support::to_cell_state(r, env.layout());
    const auto mask = env.legal_mask(s);
    for (int a = 0; a < rules.num_actions(); ++a) {
      EXPECT_EQ(mask[static_cast<std::size_t>(a)] != 0, rules.legal(r, a)) << "action " << a;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(SrmcStep, MatchesRuleCheckerOnAllReachableStates) {
  const auto rules = reference::Rules::simple();
  SrmcEnv env(SrmcConfig{1, 1});
  for (const auto& r : reference::reachable(rules, 1, 1)) {
    const CellState s = support::to_cell_state(r, env.layout());
    if (s.targets_met()) continue;
    for (int a0 = 0; a0 < rules.num_actions(); ++a0)
      for (int a1 = 0; a1 < rules.num_actions(); ++a1) {
        const auto want = rules.step(r, a0, a1);
        const auto got = env.step(s, {a0, a1});
        CellState expect_next = support::to_cell_state(want.next, env.layout());
        expect_next.terminated = want.done || want.truncated;
        ASSERT_EQ(got.next, expect_next);
        for (int i = 0; i < 2; ++i) {
          EXPECT_EQ(got.transitions[static_cast<std::size_t>(i)].r_ext, want.reward[i]);
          EXPECT_EQ(got.transitions[static_cast<std::size_t>(i)].invalid, want.invalid[i]);
          EXPECT_EQ(got.transitions[static_cast<std::size_t>(i)].done, want.done);
        }
      }
  }
}

TEST(SrmcStep, NoopOnlyCountsDown) {
  SrmcEnv env(SrmcConfig{2, 2, 3});
  CellState s = env.reset();
  s.input_remaining = {1, 2};
  s.slots[node(env, StationId::M1)] = Slot::holding(WorkPieceKind::WP1, 2);
  const auto r = env.step(s, {kNoop, kNoop});
  EXPECT_EQ(r.next.slots[node(env, StationId::M1)], Slot::holding(WorkPieceKind::WP1, 1));
  EXPECT_EQ(r.next.input_remaining, s.input_remaining);
  EXPECT_EQ(r.transitions[0].r_ext, 0.0);
  EXPECT_EQ(r.transitions[1].r_ext, 0.0);
}

TEST(SrmcStep, FinalDeliveryRewardsDeliveringAgent) {
  SrmcEnv env(SrmcConfig{1, 0});
  CellState s = env.reset();
  s.input_remaining = {0, 0};
  s.slots[node(env, StationId::M3)] = Slot::holding(WorkPieceKind::WP1, 0);
  const ActionId deliver = action_of(env.layout(), WorkPieceKind::WP1, StationId::M3, StationId::OB);
  const auto r = env.step(s, {kNoop, deliver});
  EXPECT_EQ(r.transitions[1].r_ext, 1.0);
  EXPECT_EQ(r.transitions[0].r_ext, 0.0);
  EXPECT_TRUE(r.transitions[1].done);
  EXPECT_TRUE(r.next.terminated);
}

TEST(SrmcStep, PriorityAlternatesWithParity) {
  SrmcEnv env(SrmcConfig{2, 0});
  const ActionId load = action_of(env.layout(), WorkPieceKind::WP1, StationId::IB1, StationId::M1);
  const ActionId forward = action_of(env.layout(), WorkPieceKind::WP1, StationId::M1, StationId::M2);
  // Both agents ask for the same move; only the agent with priority gets it.
  auto r0 = env.step(env.reset(), {load, load});
  EXPECT_FALSE(r0.transitions[0].invalid);
  EXPECT_TRUE(r0.transitions[1].invalid);
  auto r1 = env.step(r0.next, {forward, forward});
  EXPECT_TRUE(r1.transitions[0].invalid);
  EXPECT_FALSE(r1.transitions[1].invalid);
}

TEST(SrmcStep, TruncatesAtMaxSteps) {
  SrmcEnv env(SrmcConfig{1, 1, 1, 3});
  CellState s = env.reset();
  StepResult r;
  for (int i = 0; i < 3; ++i) {
    r = env.step(s, {kNoop, kNoop});
    s = r.next;
  }
  EXPECT_TRUE(r.transitions[0].truncated);
  EXPECT_FALSE(r.transitions[0].done);
  EXPECT_EQ(s.t, 3);
  EXPECT_TRUE(s.terminated);
}

TEST(SrmcStep, DeterministicAndEpisodeRewardSumsToTargets) {
  SrmcEnv env(SrmcConfig{3, 2});
  std::mt19937_64 rng(3);
  int completed = 0;
  for (int ep = 0; ep < 200; ++ep) {
    CellState s = env.reset();
    double reward = 0;
    while (!s.terminated) {
      const auto legal = env.legal_actions(s);
      std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
      const JointAction act{legal[pick(rng)], legal[pick(rng)]};
      const auto a = env.step(s, act);
      const auto b = env.step(s, act);
      ASSERT_EQ(a.next, b.next);
      ASSERT_EQ(a.transitions[0].next_obs, b.transitions[0].next_obs);
      for (std::size_t i = 0; i < 2; ++i) reward += a.transitions[i].r_ext;
      int machine_pieces = 0;
      for (const auto& slot : a.next.slots) machine_pieces += slot.occupied;
      ASSERT_LE(machine_pieces, 3);
      s = a.next;
    }
    if (s.targets_met()) {
      ++completed;
      EXPECT_EQ(reward, 5.0);
    }
  }
  EXPECT_GT(completed, 0);
}

TEST(SrmcOracle, MakespanMatchesRouteLengthForSinglePiece) {
  // A lone WP1 needs one step per route edge: IB1-M1-M2-M3-OB.
  const auto r = optimal_makespan(srmc_layout(), {1, 0});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->makespan, 4);
  const auto r2 = optimal_makespan(srmc_layout(), {0, 1});
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->makespan, 4);
}

TEST(SrmcOracle, EmptyInstance) {
  const auto r = optimal_makespan(srmc_layout(), {0, 0});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->makespan, 0);
  EXPECT_TRUE(r->schedule.empty());
}

TEST(SrmcOracle, PinnedMakespanAndWitnessReplays) {
  // Pinned from the breadth-first search; the M1/M2 swap forces the two
  // pieces to pass the shared machines one after the other.
  const auto r = optimal_makespan(srmc_layout(), {1, 1});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->makespan, 7);
  SrmcEnv env(SrmcConfig{1, 1});
  CellState s = env.reset();
  for (const auto& act : r->schedule) s = env.step(s, act).next;
  EXPECT_TRUE(s.targets_met());
  EXPECT_EQ(s.t, r->makespan);
}

TEST(SrmcOracle, RejectsLargeInstances) { EXPECT_THROW(optimal_makespan(srmc_layout(), {3, 2}), std::invalid_argument); }
