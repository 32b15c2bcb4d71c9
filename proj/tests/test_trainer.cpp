#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "rmc/trainer.hpp"

using namespace rmc;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(Counts targets, long episodes = 5) {
  RunConfig cfg;
  cfg.targets = targets;
  cfg.episodes = episodes;
  cfg.hidden = 16;
  cfg.hidden_layers = 1;
  cfg.icm.hidden = 16;
  cfg.icm.feature_dim = 8;
  cfg.seed = 7;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rmc_trainer_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_row(MetricsRow a, MetricsRow b) {
  a.wall_time = b.wall_time = 0;
  return a.to_csv() == b.to_csv();
}

}  // namespace

TEST(Trainer, EmptyTargetEndsAfterOneStep) {
  Trainer t(tiny({0, 0}));
  const MetricsRow row = t.run_episode();
  EXPECT_EQ(row.steps, 1);
  EXPECT_TRUE(row.success());
  EXPECT_EQ(row.sum_r_ext, 0.0);
}

TEST(Trainer, NoCuriosityAndNoDeliveryMeansNoReward) {
  RunConfig cfg = tiny({3, 3});
  cfg.icm_on = false;
  cfg.max_steps = 3;  // too short for any delivery
  Trainer t(cfg);
  for (int e = 0; e < 3; ++e) {
    const MetricsRow row = t.run_episode();
    EXPECT_EQ(row.steps, 3);
    EXPECT_EQ(row.sum_combined, 0.0);
    EXPECT_EQ(row.sum_r_int, 0.0);
    EXPECT_EQ(row.loss_inverse, 0.0);
    EXPECT_FALSE(row.success());
  }
}

TEST(Trainer, CuriosityProducesPositiveIntrinsicReward) {
  RunConfig cfg = tiny({2, 2});
  cfg.max_steps = 20;
  Trainer t(cfg);
  const MetricsRow row = t.run_episode();
  EXPECT_GT(row.sum_r_int, 0.0);
  EXPECT_DOUBLE_EQ(row.sum_combined, row.sum_r_ext + row.sum_r_int);
}

TEST(Trainer, IntrinsicRewardNormalizerIsOptional) {
  RunConfig cfg = tiny({2, 2});
  cfg.max_steps = 20;
  EXPECT_FALSE(cfg.r_int_normalize);
  const MetricsRow raw = Trainer(cfg).run_episode();
  cfg.r_int_normalize = true;
  const MetricsRow scaled = Trainer(cfg).run_episode();
  EXPECT_GT(scaled.sum_r_int, 0.0);
  EXPECT_NE(scaled.sum_r_int, raw.sum_r_int);
}

TEST(Trainer, DeterministicForFixedSeed) {
  RunConfig cfg = tiny({2, 1});
  cfg.gm_on = true;
  cfg.gm.refresh_every = 3;
  Trainer a(cfg), b(cfg);
  for (int e = 0; e < 4; ++e) ASSERT_TRUE(same_row(a.run_episode(), b.run_episode()));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t n = 0; n < Agent::kNumNets; ++n)
      EXPECT_TRUE(a.agents()[i].net(n) == b.agents()[i].net(n));
  cfg.seed = 8;
  Trainer c(cfg);
  EXPECT_FALSE(a.agents()[0].policy == c.agents()[0].policy);
}

TEST(Trainer, KeepFractionFollowsEpisodeProgress) {
  RunConfig cfg = tiny({0, 0}, 100);
  cfg.gm_on = true;
  Trainer t(cfg);
  EXPECT_DOUBLE_EQ(t.current_keep_fraction(), 1.0);
  for (int e = 0; e < 10; ++e) t.run_episode();
  EXPECT_DOUBLE_EQ(t.current_keep_fraction(), 0.65);
  for (int e = 0; e < 20; ++e) t.run_episode();
  EXPECT_DOUBLE_EQ(t.current_keep_fraction(), 0.3);
}

TEST(Trainer, CurriculumAdvancesBetweenEpisodes) {
  RunConfig cfg = tiny({1, 1}, 3);
  cfg.cl_on = true;
  cfg.cl_stages = {0, 1};
  cfg.cl_threshold = 1.0;
  cfg.cl_window = 1;
  Trainer t(cfg);
  const MetricsRow first = t.run_episode();
  EXPECT_EQ(first.stage, 0u);
  EXPECT_EQ(first.targets, (Counts{0, 0}));
  const MetricsRow second = t.run_episode();
  EXPECT_EQ(second.stage, 1u);
  EXPECT_EQ(second.targets, (Counts{1, 1}));
}

TEST(Trainer, ZeroBudgetWritesOnlyTheInitialState) {
  const fs::path out = scratch("zero");
  RunConfig cfg = tiny({1, 1}, 0);
  cfg.out_dir = out.string();
  cfg.checkpoint_every = 1;
  Trainer t(cfg);
  t.train();
  EXPECT_EQ(t.episodes_done(), 0);
  EXPECT_EQ(slurp(out / "metrics.csv"), std::string(MetricsRow::kHeader) + "\n");
  EXPECT_TRUE(fs::exists(out / "manifest.txt"));
  EXPECT_TRUE(fs::exists(out / "final" / "agent0.ckpt"));
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(out)) dirs += e.is_directory();
  EXPECT_EQ(dirs, 1);
  const auto loaded = load_checkpoint(out / "final");
  EXPECT_TRUE(loaded[0].agent.policy == t.agents()[0].policy);
  fs::remove_all(out);
}

TEST(Trainer, WritesMetricsAndPeriodicCheckpoints) {
  const fs::path out = scratch("periodic");
  RunConfig cfg = tiny({1, 0}, 4);
  cfg.out_dir = out.string();
  cfg.checkpoint_every = 2;
  Trainer t(cfg);
  int seen = 0;
  t.train([&](const MetricsRow&) { return ++seen < 10; });
  EXPECT_EQ(seen, 4);
  const std::string csv = slurp(out / "metrics.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(out / "checkpoint_2" / "agent1.ckpt"));
  EXPECT_TRUE(fs::exists(out / "checkpoint_4" / "agent0.ckpt"));
  EXPECT_TRUE(fs::exists(out / "final" / "agent1.ckpt"));
  fs::remove_all(out);
}

TEST(Trainer, EarlyStopFromCallback) {
  Trainer t(tiny({1, 0}, 50));
  t.train([&](const MetricsRow& r) { return r.episode < 2; });
  EXPECT_EQ(t.episodes_done(), 3);
}

TEST(Trainer, NonFiniteLossWritesFailedRollout) {
  const fs::path out = scratch("nan");
  RunConfig cfg = tiny({1, 1}, 2);
  cfg.out_dir = out.string();
  Trainer t(cfg);
  t.agents()[0].value.params()[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(t.train(), NonFiniteError);
  const std::string dump = slurp(out / "failed_rollout.txt");
  EXPECT_NE(dump.find("non-finite"), std::string::npos);
  fs::remove_all(out);
}

TEST(Trainer, IcmTransferCheckPassesForBothCells) {
  RunConfig cfg = tiny({1, 1});
  EXPECT_NO_THROW(Trainer{cfg});
  cfg.env = EnvKind::Grmc;
  Trainer g(cfg);
  EXPECT_EQ(g.agents()[0].icm.obs_dim(), 49);
  EXPECT_EQ(g.agents()[0].icm.num_actions(), 15);
  EXPECT_EQ(g.agents()[0].icm.config(), cfg.icm);
}

TEST(Checkpoint, AgentRoundTrip) {
  const fs::path out = scratch("ckpt");
  RunConfig cfg = tiny({1, 1}, 2);
  cfg.gm_on = true;
  Trainer t(cfg);
  t.run_episode();
  t.run_episode();
  save_checkpoint(out, t.agents(), cfg.env);
  const auto loaded = load_checkpoint(out);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(loaded[i].env, "srmc");
    EXPECT_EQ(loaded[i].agent.updates, t.agents()[i].updates);
    const Agent& back = loaded[i].agent;
    EXPECT_TRUE(back.policy == t.agents()[i].policy);
    EXPECT_TRUE(back.value == t.agents()[i].value);
    EXPECT_TRUE(back.icm.encoder() == t.agents()[i].icm.encoder());
    EXPECT_TRUE(back.icm.inverse_head() == t.agents()[i].icm.inverse_head());
    EXPECT_TRUE(back.icm.forward_head() == t.agents()[i].icm.forward_head());
  }
  fs::remove_all(out);
}

TEST(Evaluate, SideEffectFreeAndRepeatable) {
  const fs::path out = scratch("eval");
  RunConfig cfg = tiny({1, 0}, 3);
  Trainer t(cfg);
  t.train();
  save_checkpoint(out, t.agents(), cfg.env);
  const std::string before = slurp(out / "agent0.ckpt");
  const CellConfig cc = cfg.cell_config({1, 0});
  const auto a = evaluate_checkpoint(out, EnvKind::Srmc, cc, 3);
  const auto b = evaluate_checkpoint(out, EnvKind::Srmc, cc, 3);
  EXPECT_EQ(a.makespans, b.makespans);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.success_rate, b.success_rate);
  EXPECT_EQ(slurp(out / "agent0.ckpt"), before);
  EXPECT_THROW(evaluate_checkpoint(out, EnvKind::Grmc, cc, 1), std::invalid_argument);
  fs::remove_all(out);
}

TEST(Evaluate, MissingCheckpointIsAnError) {
  EXPECT_THROW(load_checkpoint(scratch("missing")), std::runtime_error);
}
