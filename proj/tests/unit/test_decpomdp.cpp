#include <gtest/gtest.h>

#include <sstream>

#include "uavaoi/decpomdp.hpp"

using namespace uavaoi;

namespace {

WorldConfig small_config() {
  WorldConfig cfg;
  cfg.num_sns = 3;
  cfg.num_uavs = 2;
  cfg.horizon = 30;
  cfg.starts = {{100, 100}, {600, 100}};
  cfg.stops = {{200, 300}, {600, 300}};
  cfg.sn_positions = {{150, 150}, {600, 200}, {790, 790}};
  cfg.finalize();
  return cfg;
}

}  // namespace

TEST(Codec, BijectionOverFlatRange) {
  const WorldConfig cfg = default_config();
  const ActionCodec codec(cfg);
  EXPECT_EQ(codec.size(), 2 * 6 * 16);
  for (int i = 0; i < codec.size(); ++i) EXPECT_EQ(codec.encode(codec.decode(i)), i);
  EXPECT_THROW(codec.decode(codec.size()), Error);
  EXPECT_THROW(codec.encode({2, 0, 0}), Error);
}

TEST(Observe, CoverageSentinels) {
  const WorldConfig cfg = small_config();
  const WorldState s = initial_state(cfg);
  const Observation o = observe(s, 0, cfg);
  EXPECT_EQ(o.aoi[0], 1);
  EXPECT_EQ(o.battery[0], cfg.sn_energy_max);
  EXPECT_EQ(o.aoi[2], -1);
  EXPECT_EQ(o.battery[2], kSentinel);
  const auto f = observation_features<double>(o, cfg);
  ASSERT_EQ(static_cast<int>(f.size()), observation_dim(cfg));
  EXPECT_EQ(f[4 + 2], -1.0);
  EXPECT_EQ(f[4 + 3 + 2], -1.0);
  EXPECT_EQ(f[f.size() - 2], 1.0);
  EXPECT_EQ(f[f.size() - 1], 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] != -1.0) {
      EXPECT_GE(f[i], 0.0);
      EXPECT_LE(f[i], 1.0);
    }
  }
}

TEST(Observe, LocalityOutsideCoverage) {
  const WorldConfig cfg = small_config();
  WorldState s = initial_state(cfg);
  const auto a = observe(s, 0, cfg);
  const auto b = observe(s, 1, cfg);
  s.sns[2].aoi = 50;
  s.sns[2].battery = 1e-4;
  EXPECT_EQ(observe(s, 0, cfg), a);
  EXPECT_EQ(observe(s, 1, cfg), b);
}

TEST(Cost, Examples) {
  const WorldConfig cfg = default_config();
  WorldState s = initial_state(cfg);
  EXPECT_EQ(cost(s, false, cfg), 15.0);
  EXPECT_EQ(cost(s, true, cfg), 15.0 + cfg.collision_penalty);
  for (auto& sn : s.sns) sn.aoi = cfg.delta_max;
  EXPECT_EQ(cost(s, false, cfg), 1500.0);
}

TEST(Environment, RandomEpisodesEndOnStops) {
  const WorldConfig cfg = small_config();
  Environment env(cfg);
  RandomPolicy policy{Rng(7, 0)};
  for (int e = 0; e < 20; ++e) {
    const EpisodeRecord rec = run_episode(env, Rng(1, e), policy);
    if (rec.reason == TerminalReason::kCollision) continue;
    EXPECT_EQ(static_cast<int>(rec.steps.size()), cfg.horizon);
    for (int m = 0; m < cfg.num_uavs; ++m) {
      EXPECT_LE(distance(rec.final_state.uavs[m].position, cfg.stops[m]), kArrivalTolerance);
      EXPECT_LE(rec.final_state.uavs[m].energy_spent, cfg.uav_energy_max);
    }
    double total = 0;
    for (const auto& st : rec.steps) total += st.cost;
    EXPECT_NEAR(objective({rec}), total / cfg.horizon, 1e-12);
  }
}

TEST(Environment, MaskViolationAndProjection) {
  const WorldConfig cfg = small_config();
  Environment env(cfg);
  env.reset(Rng(3, 3));
  const ActionCodec& codec = env.codec();
  // schedule the far SN, never in coverage
  const int bad = codec.encode({0, 0, 3});
  try {
    env.step({bad, bad});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMaskViolation);
  }
  Environment proj(cfg, {MaskMode::kProject, true});
  proj.reset(Rng(3, 3));
  const StepInfo info = proj.step({bad, bad});
  for (int a : info.executed) EXPECT_EQ(codec.decode(a).schedule, 0);
}

TEST(Environment, CollisionTerminates) {
  WorldConfig cfg = small_config();
  cfg.starts = {{100, 100}, {105, 100}};
  cfg.stops = cfg.starts;
  cfg.finalize();
  Environment env(cfg);
  RandomPolicy policy{Rng(1, 1)};
  const EpisodeRecord rec = run_episode(env, Rng(2, 2), policy);
  EXPECT_EQ(rec.reason, TerminalReason::kCollision);
  EXPECT_EQ(rec.steps.size(), 1u);
  EXPECT_GE(rec.steps[0].cost, cfg.collision_penalty);
  Environment keep(cfg, {MaskMode::kEnforce, false});
  const EpisodeRecord full = run_episode(keep, Rng(2, 2), policy);
  EXPECT_EQ(static_cast<int>(full.steps.size()), cfg.horizon);
}

TEST(Environment, UnreachableStopIsConfigError) {
  WorldConfig cfg = small_config();
  cfg.horizon = 5;
  cfg.finalize();
  try {
    Environment env(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(EpisodeRecord, JsonLinesRoundTrip) {
  const WorldConfig cfg = small_config();
  Environment env(cfg);
  RandomPolicy policy{Rng(9, 9)};
  std::vector<EpisodeRecord> eps;
  for (int e = 0; e < 2; ++e) eps.push_back(run_episode(env, Rng(4, e), policy, 4, e));
  std::stringstream ss;
  write_episodes(ss, eps);
  const auto back = read_episodes(ss);
  ASSERT_EQ(back.size(), 2u);
  for (int e = 0; e < 2; ++e) {
    EXPECT_EQ(back[e].reason, eps[e].reason);
    EXPECT_EQ(back[e].final_state, eps[e].final_state);
    ASSERT_EQ(back[e].steps.size(), eps[e].steps.size());
    for (std::size_t i = 0; i < eps[e].steps.size(); ++i) {
      EXPECT_EQ(back[e].steps[i].state, eps[e].steps[i].state);
      EXPECT_EQ(back[e].steps[i].masks, eps[e].steps[i].masks);
      EXPECT_EQ(back[e].steps[i].observations, eps[e].steps[i].observations);
      EXPECT_EQ(back[e].steps[i].actions, eps[e].steps[i].actions);
      EXPECT_EQ(back[e].steps[i].cost, eps[e].steps[i].cost);
    }
  }
  std::stringstream csv;
  write_trace_csv(csv, eps[0], cfg);
  int lines = 0;
  std::string line;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 2 + static_cast<int>(eps[0].steps.size()));
}

TEST(Environment, DeterministicEpisodes) {
  const WorldConfig cfg = small_config();
  Environment env(cfg);
  auto run = [&] {
    RandomPolicy policy{Rng(5, 0)};
    std::stringstream ss;
    write_episodes(ss, {run_episode(env, Rng(42, 0), policy, 42, 0)});
    return ss.str();
  };
  EXPECT_EQ(run(), run());
}
