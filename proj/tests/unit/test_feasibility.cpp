#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "uavaoi/feasibility.hpp"

using namespace uavaoi;

namespace {

const nlohmann::json& pins() {
  static const nlohmann::json j = [] {
    std::ifstream in(std::string(UAVAOI_FIXTURES) + "/physics_pins.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

void expect_rel(double got, double want, double tol = 1e-9) { EXPECT_NEAR(got, want, tol * std::fabs(want)); }

UavPose pose_at(Vec2 p, double v, double heading) {
  UavPose u;
  u.position = p;
  u.speed = v;
  u.heading = heading;
  return u;
}

}  // namespace

TEST(RequiredTime, Examples) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  EXPECT_EQ(required_time(stop, 0, 0, stop, cfg), pins()["t_req"]["at_stop_v0"].get<int>());
  EXPECT_EQ(required_time({295, 400}, 0, 0, stop, cfg), pins()["t_req"]["d105_v0"].get<int>());
  // flying away from the stop at full speed
  EXPECT_EQ(required_time({300, 400}, 20, std::numbers::pi, stop, cfg),
            pins()["t_req"]["d100_v20_opposite"].get<int>());
}

TEST(RequiredTime, NeverBelowOneAwayFromStop) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  EXPECT_EQ(required_time({401, 400}, 20, std::numbers::pi, stop, cfg), 1);
  EXPECT_EQ(required_time({400.5, 400}, 0, 0, stop, cfg), 1);
}

TEST(RequiredEnergy, Examples) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  expect_rel(required_energy(stop, 0, 0, stop, cfg), pins()["e_req"]["at_stop_v0"]);
  expect_rel(required_energy({295, 400}, 0, 0, stop, cfg), pins()["e_req"]["d105_v0"]);
  expect_rel(required_energy({300, 400}, 20, std::numbers::pi, stop, cfg), pins()["e_req"]["d100_v20_opposite"]);
  expect_rel(required_energy({200, 400}, 20, 0.0, stop, cfg), pins()["e_req"]["d200_v20_aligned"]);
}

TEST(Diffs, Examples) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  UavPose p = pose_at(stop, 0, 0);
  Diffs d = compute_diffs(p, 1, stop, cfg);
  EXPECT_EQ(d.time_diff, 99);
  expect_rel(d.energy_diff, cfg.uav_energy_max - pins()["e_req"]["at_stop_v0"].get<double>());
  d = compute_diffs(p, cfg.horizon, stop, cfg);
  EXPECT_EQ(d.time_diff, 0);
}

TEST(MaxSlotEnergy, MatchesOracle) {
  expect_rel(max_slot_energy(default_config()), pins()["e_bar"]);
}

TEST(MovementMask, StationaryAllowsEveryHeading) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  const MovementMask m = movement_mask(pose_at(stop, 0, 0), 1, stop, cfg);
  EXPECT_FALSE(m.forced);
  EXPECT_EQ(static_cast<int>(m.options.size()), (cfg.speed_levels + 1) * cfg.heading_levels);
}

TEST(MovementMask, TurningWindow) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  const MovementMask m = movement_mask(pose_at(stop, 20, 0), 1, stop, cfg);
  ASSERT_FALSE(m.forced);
  for (const auto& o : m.options) EXPECT_LE(angular_distance(0.0, o.heading), cfg.dphi_max + 1e-12);
  // 0, pi/3 and 5pi/3 at both speed levels
  EXPECT_EQ(m.options.size(), 6u);
}

TEST(MovementMask, ExcludesMovesLeavingTheArea) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  const MovementMask m = movement_mask(pose_at({0, 400}, 0, 0), 1, stop, cfg);
  for (const auto& o : m.options) {
    EXPECT_TRUE(inside_area(displace({0, 400}, 0, o.speed, o.heading, cfg), cfg));
  }
  EXPECT_LT(static_cast<int>(m.options.size()), 12);
}

TEST(MovementMask, ForcedWhenTimeIsShort) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  const UavPose p = pose_at({370, 400}, 0, 0);
  const int t = cfg.horizon - required_time(p.position, 0, 0, stop, cfg) - 3 + 1;
  EXPECT_EQ(compute_diffs(p, t, stop, cfg).time_diff, 3);
  const MovementMask m = movement_mask(p, t, stop, cfg);
  ASSERT_TRUE(m.forced);
  ASSERT_EQ(m.options.size(), 1u);
  EXPECT_NEAR(m.forced->heading, 0.0, 1e-12);
  EXPECT_GT(m.forced->speed, 0.0);
}

TEST(MovementMask, ForcedBrakeWhenFacingAway) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{400, 400};
  UavPose p = pose_at({300, 400}, 20, std::numbers::pi);
  const MovementOption cmd = forced_command(p, stop, cfg);
  EXPECT_EQ(cmd.speed, 0.0);
  EXPECT_NEAR(cmd.heading, std::numbers::pi, 1e-12);
}

TEST(ForcedController, TerminatesWithinRequiredTime) {
  const WorldConfig cfg = default_config();
  Rng rng(11, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Vec2 stop{rng.uniform(0, 800), rng.uniform(0, 800)};
    UavPose p = pose_at({rng.uniform(0, 800), rng.uniform(0, 800)}, cfg.speed_level(rng.uniform_int(2)),
                        cfg.heading_level(rng.uniform_int(6)));
    const int budget = required_time(p.position, p.speed, p.heading, stop, cfg);
    int slots = 0;
    while (!(distance(p.position, stop) <= kArrivalTolerance && p.speed <= kSpeedTolerance) && slots < 500) {
      const MovementOption cmd = forced_command(p, stop, cfg);
      if (p.speed > kSpeedTolerance) {
        EXPECT_LE(angular_distance(p.heading, cmd.heading), cfg.dphi_max + 1e-9);
      }
      p = apply_movement(p, cmd, cfg);
      ++slots;
    }
    // parked on the stop; one extra slot is the final stop-on-arrival
    EXPECT_LE(slots, budget + 1) << "trial " << trial;
    EXPECT_LE(distance(p.position, stop), kArrivalTolerance);
  }
}

TEST(ScheduleMask, CoverageAndEnergy) {
  const WorldConfig cfg = default_config();
  const double r = coverage_radius(cfg);
  std::vector<SensorNode> sns = {{1, {0, 0}, cfg.tx_energy(), 5, 0.9},
                                 {2, {r + 1, 0}, cfg.sn_energy_max, 5, 0.9},
                                 {3, {10, 10}, 1e-3, 5, 0.9}};
  EXPECT_EQ(schedule_mask({0, 0}, sns, cfg), (std::vector<int>{0, 1}));
  EXPECT_EQ(schedule_mask({2000, 2000}, sns, cfg), (std::vector<int>{0}));
}

TEST(Diffs, IncrementalIdentities) {
  const WorldConfig cfg = default_config();
  const Vec2 stop{600, 700};
  Rng rng(5, 5);
  UavPose p = pose_at({100, 100}, 0, 0);
  const MaskLimits limits(cfg);
  for (int t = 1; t <= cfg.horizon; ++t) {
    const Diffs before = compute_diffs(p, t, stop, cfg);
    const MovementMask m = movement_mask(p, t, stop, cfg, limits);
    const MovementOption& o = m.options[rng.uniform_int(m.options.size())];
    const double slot_energy = propulsion_energy(p.speed, o.speed, cfg);
    const int treq0 = required_time(p.position, p.speed, p.heading, stop, cfg);
    const double ereq0 = required_energy(p.position, p.speed, p.heading, stop, cfg);
    p = apply_movement(p, o, cfg);
    const Diffs after = compute_diffs(p, t + 1, stop, cfg);
    const int treq1 = required_time(p.position, p.speed, p.heading, stop, cfg);
    const double ereq1 = required_energy(p.position, p.speed, p.heading, stop, cfg);
    EXPECT_EQ(after.time_diff, before.time_diff - 1 + treq0 - treq1);
    EXPECT_NEAR(after.energy_diff, before.energy_diff - slot_energy + ereq0 - ereq1, 1e-9);
  }
  EXPECT_LE(distance(p.position, stop), kArrivalTolerance);
}
