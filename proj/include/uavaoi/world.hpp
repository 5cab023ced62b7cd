#pragma once

#include <algorithm>
#include <vector>

#include "uavaoi/config.hpp"
#include "uavaoi/error.hpp"
#include "uavaoi/feasibility.hpp"
#include "uavaoi/physics.hpp"
#include "uavaoi/rng.hpp"
#include "uavaoi/state.hpp"

namespace uavaoi {

struct TransmissionOutcome {
  int uav = 0;
  int sn = 0;  // 0: nothing scheduled
  bool los_drawn = false;
  double sinr = 0.0;
  bool success = false;
};

/// What one UAV does in a slot, after action decoding.
struct UavCommand {
  MovementOption move;
  int schedule = 0;
};

struct StepResult {
  WorldState state;
  std::vector<TransmissionOutcome> outcomes;
  bool collision = false;
  std::vector<std::pair<int, int>> colliding;
};

/// Slot-1 state: UAVs hover at their starts facing their stops, batteries
/// full, AoI at its initial value.
inline WorldState initial_state(const WorldConfig& cfg, std::uint64_t rng_stream = 0) {
  WorldState s;
  s.t = 1;
  s.rng_stream = rng_stream;
  for (int n = 0; n < cfg.num_sns; ++n) {
    s.sns.push_back({n + 1, cfg.sn_positions[n], cfg.sn_energy_max, cfg.initial_aoi, cfg.harvest_prob[n]});
  }
  for (int m = 0; m < cfg.num_uavs; ++m) {
    UavPose p;
    p.position = cfg.starts[m];
    p.heading = distance(cfg.starts[m], cfg.stops[m]) > 0.0 ? bearing(cfg.starts[m], cfg.stops[m]) : 0.0;
    const Diffs d = compute_diffs(p, 1, cfg.stops[m], cfg);
    p.time_diff = d.time_diff;
    p.energy_diff = d.energy_diff;
    s.uavs.push_back(p);
  }
  return s;
}

/// Samples the gains needed for this slot's SINR evaluation: for every
/// scheduling UAV, one draw per distinct scheduled SN, in UAV-major order.
inline ChannelGains draw_channel(const WorldState& s, const std::vector<UavCommand>& cmds, const WorldConfig& cfg,
                                 Rng& rng, std::vector<std::vector<bool>>* los = nullptr) {
  ChannelGains gains(cfg.num_sns, cfg.num_uavs);
  std::vector<int> scheduled;
  for (const auto& c : cmds) {
    if (c.schedule != 0 && std::find(scheduled.begin(), scheduled.end(), c.schedule) == scheduled.end()) {
      scheduled.push_back(c.schedule);
    }
  }
  std::sort(scheduled.begin(), scheduled.end());
  if (los) los->assign(cfg.num_uavs, std::vector<bool>(cfg.num_sns + 1, false));
  for (int m = 0; m < cfg.num_uavs; ++m) {
    if (cmds[m].schedule == 0) continue;
    for (int n : scheduled) {
      const double d = link_distance(s.sns[n - 1].position, s.uavs[m].position, cfg);
      const PathLossSample pl = sample_path_loss(d, cfg, rng);
      gains.set(n, m, 1.0 / pl.path_loss);
      if (los) (*los)[m][n] = pl.los;
    }
  }
  return gains;
}

/// One slot of the system. Updates happen in this order: channel draws and
/// SINR, AoI, harvesting and batteries, motion, propulsion energy, time and
/// energy differences, collision test, slot counter.
inline StepResult world_step(const WorldState& s, const std::vector<UavCommand>& cmds, const WorldConfig& cfg,
                             Rng& rng) {
  if (s.t > cfg.horizon) fail(ErrorCode::kEpisodeOver, "slot " + std::to_string(s.t) + " beyond horizon");
  if (static_cast<int>(cmds.size()) != cfg.num_uavs || static_cast<int>(s.uavs.size()) != cfg.num_uavs ||
      static_cast<int>(s.sns.size()) != cfg.num_sns) {
    fail(ErrorCode::kDimensionMismatch, "state/command sizes do not match the config");
  }
  for (const auto& c : cmds) {
    if (c.schedule < 0 || c.schedule > cfg.num_sns) fail(ErrorCode::kDimensionMismatch, "SN id out of range");
  }

  StepResult r;
  r.state = s;
  WorldState& next = r.state;

  std::vector<std::vector<bool>> los;
  const ChannelGains gains = draw_channel(s, cmds, cfg, rng, &los);
  std::vector<int> schedules(cfg.num_uavs);
  for (int m = 0; m < cfg.num_uavs; ++m) schedules[m] = cmds[m].schedule;

  std::vector<bool> delivered(cfg.num_sns + 1, false);
  std::vector<bool> transmitted(cfg.num_sns + 1, false);
  for (int m = 0; m < cfg.num_uavs; ++m) {
    TransmissionOutcome o;
    o.uav = m;
    o.sn = schedules[m];
    if (o.sn != 0) {
      o.los_drawn = los[m][o.sn];
      o.sinr = sinr(m, schedules, gains, cfg);
      o.success = o.sinr >= cfg.xi_th;
      transmitted[o.sn] = true;
      delivered[o.sn] = delivered[o.sn] || o.success;
    }
    r.outcomes.push_back(o);
  }

  for (auto& sn : next.sns) sn.aoi = aoi_step(sn.aoi, delivered[sn.id], cfg);

  for (auto& sn : next.sns) {
    const bool harvested = rng.bernoulli(sn.harvest_prob);
    sn.battery = battery_step(sn.battery, harvested, transmitted[sn.id], cfg);
  }

  std::vector<Vec2> positions;
  for (int m = 0; m < cfg.num_uavs; ++m) {
    const UavPose& p = s.uavs[m];
    const MovementOption& mv = cmds[m].move;
    UavPose& q = next.uavs[m];
    q.position = advance_position(p.position, p.speed, mv.speed, mv.heading, cfg);
    q.energy_spent = p.energy_spent + propulsion_energy(p.speed, mv.speed, cfg);
    q.speed = mv.speed;
    q.heading = wrap_angle(mv.heading);
    const Diffs d = compute_diffs(q, s.t + 1, cfg.stops[m], cfg);
    q.time_diff = d.time_diff;
    q.energy_diff = d.energy_diff;
    positions.push_back(q.position);
  }

  r.colliding = check_collisions(positions, cfg);
  r.collision = !r.colliding.empty();
  next.t = s.t + 1;
  return r;
}

}  // namespace uavaoi
