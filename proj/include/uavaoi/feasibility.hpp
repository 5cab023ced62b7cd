#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "uavaoi/config.hpp"
#include "uavaoi/physics.hpp"
#include "uavaoi/state.hpp"

namespace uavaoi {

/// One movement decision: next speed and the heading flown in this slot.
/// Grid options carry their level indices; the forced option carries exact
/// (off-grid) values plus the indices of the nearest grid level, which is how
/// it appears in the discrete action space.
struct MovementOption {
  int speed_idx = 0;
  int heading_idx = 0;
  double speed = 0.0;
  double heading = 0.0;

  friend bool operator==(const MovementOption&, const MovementOption&) = default;
};

struct ActionMask {
  std::vector<MovementOption> movements;
  std::vector<int> schedulable;  // ascending, always starts with 0
  std::optional<MovementOption> forced;

  bool allows_movement(int speed_idx, int heading_idx) const {
    return std::any_of(movements.begin(), movements.end(), [&](const MovementOption& o) {
      return o.speed_idx == speed_idx && o.heading_idx == heading_idx;
    });
  }
  bool allows_schedule(int sn) const {
    return std::find(schedulable.begin(), schedulable.end(), sn) != schedulable.end();
  }

  friend bool operator==(const ActionMask&, const ActionMask&) = default;
};

/// Distances below this count as "at the destination".
inline constexpr double kArrivalTolerance = 1e-6;
inline constexpr double kSpeedTolerance = 1e-9;

namespace detail {

// Ceiling that ignores floating-point noise just above an integer.
inline int robust_ceil(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

}  // namespace detail

/// True when the UAV can point straight at its destination this slot:
/// it is stationary, already there, or the bearing lies in the turning window.
inline bool can_head_to_stop(Vec2 u, double v, double heading, Vec2 stop, const WorldConfig& cfg) {
  if (v <= kSpeedTolerance) return true;
  if (distance(u, stop) <= kArrivalTolerance) return true;
  return angular_distance(heading, bearing(u, stop)) <= cfg.dphi_max + 1e-12;
}

/// Slots needed to reach `stop`: accelerate to v_max and cruise when the
/// UAV can head there directly, otherwise brake, turn and then do so.
///
/// Boundary table:
///   distance > 0            -> at least 1
///   distance == 0, any v    -> formula value, floored at 0
inline int required_time(Vec2 u, double v, double heading, Vec2 stop, const WorldConfig& cfg) {
  const double dist = distance(u, stop);
  const double cruise = cfg.v_max * cfg.slot_len;
  int slots = 0;
  if (can_head_to_stop(u, v, heading, stop, cfg)) {
    const double ramp = 0.5 * (cfg.v_max + v) * cfg.slot_len;
    slots = 1 + detail::robust_ceil((dist - ramp) / cruise);
  } else {
    const double brake = 0.5 * v * cfg.slot_len;
    const double launch = 0.5 * cfg.v_max * cfg.slot_len;
    slots = 2 + detail::robust_ceil((dist + brake - launch) / cruise);
  }
  return std::max(slots, dist > kArrivalTolerance ? 1 : 0);
}

/// Propulsion energy of the reference manoeuvre behind `required_time`.
inline double required_energy(Vec2 u, double v, double heading, Vec2 stop, const WorldConfig& cfg) {
  const int slots = required_time(u, v, heading, stop, cfg);
  const double cruise = propulsion_energy(cfg.v_max, cfg.v_max, cfg);
  if (can_head_to_stop(u, v, heading, stop, cfg)) {
    return propulsion_energy(v, cfg.v_max, cfg) + std::max(slots - 1, 0) * cruise;
  }
  return propulsion_energy(v, 0.0, cfg) + propulsion_energy(0.0, cfg.v_max, cfg) + std::max(slots - 2, 0) * cruise;
}

struct Diffs {
  int time_diff = 0;
  double energy_diff = 0.0;
};

/// Slack of the remaining time/energy budget at the beginning of slot `t`.
inline Diffs compute_diffs(const UavPose& pose, int t, Vec2 stop, const WorldConfig& cfg) {
  const int remaining = cfg.horizon - t + 1;
  Diffs d;
  d.time_diff = remaining - required_time(pose.position, pose.speed, pose.heading, stop, cfg);
  d.energy_diff = (cfg.uav_energy_max - pose.energy_spent) -
                  required_energy(pose.position, pose.speed, pose.heading, stop, cfg);
  return d;
}

/// Largest single-slot propulsion energy over the speed grid.
inline double max_slot_energy(const WorldConfig& cfg) {
  double best = 0.0;
  for (int i = 0; i <= cfg.speed_levels; ++i) {
    for (int k = 0; k <= cfg.speed_levels; ++k) {
      best = std::max(best, propulsion_energy(cfg.speed_level(i), cfg.speed_level(k), cfg));
    }
  }
  return best;
}

inline int nearest_speed_level(double speed, const WorldConfig& cfg) {
  const int idx = static_cast<int>(std::lround(speed / cfg.v_max * cfg.speed_levels));
  return std::clamp(idx, 0, cfg.speed_levels);
}

inline int nearest_heading_level(double heading, const WorldConfig& cfg) {
  const int idx = static_cast<int>(std::lround(wrap_angle(heading) / kTwoPi * cfg.heading_levels));
  return idx % cfg.heading_levels;
}

/// The predetermined terminal controller. Pointing at the destination is
/// possible: fly there as fast as the remaining distance allows while keeping
/// the ability to stop exactly on it. Otherwise (or when too close to stop in
/// time) brake to zero along the current heading.
inline MovementOption forced_command(const UavPose& pose, Vec2 stop, const WorldConfig& cfg) {
  MovementOption cmd;
  const double dist = distance(pose.position, stop);
  const double v = pose.speed;
  if (dist <= kArrivalTolerance && v <= kSpeedTolerance) {
    cmd.speed = 0.0;
    cmd.heading = pose.heading;
  } else if (can_head_to_stop(pose.position, v, pose.heading, stop, cfg) &&
             dist + kArrivalTolerance >= 0.5 * v * cfg.slot_len) {
    cmd.heading = dist <= kArrivalTolerance ? pose.heading : bearing(pose.position, stop);
    const double stoppable = (dist - 0.5 * v * cfg.slot_len) / cfg.slot_len;
    cmd.speed = std::clamp(stoppable, 0.0, cfg.v_max);
  } else {
    cmd.speed = 0.0;
    cmd.heading = pose.heading;
  }
  cmd.speed_idx = nearest_speed_level(cmd.speed, cfg);
  cmd.heading_idx = nearest_heading_level(cmd.heading, cfg);
  return cmd;
}

/// Pose after executing `cmd` for one slot (no area check, diffs untouched).
inline UavPose apply_movement(const UavPose& pose, const MovementOption& cmd, const WorldConfig& cfg) {
  UavPose next = pose;
  next.position = displace(pose.position, pose.speed, cmd.speed, cmd.heading, cfg);
  next.energy_spent += propulsion_energy(pose.speed, cmd.speed, cfg);
  next.speed = cmd.speed;
  next.heading = wrap_angle(cmd.heading);
  return next;
}

/// Runs the terminal controller from the beginning of slot `t` through slot T
/// and reports whether it ends on the destination, inside the area, within
/// the energy budget.
inline bool forced_rollout_safe(UavPose pose, int t, Vec2 stop, const WorldConfig& cfg) {
  if (!inside_area(pose.position, cfg) || pose.energy_spent > cfg.uav_energy_max) return false;
  for (int slot = t; slot <= cfg.horizon; ++slot) {
    if (pose.speed <= kSpeedTolerance && distance(pose.position, stop) <= kArrivalTolerance) {
      // parked: the controller hovers for the remaining slots
      const double hover = propulsion_energy(0.0, 0.0, cfg);
      return pose.energy_spent + hover * (cfg.horizon - slot + 1) <= cfg.uav_energy_max;
    }
    pose = apply_movement(pose, forced_command(pose, stop, cfg), cfg);
    if (!inside_area(pose.position, cfg) || pose.energy_spent > cfg.uav_energy_max) return false;
  }
  return distance(pose.position, stop) <= kArrivalTolerance;
}

/// Precomputed per-config quantities for the movement mask.
struct MaskLimits {
  double max_slot_energy = 0.0;  // E-bar
  int time_trigger = 4;
  double energy_trigger = 0.0;   // 4 * E-bar

  explicit MaskLimits(const WorldConfig& cfg)
      : max_slot_energy(uavaoi::max_slot_energy(cfg)), energy_trigger(4.0 * max_slot_energy) {}
};

struct MovementMask {
  std::vector<MovementOption> options;
  std::optional<MovementOption> forced;
};

/// Movement options at the beginning of slot `t`. Free choice requires time
/// slack above 4 slots and energy slack above 4 E-bar; free options are grid
/// moves inside the turning window that stay in the area and from which the
/// terminal controller still lands on time within budget. Otherwise, or when
/// no grid move passes, the terminal controller's command is the only option.
inline MovementMask movement_mask(const UavPose& pose, int t, Vec2 stop, const WorldConfig& cfg,
                                  const MaskLimits& limits) {
  MovementMask mask;
  const Diffs diffs = compute_diffs(pose, t, stop, cfg);
  const bool free = diffs.time_diff > limits.time_trigger && diffs.energy_diff > limits.energy_trigger;
  if (free) {
    const bool any_heading = pose.speed <= kSpeedTolerance;
    for (int i = 0; i <= cfg.speed_levels; ++i) {
      for (int j = 0; j < cfg.heading_levels; ++j) {
        MovementOption opt{i, j, cfg.speed_level(i), cfg.heading_level(j)};
        if (!any_heading && angular_distance(pose.heading, opt.heading) > cfg.dphi_max + 1e-12) continue;
        const UavPose next = apply_movement(pose, opt, cfg);
        if (!inside_area(next.position, cfg)) continue;
        if (!forced_rollout_safe(next, t + 1, stop, cfg)) continue;
        mask.options.push_back(opt);
      }
    }
  }
  if (mask.options.empty()) {
    mask.forced = forced_command(pose, stop, cfg);
    mask.options.push_back(*mask.forced);
  }
  return mask;
}

inline MovementMask movement_mask(const UavPose& pose, int t, Vec2 stop, const WorldConfig& cfg) {
  return movement_mask(pose, t, stop, cfg, MaskLimits(cfg));
}

/// SN ids UAV at `uav_position` may schedule: in coverage with enough energy.
/// Id 0 (fly without collecting) is always present.
inline std::vector<int> schedule_mask(Vec2 uav_position, const std::vector<SensorNode>& sns, double coverage,
                                      const WorldConfig& cfg) {
  std::vector<int> ids{0};
  for (const auto& sn : sns) {
    if (distance(sn.position, uav_position) <= coverage && can_transmit(sn.battery, cfg)) ids.push_back(sn.id);
  }
  return ids;
}

inline std::vector<int> schedule_mask(Vec2 uav_position, const std::vector<SensorNode>& sns, const WorldConfig& cfg) {
  return schedule_mask(uav_position, sns, coverage_radius(cfg), cfg);
}

inline ActionMask action_mask(const WorldState& state, int m, const WorldConfig& cfg, const MaskLimits& limits,
                              double coverage) {
  const UavPose& pose = state.uavs.at(m);
  MovementMask mm = movement_mask(pose, state.t, cfg.stops.at(m), cfg, limits);
  ActionMask mask;
  mask.movements = std::move(mm.options);
  mask.forced = mm.forced;
  mask.schedulable = schedule_mask(pose.position, state.sns, coverage, cfg);
  return mask;
}

}  // namespace uavaoi
