#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "uavaoi/config.hpp"
#include "uavaoi/error.hpp"
#include "uavaoi/geometry.hpp"
#include "uavaoi/rng.hpp"

namespace uavaoi {

// ---------------------------------------------------------------------------
// Air-to-ground channel

/// Coverage radius R_U from the NLoS link budget with unit antenna gains.
inline double coverage_radius(const WorldConfig& cfg) {
  const double budget = cfg.tx_power / (cfg.xi_th * cfg.noise_power * cfg.eta_nlos);
  const double d = cfg.light_speed / (4.0 * std::numbers::pi * cfg.carrier_freq) *
                   std::pow(budget, 1.0 / cfg.path_loss_exp);
  if (!(d >= cfg.altitude)) {
    fail(ErrorCode::kAltitudeExceedsRange, "link range " + std::to_string(d) + " m below altitude");
  }
  return std::sqrt(d * d - cfg.altitude * cfg.altitude);
}

/// Probability of a line-of-sight link at 3D distance `d` for altitude `z`.
inline double los_probability(double d, double z, const WorldConfig& cfg) {
  if (!(z > 0.0) || !(d >= z)) fail(ErrorCode::kBadGeometry, "need d >= z > 0");
  const double elevation_deg = 180.0 / std::numbers::pi * std::asin(z / d);
  return 1.0 / (1.0 + cfg.beta0 * std::exp(-cfg.beta1 * (elevation_deg - cfg.beta0)));
}

/// Path loss without the excess coefficient: (4 pi f_c d / c)^varsigma.
inline double free_space_loss(double d, const WorldConfig& cfg) {
  return std::pow(4.0 * std::numbers::pi * cfg.carrier_freq * d / cfg.light_speed, cfg.path_loss_exp);
}

struct PathLossSample {
  double path_loss = 0.0;  // linear
  bool los = false;
};

/// Draws the link state (exactly one uniform from `rng`) and returns the
/// resulting linear path loss.
inline PathLossSample sample_path_loss(double d, const WorldConfig& cfg, Rng& rng) {
  if (!(d > 0.0)) fail(ErrorCode::kBadGeometry, "distance must be positive");
  const double p = los_probability(d, cfg.altitude, cfg);
  const bool los = rng.uniform() < p;
  return {free_space_loss(d, cfg) * (los ? cfg.eta_los : cfg.eta_nlos), los};
}

/// Distance between SN `sn` on the ground and a UAV flying over `uav`.
inline double link_distance(Vec2 sn, Vec2 uav, const WorldConfig& cfg) {
  return std::hypot(distance(sn, uav), cfg.altitude);
}

/// Sampled channel gains gamma_{n,m}; entries that were not drawn are NaN.
/// SN ids are 1-based as in the scheduling vector (0 = nothing scheduled).
class ChannelGains {
 public:
  ChannelGains(int num_sns, int num_uavs)
      : num_uavs_(num_uavs),
        gains_(static_cast<std::size_t>(num_sns + 1) * num_uavs, std::numeric_limits<double>::quiet_NaN()) {}

  void set(int sn, int uav, double gain) { gains_[index(sn, uav)] = gain; }
  double get(int sn, int uav) const { return gains_[index(sn, uav)]; }
  bool has(int sn, int uav) const { return !std::isnan(get(sn, uav)); }

 private:
  std::size_t index(int sn, int uav) const { return static_cast<std::size_t>(sn) * num_uavs_ + uav; }
  int num_uavs_;
  std::vector<double> gains_;
};

/// SINR at UAV `m` for its scheduled SN. Interferers are the distinct SNs
/// scheduled by the other UAVs, excluding m's own SN. Antenna gains are 0 dB.
inline double sinr(int m, const std::vector<int>& schedules, const ChannelGains& gains, const WorldConfig& cfg) {
  const int own = schedules.at(m);
  if (own == 0) fail(ErrorCode::kNoScheduledSn, "UAV " + std::to_string(m) + " schedules no SN");
  if (!gains.has(own, m)) fail(ErrorCode::kDimensionMismatch, "missing gain for the scheduled link");
  std::vector<int> interferers;
  for (int other = 0; other < static_cast<int>(schedules.size()); ++other) {
    const int n = schedules[other];
    if (other == m || n == 0 || n == own) continue;
    bool seen = false;
    for (int k : interferers) seen = seen || k == n;
    if (!seen) interferers.push_back(n);
  }
  double interference = 0.0;
  for (int n : interferers) {
    if (!gains.has(n, m)) fail(ErrorCode::kDimensionMismatch, "missing gain for an interfering link");
    interference += cfg.tx_power * gains.get(n, m);
  }
  return cfg.tx_power * gains.get(own, m) / (cfg.noise_power + interference);
}

// ---------------------------------------------------------------------------
// Rotary-wing propulsion

/// Thrust of each rotor for a slot that starts at speed `v` and ends at
/// `v_next`, with the acceleration taken along the flight direction.
inline double rotor_thrust(double v, double v_next, const WorldConfig& cfg) {
  const auto& r = cfg.rotor;
  const double accel = (v_next - v) / cfg.slot_len;
  const double along = r.mass * accel + 0.5 * r.air_density * v * v * r.flat_plate_area;
  const double weight = r.mass * r.gravity;
  return std::sqrt(along * along + weight * weight) / r.n_rotors;
}

/// Propulsion energy (J) spent in one slot, evaluated term by term as the
/// blade-profile, parasite and induced contributions.
inline double propulsion_energy(double v, double v_next, const WorldConfig& cfg) {
  const auto& r = cfg.rotor;
  const double thrust = rotor_thrust(v, v_next, cfg);
  const double v2 = v * v;
  const double profile = r.blade_drag / 8.0 * (thrust / (r.thrust_coeff * r.air_density * r.disc_area) + 3.0 * v2) *
                         std::sqrt(thrust * r.air_density * r.solidity * r.solidity * r.disc_area / r.thrust_coeff);
  const double parasite = 0.5 * r.fuselage_drag_ratio * r.air_density * r.solidity * r.disc_area * v2 * v;
  const double rho_a = r.air_density * r.disc_area;
  const double inner = std::sqrt(thrust * thrust / (4.0 * rho_a * rho_a) + v2 * v2 / 4.0) - v2 / 2.0;
  const double induced = (1.0 + r.induced_correction) * thrust * std::sqrt(std::fmax(inner, 0.0));
  return cfg.slot_len * r.n_rotors * (profile + parasite + induced);
}

// ---------------------------------------------------------------------------
// Sensor batteries and AoI

/// Whether a battery holds the transmit energy E_c. The comparison carries a
/// relative slack of 1e-12 so that sums of harvested quanta that equal E_c
/// up to rounding count as sufficient; the scheduling mask and the battery
/// update use this same predicate.
inline bool can_transmit(double battery, const WorldConfig& cfg) {
  return battery >= cfg.tx_energy() * (1.0 - 1e-12);
}

inline double battery_step(double battery, bool harvested, bool transmitted, const WorldConfig& cfg) {
  if (transmitted && !can_transmit(battery, cfg)) {
    fail(ErrorCode::kEnergyCausalityViolation, "SN scheduled with battery " + std::to_string(battery) + " J");
  }
  double next = battery + (harvested ? cfg.harvest_energy : 0.0) - (transmitted ? cfg.tx_energy() : 0.0);
  next = std::fmin(next, cfg.sn_energy_max);
  return std::fmax(next, 0.0);
}

inline int aoi_step(int aoi, bool delivered, const WorldConfig& cfg) {
  if (delivered) return 1;
  return std::min(aoi + 1, cfg.delta_max);
}

// ---------------------------------------------------------------------------
// Kinematics

/// Displacement of one slot: mean speed times slot length along `heading`.
inline Vec2 displace(Vec2 u, double v, double v_next, double heading, const WorldConfig& cfg) {
  const double step = 0.5 * (v + v_next) * cfg.slot_len;
  return {u.x + step * std::cos(heading), u.y + step * std::sin(heading)};
}

inline constexpr double kAreaTolerance = 1e-9;

inline bool inside_area(Vec2 u, const WorldConfig& cfg) {
  return u.x >= -kAreaTolerance && u.y >= -kAreaTolerance && u.x <= cfg.area_side + kAreaTolerance &&
         u.y <= cfg.area_side + kAreaTolerance;
}

inline Vec2 advance_position(Vec2 u, double v, double v_next, double heading, const WorldConfig& cfg) {
  const Vec2 next = displace(u, v, v_next, heading, cfg);
  if (!inside_area(next, cfg)) {
    fail(ErrorCode::kOutOfArea, "move to (" + std::to_string(next.x) + ", " + std::to_string(next.y) + ")");
  }
  return next;
}

/// All UAV pairs (i < j) closer than the safe distance.
inline std::vector<std::pair<int, int>> check_collisions(const std::vector<Vec2>& positions, const WorldConfig& cfg) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < static_cast<int>(positions.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(positions.size()); ++j) {
      if (distance(positions[i], positions[j]) < cfg.d_safe) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

}  // namespace uavaoi
