#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uavaoi/error.hpp"
#include "uavaoi/geometry.hpp"
#include "uavaoi/rng.hpp"

namespace uavaoi {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

/// Rotary-wing propulsion constants.
struct RotorParams {
  int n_rotors = 4;                        // n_r
  double blade_drag = 0.012;               // sigma, local blade section drag coefficient
  double thrust_coeff = 0.302;             // c_T
  double air_density = 1.225;              // rho (kg/m^3)
  double disc_area = 0.0314;               // A (m^2)
  double solidity = 0.0955;                // c_s
  double fuselage_drag_ratio = 0.834;      // d_0
  double induced_correction = 0.131;       // c_f
  double flat_plate_area = 0.0151;         // S_FP (m^2), not in Table I
  double mass = 2.0;                       // W (kg)
  double gravity = 9.8;                    // g (m/s^2)
};

/// Placement of the UAV start/stop points when they are not listed explicitly.
enum class Layout {
  kFarApart,      // starts on the bottom edge, stops on the top edge
  kSamePosition,  // start == stop on a horizontal line through the area
};

/// All physical and experiment constants. Defaults reproduce the system
/// parameter table; dB quantities are kept next to their linear forms, which
/// `finalize()` derives.
struct WorldConfig {
  int num_sns = 15;     // N
  int num_uavs = 3;     // M
  int horizon = 100;    // T (slots)
  double slot_len = 0.5;      // tau0 (s)
  double area_side = 800.0;   // m
  double altitude = 100.0;    // z (m)
  double v_max = 20.0;        // m/s
  double dphi_max = std::numbers::pi / 3.0;  // rad
  double d_safe = 10.0;       // m
  double uav_energy_max = 2.4e4;   // E_max (J)
  double sn_energy_max = 5e-3;     // E_sn_max (J)
  double harvest_energy = 0.42e-3; // E_har (J)
  double harvest_prob_default = 0.9;
  std::vector<double> harvest_prob;  // lambda_n, one per SN
  double tx_power = 5e-3;      // P_c (W)
  double noise_dbm = -110.0;   // sigma^2
  double xi_th_db = 5.0;
  double beta0 = 11.95;
  double beta1 = 0.14;
  double eta_los_db = 1.6;
  double eta_nlos_db = 23.0;
  double carrier_freq = 2e9;   // f_c (Hz)
  double light_speed = 3e8;    // c (m/s)
  double path_loss_exp = 2.0;  // varsigma, not given numerically in the source model
  RotorParams rotor;
  int delta_max = 0;           // 0: use the horizon
  int initial_aoi = 1;
  double collision_penalty = -1.0;  // k_1; negative: N * delta_max
  int speed_levels = 1;        // N1
  int heading_levels = 6;      // N2
  Layout layout = Layout::kFarApart;
  std::vector<Vec2> starts;
  std::vector<Vec2> stops;
  std::vector<Vec2> sn_positions;
  std::uint64_t sn_seed = 2023;

  // Linear forms, filled by finalize().
  double noise_power = 0.0;
  double xi_th = 0.0;
  double eta_los = 0.0;
  double eta_nlos = 0.0;

  double tx_energy() const { return tx_power * slot_len; }  // E_c
  double speed_level(int i) const { return v_max * i / speed_levels; }
  double heading_level(int j) const { return kTwoPi * j / heading_levels; }

  /// Derives linear quantities, layouts and defaults, then validates.
  void finalize();
  void validate() const;
};

namespace detail {

inline std::vector<Vec2> layout_points(const WorldConfig& cfg, double y) {
  std::vector<Vec2> pts;
  const int m = cfg.num_uavs;
  const double span = cfg.area_side - 40.0;
  for (int i = 0; i < m; ++i) {
    const double x = m == 1 ? span / 2.0 : span * i / (m - 1);
    pts.push_back({x, y});
  }
  return pts;
}

}  // namespace detail

inline void WorldConfig::finalize() {
  noise_power = dbm_to_watt(noise_dbm);
  xi_th = db_to_linear(xi_th_db);
  eta_los = db_to_linear(eta_los_db);
  eta_nlos = db_to_linear(eta_nlos_db);
  if (delta_max <= 0) delta_max = horizon;
  if (collision_penalty < 0.0) collision_penalty = static_cast<double>(num_sns) * delta_max;
  if (harvest_prob.empty()) harvest_prob.assign(num_sns, harvest_prob_default);
  if (starts.empty() || stops.empty()) {
    const double top = area_side - 40.0;
    const double mid = (area_side - 40.0) / 2.0 - 20.0;
    if (layout == Layout::kFarApart) {
      if (starts.empty()) starts = detail::layout_points(*this, 0.0);
      if (stops.empty()) stops = detail::layout_points(*this, top);
    } else {
      if (starts.empty()) starts = detail::layout_points(*this, mid);
      if (stops.empty()) stops = starts;
    }
  }
  if (sn_positions.empty()) {
    Rng rng(sn_seed, Rng::hash("sn-layout"));
    for (int n = 0; n < num_sns; ++n) {
      const double x = rng.uniform(0.0, area_side);
      const double y = rng.uniform(0.0, area_side);
      sn_positions.push_back({x, y});
    }
  }
  validate();
}

inline void WorldConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::kConfig, what);
  };
  require(num_sns >= 1, "N must be >= 1");
  require(num_uavs >= 1, "M must be >= 1");
  require(horizon >= 2, "T must be >= 2");
  require(slot_len > 0 && area_side > 0 && altitude > 0 && v_max > 0, "non-positive physical constant");
  require(dphi_max > 0 && d_safe > 0 && uav_energy_max > 0 && sn_energy_max > 0, "non-positive physical constant");
  require(harvest_energy >= 0 && tx_power > 0, "non-positive energy constant");
  require(carrier_freq > 0 && light_speed > 0 && path_loss_exp > 0, "non-positive channel constant");
  require(beta0 > 0 && beta1 > 0, "beta0/beta1 must be positive");
  require(eta_nlos > eta_los && eta_los > 1.0, "need eta_NLoS > eta_LoS > 1");
  require(xi_th > 0, "xi_th must be positive");
  require(delta_max >= 1 && initial_aoi >= 1 && initial_aoi <= delta_max, "bad AoI bounds");
  require(collision_penalty >= 0, "k1 must be non-negative");
  require(speed_levels >= 1 && heading_levels >= 1, "N1, N2 must be >= 1");
  require(static_cast<int>(harvest_prob.size()) == num_sns, "lambda must have N entries");
  for (double p : harvest_prob) require(p >= 0.0 && p <= 1.0, "lambda_n must lie in [0,1]");
  require(static_cast<int>(starts.size()) == num_uavs && static_cast<int>(stops.size()) == num_uavs,
          "need one start and one stop per UAV");
  require(static_cast<int>(sn_positions.size()) == num_sns, "need one position per SN");
  auto inside = [&](Vec2 p) { return p.x >= 0 && p.y >= 0 && p.x <= area_side && p.y <= area_side; };
  for (const auto& p : starts) require(inside(p), "start position outside area");
  for (const auto& p : stops) require(inside(p), "stop position outside area");
  for (const auto& p : sn_positions) require(inside(p), "SN position outside area");
  require(rotor.n_rotors >= 1 && rotor.mass > 0 && rotor.gravity > 0 && rotor.air_density > 0 &&
              rotor.disc_area > 0 && rotor.thrust_coeff > 0 && rotor.solidity > 0,
          "bad rotor parameters");
}

/// Desk-scale profile used by the campaigns: N=10, M=2, T=60, start == stop.
inline WorldConfig desk_profile() {
  WorldConfig cfg;
  cfg.num_sns = 10;
  cfg.num_uavs = 2;
  cfg.horizon = 60;
  cfg.layout = Layout::kSamePosition;
  cfg.finalize();
  return cfg;
}

/// System parameter table defaults (N=15, M=3, T=100, far-apart layout).
inline WorldConfig default_config() {
  WorldConfig cfg;
  cfg.finalize();
  return cfg;
}

// JSON ingestion. Keys mirror the symbols of the system parameter table.

inline void to_json(nlohmann::json& j, const Vec2& v) { j = nlohmann::json::array({v.x, v.y}); }
inline void from_json(const nlohmann::json& j, Vec2& v) {
  v.x = j.at(0).get<double>();
  v.y = j.at(1).get<double>();
}

inline nlohmann::json to_json(const WorldConfig& c) {
  nlohmann::json j;
  j["N"] = c.num_sns;
  j["M"] = c.num_uavs;
  j["T"] = c.horizon;
  j["tau0"] = c.slot_len;
  j["area_side"] = c.area_side;
  j["z"] = c.altitude;
  j["v_max"] = c.v_max;
  j["dphi_max"] = c.dphi_max;
  j["d_safe"] = c.d_safe;
  j["E_max"] = c.uav_energy_max;
  j["E_sn_max"] = c.sn_energy_max;
  j["E_har"] = c.harvest_energy;
  j["lambda"] = c.harvest_prob;
  j["P_c"] = c.tx_power;
  j["sigma2_dBm"] = c.noise_dbm;
  j["xi_th_dB"] = c.xi_th_db;
  j["beta0"] = c.beta0;
  j["beta1"] = c.beta1;
  j["eta_LoS_dB"] = c.eta_los_db;
  j["eta_NLoS_dB"] = c.eta_nlos_db;
  j["f_c"] = c.carrier_freq;
  j["c"] = c.light_speed;
  j["varsigma"] = c.path_loss_exp;
  j["rotor"] = {{"n_r", c.rotor.n_rotors},        {"sigma", c.rotor.blade_drag},
                {"c_T", c.rotor.thrust_coeff},    {"rho", c.rotor.air_density},
                {"A", c.rotor.disc_area},         {"c_s", c.rotor.solidity},
                {"d_0", c.rotor.fuselage_drag_ratio}, {"c_f", c.rotor.induced_correction},
                {"S_FP", c.rotor.flat_plate_area}, {"W", c.rotor.mass},
                {"g", c.rotor.gravity}};
  j["delta_max"] = c.delta_max;
  j["initial_aoi"] = c.initial_aoi;
  j["k1"] = c.collision_penalty;
  j["N1"] = c.speed_levels;
  j["N2"] = c.heading_levels;
  j["layout"] = c.layout == Layout::kFarApart ? "far" : "same";
  j["starts"] = c.starts;
  j["stops"] = c.stops;
  j["sn_positions"] = c.sn_positions;
  j["sn_seed"] = c.sn_seed;
  return j;
}

/// Reads a (possibly partial) JSON config over `base`, then finalizes.
/// Derived quantities (layout points, SN positions, per-SN lambda) are only
/// regenerated when the corresponding key is absent and the shape changed.
inline WorldConfig config_from_json(const nlohmann::json& j, WorldConfig base = {}) {
  WorldConfig c = base;
  const int old_n = c.num_sns;
  const int old_m = c.num_uavs;
  const int old_t = c.horizon;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("N", c.num_sns);
    get("M", c.num_uavs);
    get("T", c.horizon);
    get("tau0", c.slot_len);
    get("area_side", c.area_side);
    get("z", c.altitude);
    get("v_max", c.v_max);
    get("dphi_max", c.dphi_max);
    get("d_safe", c.d_safe);
    get("E_max", c.uav_energy_max);
    get("E_sn_max", c.sn_energy_max);
    get("E_har", c.harvest_energy);
    get("P_c", c.tx_power);
    get("sigma2_dBm", c.noise_dbm);
    get("xi_th_dB", c.xi_th_db);
    get("beta0", c.beta0);
    get("beta1", c.beta1);
    get("eta_LoS_dB", c.eta_los_db);
    get("eta_NLoS_dB", c.eta_nlos_db);
    get("f_c", c.carrier_freq);
    get("c", c.light_speed);
    get("varsigma", c.path_loss_exp);
    get("initial_aoi", c.initial_aoi);
    get("N1", c.speed_levels);
    get("N2", c.heading_levels);
    get("sn_seed", c.sn_seed);
    if (j.contains("rotor")) {
      const auto& r = j.at("rotor");
      auto rget = [&](const char* key, auto& field) {
        if (r.contains(key)) field = r.at(key).get<std::remove_reference_t<decltype(field)>>();
      };
      rget("n_r", c.rotor.n_rotors);
      rget("sigma", c.rotor.blade_drag);
      rget("c_T", c.rotor.thrust_coeff);
      rget("rho", c.rotor.air_density);
      rget("A", c.rotor.disc_area);
      rget("c_s", c.rotor.solidity);
      rget("d_0", c.rotor.fuselage_drag_ratio);
      rget("c_f", c.rotor.induced_correction);
      rget("S_FP", c.rotor.flat_plate_area);
      rget("W", c.rotor.mass);
      rget("g", c.rotor.gravity);
    }
    const bool shape_changed = c.num_sns != old_n || c.num_uavs != old_m || c.horizon != old_t;
    if (j.contains("delta_max")) {
      c.delta_max = j.at("delta_max").get<int>();
    } else if (shape_changed) {
      c.delta_max = 0;
    }
    if (j.contains("k1")) {
      c.collision_penalty = j.at("k1").get<double>();
    } else if (shape_changed) {
      c.collision_penalty = -1.0;
    }
    if (j.contains("lambda")) {
      const auto& l = j.at("lambda");
      if (l.is_array()) {
        c.harvest_prob = l.get<std::vector<double>>();
      } else {
        c.harvest_prob_default = l.get<double>();
        c.harvest_prob.clear();
      }
    } else if (c.num_sns != old_n) {
      c.harvest_prob.clear();
    }
    if (j.contains("layout")) {
      const auto s = j.at("layout").get<std::string>();
      if (s == "far") {
        c.layout = Layout::kFarApart;
      } else if (s == "same") {
        c.layout = Layout::kSamePosition;
      } else {
        fail(ErrorCode::kConfig, "layout must be 'far' or 'same'");
      }
      if (!j.contains("starts")) c.starts.clear();
      if (!j.contains("stops")) c.stops.clear();
    }
    if (c.num_uavs != old_m) {
      c.starts.clear();
      c.stops.clear();
    }
    if (j.contains("starts")) c.starts = j.at("starts").get<std::vector<Vec2>>();
    if (j.contains("stops")) c.stops = j.at("stops").get<std::vector<Vec2>>();
    if (j.contains("sn_positions")) {
      c.sn_positions = j.at("sn_positions").get<std::vector<Vec2>>();
    } else if (c.num_sns != old_n || j.contains("sn_seed")) {
      c.sn_positions.clear();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  c.finalize();
  return c;
}

inline WorldConfig load_config(const std::string& path, WorldConfig base = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  return config_from_json(j, base);
}

/// Stable 64-bit hash of the canonical JSON form of a config.
inline std::uint64_t config_hash(const WorldConfig& cfg) { return Rng::hash(to_json(cfg).dump()); }

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace uavaoi
