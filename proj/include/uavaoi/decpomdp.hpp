#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uavaoi/config.hpp"
#include "uavaoi/error.hpp"
#include "uavaoi/feasibility.hpp"
#include "uavaoi/physics.hpp"
#include "uavaoi/rng.hpp"
#include "uavaoi/state.hpp"
#include "uavaoi/world.hpp"

namespace uavaoi {

// ---------------------------------------------------------------------------
// Observations

inline constexpr double kSentinel = -1.0;

/// Local view of one UAV. SN entries outside its coverage disk hold -1.
struct Observation {
  int uav = 0;
  Vec2 position;
  double speed = 0.0;
  double heading = 0.0;
  std::vector<int> aoi;
  std::vector<double> battery;
  int time_diff = 0;
  double energy_diff = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

inline Observation observe(const WorldState& s, int m, const WorldConfig& cfg, double coverage) {
  const UavPose& p = s.uavs.at(m);
  Observation o;
  o.uav = m;
  o.position = p.position;
  o.speed = p.speed;
  o.heading = p.heading;
  o.time_diff = p.time_diff;
  o.energy_diff = p.energy_diff;
  o.aoi.assign(cfg.num_sns, -1);
  o.battery.assign(cfg.num_sns, kSentinel);
  for (const auto& sn : s.sns) {
    if (distance(sn.position, p.position) <= coverage) {
      o.aoi[sn.id - 1] = sn.aoi;
      o.battery[sn.id - 1] = sn.battery;
    }
  }
  return o;
}

inline Observation observe(const WorldState& s, int m, const WorldConfig& cfg) {
  return observe(s, m, cfg, coverage_radius(cfg));
}

namespace detail {

inline double norm_aoi(int aoi, const WorldConfig& cfg) {
  return cfg.delta_max > 1 ? static_cast<double>(aoi - 1) / (cfg.delta_max - 1) : 0.0;
}

}  // namespace detail

/// Feature width of one observation: own pose (4), AoI and battery per SN,
/// both differences, and the agent one-hot.
inline int observation_dim(const WorldConfig& cfg) { return 6 + 2 * cfg.num_sns + cfg.num_uavs; }

/// Normalized observation features, SN entries in [0, 1] or -1.
template <typename Scalar = float>
std::vector<Scalar> observation_features(const Observation& o, const WorldConfig& cfg) {
  std::vector<Scalar> f;
  f.reserve(observation_dim(cfg));
  f.push_back(static_cast<Scalar>(o.position.x / cfg.area_side));
  f.push_back(static_cast<Scalar>(o.position.y / cfg.area_side));
  f.push_back(static_cast<Scalar>(o.speed / cfg.v_max));
  f.push_back(static_cast<Scalar>(o.heading / kTwoPi));
  for (int a : o.aoi) f.push_back(static_cast<Scalar>(a < 0 ? kSentinel : detail::norm_aoi(a, cfg)));
  for (double b : o.battery) f.push_back(static_cast<Scalar>(b < 0 ? kSentinel : b / cfg.sn_energy_max));
  f.push_back(static_cast<Scalar>(static_cast<double>(o.time_diff) / cfg.horizon));
  f.push_back(static_cast<Scalar>(o.energy_diff / cfg.uav_energy_max));
  for (int m = 0; m < cfg.num_uavs; ++m) f.push_back(static_cast<Scalar>(m == o.uav ? 1.0 : 0.0));
  return f;
}

inline int state_dim(const WorldConfig& cfg) { return 6 * cfg.num_uavs + 2 * cfg.num_sns + 1; }

/// Global state features for the mixer.
template <typename Scalar = float>
std::vector<Scalar> state_features(const WorldState& s, const WorldConfig& cfg) {
  std::vector<Scalar> f;
  f.reserve(state_dim(cfg));
  for (const auto& p : s.uavs) {
    f.push_back(static_cast<Scalar>(p.position.x / cfg.area_side));
    f.push_back(static_cast<Scalar>(p.position.y / cfg.area_side));
    f.push_back(static_cast<Scalar>(p.speed / cfg.v_max));
    f.push_back(static_cast<Scalar>(p.heading / kTwoPi));
    f.push_back(static_cast<Scalar>(static_cast<double>(p.time_diff) / cfg.horizon));
    f.push_back(static_cast<Scalar>(p.energy_diff / cfg.uav_energy_max));
  }
  for (const auto& sn : s.sns) f.push_back(static_cast<Scalar>(detail::norm_aoi(sn.aoi, cfg)));
  for (const auto& sn : s.sns) f.push_back(static_cast<Scalar>(sn.battery / cfg.sn_energy_max));
  f.push_back(static_cast<Scalar>(static_cast<double>(s.t - 1) / cfg.horizon));
  return f;
}

// ---------------------------------------------------------------------------
// Actions

struct AgentAction {
  int speed_idx = 0;
  int heading_idx = 0;
  int schedule = 0;

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

/// Flat index = (speed_idx * N2 + heading_idx) * (N + 1) + schedule.
class ActionCodec {
 public:
  explicit ActionCodec(const WorldConfig& cfg)
      : speeds_(cfg.speed_levels + 1), headings_(cfg.heading_levels), schedules_(cfg.num_sns + 1) {}

  int size() const { return speeds_ * headings_ * schedules_; }
  int num_movements() const { return speeds_ * headings_; }
  int num_schedules() const { return schedules_; }

  int encode(const AgentAction& a) const {
    if (a.speed_idx < 0 || a.speed_idx >= speeds_ || a.heading_idx < 0 || a.heading_idx >= headings_ ||
        a.schedule < 0 || a.schedule >= schedules_) {
      fail(ErrorCode::kDimensionMismatch, "action component out of range");
    }
    return (a.speed_idx * headings_ + a.heading_idx) * schedules_ + a.schedule;
  }

  AgentAction decode(int flat) const {
    if (flat < 0 || flat >= size()) fail(ErrorCode::kDimensionMismatch, "flat action out of range");
    AgentAction a;
    a.schedule = flat % schedules_;
    const int move = flat / schedules_;
    a.heading_idx = move % headings_;
    a.speed_idx = move / headings_;
    return a;
  }

 private:
  int speeds_;
  int headings_;
  int schedules_;
};

/// Availability of every flat action under `mask` (1 = allowed).
inline std::vector<std::uint8_t> flat_mask(const ActionMask& mask, const ActionCodec& codec) {
  std::vector<std::uint8_t> allowed(codec.size(), 0);
  for (const auto& mv : mask.movements) {
    for (int sn : mask.schedulable) allowed[codec.encode({mv.speed_idx, mv.heading_idx, sn})] = 1;
  }
  return allowed;
}

inline std::vector<int> allowed_actions(const ActionMask& mask, const ActionCodec& codec) {
  std::vector<int> ids;
  for (const auto& mv : mask.movements) {
    for (int sn : mask.schedulable) ids.push_back(codec.encode({mv.speed_idx, mv.heading_idx, sn}));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// Cost and episodes

inline double aoi_sum(const WorldState& s) {
  double total = 0.0;
  for (const auto& sn : s.sns) total += sn.aoi;
  return total;
}

inline double cost(const WorldState& after, bool collision, const WorldConfig& cfg) {
  return aoi_sum(after) + (collision ? cfg.collision_penalty : 0.0);
}

enum class TerminalReason { kNone, kCollision, kHorizon };

inline std::string to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::kCollision: return "collision";
    case TerminalReason::kHorizon: return "horizon";
    case TerminalReason::kNone: break;
  }
  return "none";
}

inline TerminalReason terminal_reason_from_string(const std::string& s) {
  if (s == "collision") return TerminalReason::kCollision;
  if (s == "horizon") return TerminalReason::kHorizon;
  return TerminalReason::kNone;
}

/// How the environment treats actions outside the mask.
///  kEnforce: MaskViolation.
///  kProject: the movement snaps to the closest allowed option and an
///            unavailable schedule becomes 0 (the "without mask" learner).
enum class MaskMode { kEnforce, kProject };

struct EnvOptions {
  MaskMode mask_mode = MaskMode::kEnforce;
  bool terminate_on_collision = true;
};

struct Transition {
  WorldState state;
  std::vector<Observation> observations;
  std::vector<ActionMask> masks;
  std::vector<int> actions;   // as chosen by the agents
  std::vector<int> executed;  // after projection (equal to actions under kEnforce)
  std::vector<TransmissionOutcome> outcomes;
  double cost = 0.0;
  double aoi_sum = 0.0;  // of the state after the slot
  bool collision = false;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  std::vector<Transition> steps;
  WorldState final_state;
  TerminalReason reason = TerminalReason::kNone;

  double total_cost() const {
    double c = 0.0;
    for (const auto& s : steps) c += s.cost;
    return c;
  }
  int collisions() const {
    int n = 0;
    for (const auto& s : steps) n += s.collision ? 1 : 0;
    return n;
  }
};

struct StepInfo {
  double cost = 0.0;
  double aoi_sum = 0.0;
  bool collision = false;
  bool done = false;
  TerminalReason reason = TerminalReason::kNone;
  std::vector<int> executed;
  std::vector<TransmissionOutcome> outcomes;
};

/// Episodic wrapper around the world: keeps the current state and the masks
/// that the agents must respect in it.
class Environment {
 public:
  explicit Environment(WorldConfig cfg, EnvOptions opt = {})
      : cfg_(std::move(cfg)), opt_(opt), limits_(cfg_), coverage_(coverage_radius(cfg_)), codec_(cfg_) {
    const WorldState s0 = initial_state(cfg_);
    for (int m = 0; m < cfg_.num_uavs; ++m) {
      if (!forced_rollout_safe(s0.uavs[m], 1, cfg_.stops[m], cfg_)) {
        fail(ErrorCode::kConfig, "UAV " + std::to_string(m) + " cannot reach its stop within T slots and E_max");
      }
    }
    reset(Rng());
  }

  const WorldConfig& config() const { return cfg_; }
  const EnvOptions& options() const { return opt_; }
  const ActionCodec& codec() const { return codec_; }
  const MaskLimits& limits() const { return limits_; }
  double coverage() const { return coverage_; }

  void reset(Rng rng) {
    rng_ = rng;
    state_ = initial_state(cfg_, rng.key());
    done_ = false;
    reason_ = TerminalReason::kNone;
    refresh_masks();
  }

  const WorldState& state() const { return state_; }
  const std::vector<ActionMask>& masks() const { return masks_; }
  bool done() const { return done_; }
  TerminalReason reason() const { return reason_; }
  const Rng& rng() const { return rng_; }

  Observation observation(int m) const { return observe(state_, m, cfg_, coverage_); }
  std::vector<Observation> observations() const {
    std::vector<Observation> obs;
    for (int m = 0; m < cfg_.num_uavs; ++m) obs.push_back(observation(m));
    return obs;
  }

  /// Turns agent m's flat action into a world command, enforcing or
  /// projecting onto the mask.
  UavCommand command(int m, int flat, int* executed = nullptr) const {
    const ActionMask& mask = masks_.at(m);
    AgentAction a = codec_.decode(flat);
    const MovementOption* mv = find_movement(mask, a.speed_idx, a.heading_idx);
    const bool schedule_ok = mask.allows_schedule(a.schedule);
    if (!mv || !schedule_ok) {
      if (opt_.mask_mode == MaskMode::kEnforce) {
        fail(ErrorCode::kMaskViolation, "UAV " + std::to_string(m) + " chose unavailable action " +
                                            std::to_string(flat) + " at slot " + std::to_string(state_.t));
      }
      if (!mv) mv = &closest_movement(mask, a, state_.uavs[m].heading);
      if (!schedule_ok) a.schedule = 0;
    }
    if (executed) *executed = codec_.encode({mv->speed_idx, mv->heading_idx, a.schedule});
    return {*mv, a.schedule};
  }

  StepInfo step(const std::vector<int>& actions) {
    if (done_) fail(ErrorCode::kEpisodeOver, "step after the episode ended");
    if (static_cast<int>(actions.size()) != cfg_.num_uavs) fail(ErrorCode::kDimensionMismatch, "need one action per UAV");
    StepInfo info;
    std::vector<UavCommand> cmds;
    info.executed.resize(cfg_.num_uavs);
    for (int m = 0; m < cfg_.num_uavs; ++m) cmds.push_back(command(m, actions[m], &info.executed[m]));

    StepResult r = world_step(state_, cmds, cfg_, rng_);
    state_ = std::move(r.state);
    info.outcomes = std::move(r.outcomes);
    info.collision = r.collision;
    info.aoi_sum = aoi_sum(state_);
    info.cost = cost(state_, r.collision, cfg_);

    if (r.collision && opt_.terminate_on_collision) {
      done_ = true;
      reason_ = TerminalReason::kCollision;
    } else if (state_.t > cfg_.horizon) {
      done_ = true;
      reason_ = TerminalReason::kHorizon;
      for (int m = 0; m < cfg_.num_uavs; ++m) {
        if (distance(state_.uavs[m].position, cfg_.stops[m]) > kArrivalTolerance) {
          fail(ErrorCode::kMaskViolation, "UAV " + std::to_string(m) + " ended away from its stop");
        }
      }
    }
    info.done = done_;
    info.reason = reason_;
    if (!done_) refresh_masks();
    return info;
  }

 private:
  static const MovementOption* find_movement(const ActionMask& mask, int speed_idx, int heading_idx) {
    for (const auto& o : mask.movements) {
      if (o.speed_idx == speed_idx && o.heading_idx == heading_idx) return &o;
    }
    return nullptr;
  }

  const MovementOption& closest_movement(const ActionMask& mask, const AgentAction& a, double current_heading) const {
    if (mask.forced) return mask.movements.front();
    const double want = cfg_.heading_level(a.heading_idx);
    const MovementOption* best = &mask.movements.front();
    double best_key = std::numeric_limits<double>::infinity();
    for (const auto& o : mask.movements) {
      // heading error first, speed level difference as the tie-breaker
      const double key = angular_distance(want, o.heading) * 1e3 + std::abs(o.speed_idx - a.speed_idx);
      if (key < best_key - 1e-12) {
        best_key = key;
        best = &o;
      }
    }
    (void)current_heading;
    return *best;
  }

  void refresh_masks() {
    masks_.clear();
    for (int m = 0; m < cfg_.num_uavs; ++m) masks_.push_back(action_mask(state_, m, cfg_, limits_, coverage_));
  }

  WorldConfig cfg_;
  EnvOptions opt_;
  MaskLimits limits_;
  double coverage_;
  ActionCodec codec_;
  Rng rng_;
  WorldState state_;
  std::vector<ActionMask> masks_;
  bool done_ = false;
  TerminalReason reason_ = TerminalReason::kNone;
};

/// Runs one episode. `policy(env, observations, masks)` returns the joint
/// flat action; `on_step` (optional) sees each finished transition.
template <typename Policy>
EpisodeRecord run_episode(Environment& env, Rng rng, Policy&& policy, std::uint64_t seed = 0,
                          std::uint64_t episode = 0) {
  env.reset(rng);
  EpisodeRecord rec;
  rec.seed = seed;
  rec.episode = episode;
  while (!env.done()) {
    Transition tr;
    tr.state = env.state();
    tr.observations = env.observations();
    tr.masks = env.masks();
    tr.actions = policy(env, tr.observations, tr.masks);
    StepInfo info = env.step(tr.actions);
    tr.executed = std::move(info.executed);
    tr.outcomes = std::move(info.outcomes);
    tr.cost = info.cost;
    tr.aoi_sum = info.aoi_sum;
    tr.collision = info.collision;
    rec.steps.push_back(std::move(tr));
  }
  rec.final_state = env.state();
  rec.reason = env.reason();
  return rec;
}

/// Uniformly random masked policy.
struct RandomPolicy {
  Rng rng;
  std::vector<int> operator()(const Environment& env, const std::vector<Observation>&,
                              const std::vector<ActionMask>& masks) {
    std::vector<int> out;
    for (const auto& mask : masks) {
      const auto ids = allowed_actions(mask, env.codec());
      out.push_back(ids[rng.uniform_int(ids.size())]);
    }
    return out;
  }
};

/// Time-average total AoI of one episode, over the slots it executed.
inline double episode_average_aoi(const EpisodeRecord& rec) {
  if (rec.steps.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : rec.steps) total += s.aoi_sum;
  return total / static_cast<double>(rec.steps.size());
}

/// Mean over episodes of the time-average total AoI.
inline double objective(const std::vector<EpisodeRecord>& episodes) {
  if (episodes.empty()) fail(ErrorCode::kDimensionMismatch, "objective needs at least one episode");
  double total = 0.0;
  for (const auto& e : episodes) total += episode_average_aoi(e);
  return total / static_cast<double>(episodes.size());
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const SensorNode& s) {
  j = {{"id", s.id}, {"pos", s.position}, {"E", s.battery}, {"aoi", s.aoi}, {"lambda", s.harvest_prob}};
}
inline void from_json(const nlohmann::json& j, SensorNode& s) {
  s.id = j.at("id");
  s.position = j.at("pos").get<Vec2>();
  s.battery = j.at("E");
  s.aoi = j.at("aoi");
  s.harvest_prob = j.at("lambda");
}
inline void to_json(nlohmann::json& j, const UavPose& p) {
  j = {{"pos", p.position}, {"v", p.speed},          {"heading", p.heading}, {"spent", p.energy_spent},
       {"td", p.time_diff}, {"ed", p.energy_diff}};
}
inline void from_json(const nlohmann::json& j, UavPose& p) {
  p.position = j.at("pos").get<Vec2>();
  p.speed = j.at("v");
  p.heading = j.at("heading");
  p.energy_spent = j.at("spent");
  p.time_diff = j.at("td");
  p.energy_diff = j.at("ed");
}
inline void to_json(nlohmann::json& j, const WorldState& s) {
  j = {{"t", s.t}, {"sns", s.sns}, {"uavs", s.uavs}, {"rng", s.rng_stream}};
}
inline void from_json(const nlohmann::json& j, WorldState& s) {
  s.t = j.at("t");
  s.sns = j.at("sns").get<std::vector<SensorNode>>();
  s.uavs = j.at("uavs").get<std::vector<UavPose>>();
  s.rng_stream = j.at("rng");
}
inline void to_json(nlohmann::json& j, const MovementOption& o) {
  j = nlohmann::json::array({o.speed_idx, o.heading_idx, o.speed, o.heading});
}
inline void from_json(const nlohmann::json& j, MovementOption& o) {
  o.speed_idx = j.at(0);
  o.heading_idx = j.at(1);
  o.speed = j.at(2);
  o.heading = j.at(3);
}
inline void to_json(nlohmann::json& j, const ActionMask& m) {
  j = {{"moves", m.movements}, {"sched", m.schedulable}, {"forced", m.forced.has_value()}};
}
inline void from_json(const nlohmann::json& j, ActionMask& m) {
  m.movements = j.at("moves").get<std::vector<MovementOption>>();
  m.schedulable = j.at("sched").get<std::vector<int>>();
  m.forced.reset();
  if (j.at("forced").get<bool>()) m.forced = m.movements.at(0);
}
inline void to_json(nlohmann::json& j, const Observation& o) {
  j = {{"uav", o.uav},   {"pos", o.position}, {"v", o.speed},     {"heading", o.heading},
       {"aoi", o.aoi},   {"E", o.battery},    {"td", o.time_diff}, {"ed", o.energy_diff}};
}
inline void from_json(const nlohmann::json& j, Observation& o) {
  o.uav = j.at("uav");
  o.position = j.at("pos").get<Vec2>();
  o.speed = j.at("v");
  o.heading = j.at("heading");
  o.aoi = j.at("aoi").get<std::vector<int>>();
  o.battery = j.at("E").get<std::vector<double>>();
  o.time_diff = j.at("td");
  o.energy_diff = j.at("ed");
}
inline void to_json(nlohmann::json& j, const TransmissionOutcome& o) {
  j = {{"uav", o.uav}, {"sn", o.sn}, {"los", o.los_drawn}, {"sinr", o.sinr}, {"ok", o.success}};
}
inline void from_json(const nlohmann::json& j, TransmissionOutcome& o) {
  o.uav = j.at("uav");
  o.sn = j.at("sn");
  o.los_drawn = j.at("los");
  o.sinr = j.at("sinr");
  o.success = j.at("ok");
}
inline void to_json(nlohmann::json& j, const Transition& t) {
  j = {{"state", t.state},       {"obs", t.observations}, {"masks", t.masks},       {"actions", t.actions},
       {"executed", t.executed}, {"tx", t.outcomes},      {"cost", t.cost},         {"aoi_sum", t.aoi_sum},
       {"collision", t.collision}};
}
inline void from_json(const nlohmann::json& j, Transition& t) {
  t.state = j.at("state").get<WorldState>();
  t.observations = j.at("obs").get<std::vector<Observation>>();
  t.masks = j.at("masks").get<std::vector<ActionMask>>();
  t.actions = j.at("actions").get<std::vector<int>>();
  t.executed = j.at("executed").get<std::vector<int>>();
  t.outcomes = j.at("tx").get<std::vector<TransmissionOutcome>>();
  t.cost = j.at("cost");
  t.aoi_sum = j.at("aoi_sum");
  t.collision = j.at("collision");
}
inline void to_json(nlohmann::json& j, const EpisodeRecord& e) {
  j = {{"seed", e.seed},
       {"episode", e.episode},
       {"reason", to_string(e.reason)},
       {"steps", e.steps},
       {"final", e.final_state}};
}
inline void from_json(const nlohmann::json& j, EpisodeRecord& e) {
  e.seed = j.at("seed");
  e.episode = j.at("episode");
  e.reason = terminal_reason_from_string(j.at("reason"));
  e.steps = j.at("steps").get<std::vector<Transition>>();
  e.final_state = j.at("final").get<WorldState>();
}

/// Episodes as JSON lines, one episode per line. Doubles round-trip exactly.
inline void write_episodes(std::ostream& out, const std::vector<EpisodeRecord>& episodes) {
  for (const auto& e : episodes) out << nlohmann::json(e).dump() << '\n';
}

inline std::vector<EpisodeRecord> read_episodes(std::istream& in) {
  std::vector<EpisodeRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<EpisodeRecord>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kIo, std::string("bad episode line: ") + e.what());
    }
  }
  return out;
}

/// Per-slot trajectory table: the state after each slot, starting with the
/// initial state at t = 0.
inline void write_trace_csv(std::ostream& out, const EpisodeRecord& rec, const WorldConfig& cfg) {
  out << "t";
  for (int m = 0; m < cfg.num_uavs; ++m) {
    out << ",x" << m << ",y" << m << ",v" << m << ",heading" << m << ",b" << m;
  }
  for (int n = 1; n <= cfg.num_sns; ++n) out << ",aoi" << n;
  for (int n = 1; n <= cfg.num_sns; ++n) out << ",E" << n;
  out << '\n';
  out.precision(17);
  auto row = [&](int t, const WorldState& s, const std::vector<int>* executed) {
    out << t;
    for (int m = 0; m < cfg.num_uavs; ++m) {
      const auto& p = s.uavs[m];
      const int b = executed ? ActionCodec(cfg).decode((*executed)[m]).schedule : 0;
      out << ',' << p.position.x << ',' << p.position.y << ',' << p.speed << ',' << p.heading << ',' << b;
    }
    for (const auto& sn : s.sns) out << ',' << sn.aoi;
    for (const auto& sn : s.sns) out << ',' << sn.battery;
    out << '\n';
  };
  if (rec.steps.empty()) return;
  row(0, rec.steps.front().state, nullptr);
  for (std::size_t i = 0; i < rec.steps.size(); ++i) {
    const WorldState& after = i + 1 < rec.steps.size() ? rec.steps[i + 1].state : rec.final_state;
    row(static_cast<int>(i) + 1, after, &rec.steps[i].executed);
  }
}

}  // namespace uavaoi
