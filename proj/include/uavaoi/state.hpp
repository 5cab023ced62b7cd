#pragma once

#include <cstdint>
#include <vector>

#include "uavaoi/geometry.hpp"

namespace uavaoi {

struct SensorNode {
  int id = 0;  // 1-based, matches the scheduling vector
  Vec2 position;
  double battery = 0.0;  // J
  int aoi = 1;           // slots
  double harvest_prob = 0.0;

  friend bool operator==(const SensorNode&, const SensorNode&) = default;
};

struct UavPose {
  Vec2 position;
  double speed = 0.0;         // m/s at the beginning of the slot
  double heading = 0.0;       // direction flown in the previous slot, [0, 2*pi)
  double energy_spent = 0.0;  // J, propulsion energy of all completed slots
  int time_diff = 0;          // slots
  double energy_diff = 0.0;   // J

  friend bool operator==(const UavPose&, const UavPose&) = default;
};

/// Full environment state at the beginning of slot `t`. After the last slot
/// of an episode the state carries t = T + 1.
struct WorldState {
  int t = 1;
  std::vector<SensorNode> sns;
  std::vector<UavPose> uavs;
  std::uint64_t rng_stream = 0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

}  // namespace uavaoi
