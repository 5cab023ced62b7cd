#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "uavaoi/decpomdp.hpp"
#include "uavaoi/feasibility.hpp"
#include "uavaoi/qmix.hpp"

namespace uavaoi {

inline double distance_sq(Vec2 a, Vec2 b) {
  const Vec2 d = a - b;
  return d.x * d.x + d.y * d.y;
}

// ---------------------------------------------------------------------------
// Nearest scheduling

/// Nearest schedulable SN to `uav` by ground distance, 0 when none.
inline int nearest_schedule(Vec2 uav, const ActionMask& mask, const WorldConfig& cfg) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int id : mask.schedulable) {
    if (id == 0) continue;
    const double d = distance(uav, cfg.sn_positions.at(id - 1));
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

/// Moves like a trained QMIX actor (greedy masked argmin, then keep the
/// movement part) and schedules the nearest schedulable SN.
template <typename S = float>
class NearestPolicy {
 public:
  explicit NearestPolicy(Learner<S>& movement) : actor_(movement, Rng(), movement.params().use_mask) {}

  std::vector<int> operator()(const Environment& env, const std::vector<Observation>& obs,
                              const std::vector<ActionMask>& masks) {
    std::vector<int> flat = actor_(env, obs, masks);
    const ActionCodec& codec = env.codec();
    for (std::size_t m = 0; m < flat.size(); ++m) {
      AgentAction a = codec.decode(flat[m]);
      a.schedule = nearest_schedule(obs[m].position, masks[m], env.config());
      flat[m] = codec.encode(a);
    }
    return flat;
  }

 private:
  typename Learner<S>::Actor actor_;
};

// ---------------------------------------------------------------------------
// K-means clustering

struct ClusterAssignment {
  std::vector<int> cluster;       // per SN, 0-based UAV index
  std::vector<Vec2> centroids;    // per cluster
  int iterations = 0;

  std::vector<int> members(int k) const {
    std::vector<int> ids;
    for (std::size_t n = 0; n < cluster.size(); ++n) {
      if (cluster[n] == k) ids.push_back(static_cast<int>(n) + 1);
    }
    return ids;
  }
};

/// Index of the nearest centroid, lowest index on ties.
inline int nearest_centroid(Vec2 p, const std::vector<Vec2>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const double d = distance_sq(p, centroids[k]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline double within_cluster_ss(const std::vector<Vec2>& points, const ClusterAssignment& a) {
  double ss = 0.0;
  for (std::size_t n = 0; n < points.size(); ++n) ss += distance_sq(points[n], a.centroids[a.cluster[n]]);
  return ss;
}

/// Lloyd's algorithm seeded at the UAV start positions. Stops when the
/// assignment no longer changes or after `max_iter` rounds. An empty
/// cluster is re-seeded at the SN farthest from its own centroid.
inline ClusterAssignment kmeans_cluster(const std::vector<Vec2>& points, const std::vector<Vec2>& seeds,
                                        int max_iter = 100) {
  if (seeds.empty()) fail(ErrorCode::kConfig, "k-means needs at least one seed");
  if (points.size() < seeds.size()) fail(ErrorCode::kConfig, "k-means needs N >= M");
  ClusterAssignment a;
  a.centroids = seeds;
  a.cluster.assign(points.size(), -1);
  const int K = static_cast<int>(seeds.size());
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t n = 0; n < points.size(); ++n) {
      const int k = nearest_centroid(points[n], a.centroids);
      changed |= k != a.cluster[n];
      a.cluster[n] = k;
    }
    for (int k = 0; k < K; ++k) {
      Vec2 sum{0.0, 0.0};
      int count = 0;
      for (std::size_t n = 0; n < points.size(); ++n) {
        if (a.cluster[n] != k) continue;
        sum.x += points[n].x;
        sum.y += points[n].y;
        ++count;
      }
      if (count > 0) a.centroids[k] = {sum.x / count, sum.y / count};
    }
    for (int k = 0; k < K; ++k) {
      if (std::find(a.cluster.begin(), a.cluster.end(), k) != a.cluster.end()) continue;
      // donor: the SN farthest from its centroid among clusters with 2+ members
      int far = -1;
      double far_d = 1e-12;
      for (std::size_t n = 0; n < points.size(); ++n) {
        if (std::count(a.cluster.begin(), a.cluster.end(), a.cluster[n]) < 2) continue;
        const double d = distance_sq(points[n], a.centroids[a.cluster[n]]);
        if (d > far_d) {
          far_d = d;
          far = static_cast<int>(n);
        }
      }
      if (far < 0) continue;  // all remaining SNs sit on their centroids
      a.cluster[far] = k;
      a.centroids[k] = points[far];
      changed = true;
    }
    a.iterations = it + 1;
    if (!changed) break;
  }
  return a;
}

inline ClusterAssignment kmeans_cluster(const WorldConfig& cfg, int max_iter = 100) {
  return kmeans_cluster(cfg.sn_positions, cfg.starts, max_iter);
}

// ---------------------------------------------------------------------------
// Cluster heuristic

struct ClusterOptions {
  bool cross_cluster_schedule = false;  // allow scheduling covered SNs of other clusters
};

/// Each UAV chases the SN of largest believed AoI in its cluster and
/// schedules the covered in-cluster SN of largest observed AoI. Beliefs come
/// from the UAV's own observations: a covered SN's AoI is read, an uncovered
/// one ages by one slot per slot.
class ClusterPolicy {
 public:
  ClusterPolicy(const WorldConfig& cfg, ClusterAssignment assignment, ClusterOptions opt = {})
      : cfg_(cfg), assignment_(std::move(assignment)), opt_(opt) {}
  explicit ClusterPolicy(const WorldConfig& cfg, ClusterOptions opt = {})
      : ClusterPolicy(cfg, kmeans_cluster(cfg), opt) {}

  const ClusterAssignment& assignment() const { return assignment_; }
  const std::vector<std::vector<int>>& beliefs() const { return belief_; }

  std::vector<int> operator()(const Environment& env, const std::vector<Observation>& obs,
                              const std::vector<ActionMask>& masks) {
    if (env.state().t == 1 || belief_.empty()) {
      belief_.assign(cfg_.num_uavs, std::vector<int>(cfg_.num_sns, cfg_.initial_aoi));
    } else {
      for (auto& b : belief_) {
        for (int& a : b) a = std::min(a + 1, cfg_.delta_max);
      }
    }
    std::vector<int> out;
    for (int m = 0; m < cfg_.num_uavs; ++m) {
      for (int n = 0; n < cfg_.num_sns; ++n) {
        if (obs[m].aoi[n] >= 0) belief_[m][n] = obs[m].aoi[n];
      }
      out.push_back(env.codec().encode(act(m, obs[m], masks[m])));
    }
    return out;
  }

  /// Decision of UAV `m` given its current belief.
  AgentAction act(int m, const Observation& obs, const ActionMask& mask) const {
    const std::vector<int> cluster = assignment_.members(m);
    AgentAction a{};

    // movement: toward the in-cluster SN of largest believed AoI
    int target = 0;
    for (int id : cluster) {
      if (target == 0 || belief_[m][id - 1] > belief_[m][target - 1]) target = id;
    }
    const MovementOption* best = &mask.movements.front();
    if (target != 0 && !mask.forced) {
      const Vec2 goal = cfg_.sn_positions[target - 1];
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& opt : mask.movements) {
        const double d = distance(displace(obs.position, obs.speed, opt.speed, opt.heading, cfg_), goal);
        if (d < best_d - 1e-9) {
          best_d = d;
          best = &opt;
        }
      }
    }
    a.speed_idx = best->speed_idx;
    a.heading_idx = best->heading_idx;

    // schedule: covered SN of largest observed AoI
    a.schedule = 0;
    for (int id : mask.schedulable) {
      if (id == 0) continue;
      if (!opt_.cross_cluster_schedule && assignment_.cluster[id - 1] != m) continue;
      if (a.schedule == 0 || obs.aoi[id - 1] > obs.aoi[a.schedule - 1]) a.schedule = id;
    }
    return a;
  }

 private:
  WorldConfig cfg_;
  ClusterAssignment assignment_;
  ClusterOptions opt_;
  std::vector<std::vector<int>> belief_;
};

// ---------------------------------------------------------------------------
// Independent learners

/// Independent DQN: the shared learner with one recurrent net per agent,
/// each trained on the team cost against its own target, without a mixer.
template <typename S = float>
Learner<S> make_idqn(const WorldConfig& cfg, const LearnerParams& p, std::uint64_t seed) {
  return Learner<S>(cfg, p, Algorithm::kIdqn, seed);
}

}  // namespace uavaoi
