#pragma once

// Numeric oracles shared by the unit suite and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "uavaoi/qmix.hpp"

namespace uavaoi::checks {

struct GradReport {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Compares analytic gradients with finite differences for every entry of
/// every parameter; relative error is |a - n| / max(|a| + |n|, 1e-7).
/// `loss` evaluates the scalar; `backward` evaluates it and accumulates
/// gradients into the parameters.
inline GradReport check_gradients(const nn::ParamList<double>& ps, const std::function<double()>& loss,
                                  const std::function<void()>& backward, double h = 1e-4) {
  nn::zero_grad(ps);
  backward();
  std::vector<nn::Mat<double>> analytic;
  for (auto* p : ps) analytic.push_back(p->grad);
  GradReport r;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& w = ps[k]->value;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      auto at = [&](double offset) {
        w.data()[i] = orig + offset;
        return loss();
      };
      // five-point stencil, truncation error O(h^4)
      const double numeric = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
      w.data()[i] = orig;
      const double a = analytic[k].data()[i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-7);
      if (rel > r.max_rel) {
        r.max_rel = rel;
        r.worst = ps[k]->name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                  std::to_string(numeric);
      }
      ++r.checked;
    }
  }
  return r;
}

inline nn::Mat<double> random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

/// Random synthetic episode with valid masks (at least one available action
/// per agent and slot) and the chosen action always available.
inline EpisodeData synthetic_episode(int length, int agents, int obs_dim, int state_dim, int actions, Rng& rng) {
  EpisodeData d;
  d.length = length;
  d.num_agents = agents;
  d.obs_dim = obs_dim;
  d.state_dim = state_dim;
  d.num_actions = actions;
  for (int t = 0; t < length; ++t) {
    for (int m = 0; m < agents; ++m) {
      for (int i = 0; i < obs_dim; ++i) d.obs.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
      std::vector<std::uint8_t> av(actions, 0);
      for (auto& a : av) a = rng.bernoulli(0.6) ? 1 : 0;
      const int chosen = static_cast<int>(rng.uniform_int(actions));
      av[chosen] = 1;
      d.actions.push_back(chosen);
      d.avail.insert(d.avail.end(), av.begin(), av.end());
    }
    for (int i = 0; i < state_dim; ++i) d.state.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
    d.costs.push_back(static_cast<float>(rng.uniform(0.0, 3.0)));
    d.terminal.push_back(t + 1 == length ? 1 : 0);
  }
  return d;
}

/// Smallest central-difference dQ_tot/dq_m over `draws` random mixers,
/// states and agent values.
inline double min_mixer_derivative(int draws, int agents, Rng& rng, double h = 1e-5) {
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < draws; ++k) {
    const int state_dim = 3 + static_cast<int>(rng.uniform_int(6));
    MixerNet<double> mix(agents, state_dim, 8, 8);
    mix.init(rng);
    const nn::Mat<double> s = random_matrix(state_dim, 1, rng);
    nn::Mat<double> q = random_matrix(agents, 1, rng, -5.0, 5.0);
    for (int m = 0; m < agents; ++m) {
      const double orig = q(m, 0);
      q(m, 0) = orig + h;
      const double up = mix.forward(q, s)(0);
      q(m, 0) = orig - h;
      const double down = mix.forward(q, s)(0);
      q(m, 0) = orig;
      worst = std::min(worst, (up - down) / (2.0 * h));
    }
  }
  return worst;
}

struct IgmResult {
  bool ok = false;
  int minimizers = 0;  // joint actions attaining the minimum exactly
};

/// One IGM trial: random mixer, per-agent values and action masks, brute
/// force over all available joint actions. The per-agent masked argmins must
/// attain the joint minimum of Q_tot exactly; when the minimizer is unique
/// they must be it. ReLU flat regions make several joint actions tie.
inline IgmResult igm_trial(int agents, int actions, Rng& rng) {
  const int state_dim = 4;
  MixerNet<double> mix(agents, state_dim, 8, 8);
  mix.init(rng);
  const nn::Mat<double> s = random_matrix(state_dim, 1, rng);
  const nn::Mat<double> q = random_matrix(actions, agents, rng, -3.0, 3.0);  // column m: agent m
  std::vector<std::vector<int>> allowed(agents);
  for (int m = 0; m < agents; ++m) {
    for (int a = 0; a < actions; ++a) {
      if (rng.bernoulli(0.6)) allowed[m].push_back(a);
    }
    if (allowed[m].empty()) allowed[m].push_back(static_cast<int>(rng.uniform_int(actions)));
  }
  std::vector<int> greedy(agents);
  nn::Mat<double> greedy_q(agents, 1);
  for (int m = 0; m < agents; ++m) {
    greedy[m] = masked_argmin(q.col(m), allowed[m]);
    greedy_q(m, 0) = q(greedy[m], m);
  }
  const double q_greedy = mix.forward(greedy_q, s)(0);

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_joint;
  int count = 0;
  std::vector<std::size_t> idx(agents, 0);
  while (true) {
    nn::Mat<double> joint(agents, 1);
    for (int m = 0; m < agents; ++m) joint(m, 0) = q(allowed[m][idx[m]], m);
    const double v = mix.forward(joint, s)(0);
    if (v < best) {
      best = v;
      count = 0;
      best_joint.clear();
      for (int m = 0; m < agents; ++m) best_joint.push_back(allowed[m][idx[m]]);
    }
    if (v == best) ++count;
    int m = 0;
    while (m < agents && ++idx[m] == allowed[m].size()) idx[m++] = 0;
    if (m == agents) break;
  }
  return {q_greedy == best && (count > 1 || greedy == best_joint), count};
}

/// Tiny QMIX problem for gradient checks: a shared agent net and a mixer
/// over a 2-episode batch.
struct TinyQmix {
  AgentNet<double> agent;
  MixerNet<double> mixer;
  Batch<double> batch;
  Mat<double> y;

  TinyQmix(int agents, int slots, Rng& rng)
      : agent(5, 6, 4), mixer(agents, 4, 3, 3) {
    agent.init(rng);
    mixer.init(rng);
    std::vector<EpisodeData> eps{synthetic_episode(slots, agents, 5, 4, 6, rng),
                                 synthetic_episode(std::max(1, slots - 1), agents, 5, 4, 6, rng)};
    batch = make_batch<double>({&eps[0], &eps[1]}, 1.0);
    y = random_matrix(batch.max_len, batch.episodes, rng, 0.0, 2.0);
  }

  nn::ParamList<double> params() {
    auto ps = agent.params();
    for (auto* p : mixer.params()) ps.push_back(p);
    return ps;
  }

  double loss() { return td_loss_and_grad(batch, {&agent}, &mixer, y, false); }
  void backward() { td_loss_and_grad(batch, {&agent}, &mixer, y, true); }
};

}  // namespace uavaoi::checks
