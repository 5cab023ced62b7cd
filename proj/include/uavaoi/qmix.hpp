#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "uavaoi/config.hpp"
#include "uavaoi/decpomdp.hpp"
#include "uavaoi/error.hpp"
#include "uavaoi/nn.hpp"
#include "uavaoi/rng.hpp"

namespace uavaoi {

using nn::Mat;
using nn::RowVec;
using nn::Vec;

// ---------------------------------------------------------------------------
// Networks

/// Recurrent per-agent utility network: ReLU input layer over the
/// observation and the previous action (one-hot), a GRU, and a linear head
/// giving one value per flat action. The one-hot product is computed as a
/// column gather.
template <typename S>
class AgentNet {
 public:
  struct StepCache {
    Mat<S> obs;
    std::vector<int> prev;
    Mat<S> pre;  // input layer pre-activation
    Mat<S> x;    // input layer output
    typename nn::GruCell<S>::Cache gru;
    Mat<S> h;    // GRU output
  };

  AgentNet() = default;
  AgentNet(int obs_dim, int num_actions, int hidden, const std::string& name = "agent")
      : obs_dim_(obs_dim),
        num_actions_(num_actions),
        hidden_(hidden),
        w_obs_(name + ".in.W_obs", hidden, obs_dim),
        w_act_(name + ".in.W_act", hidden, num_actions),
        b_in_(name + ".in.b", hidden, 1),
        gru_(name + ".gru", hidden, hidden),
        head_(name + ".head", hidden, num_actions) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(obs_dim_ + num_actions_));
    w_obs_.uniform_init(bound, rng);
    w_act_.uniform_init(bound, rng);
    b_in_.uniform_init(bound, rng);
    gru_.init(rng);
    head_.init(rng);
  }

  int obs_dim() const { return obs_dim_; }
  int num_actions() const { return num_actions_; }
  int hidden() const { return hidden_; }

  Mat<S> zero_hidden(int cols) const { return Mat<S>::Zero(hidden_, cols); }

  /// One recurrent step for a batch of columns. `prev[c] < 0` means no
  /// previous action (the first slot).
  Mat<S> step(const Mat<S>& obs, const std::vector<int>& prev, const Mat<S>& h, Mat<S>& h_next,
              StepCache* cache = nullptr) const {
    if (obs.rows() != obs_dim_ || h.rows() != hidden_ || obs.cols() != h.cols() ||
        static_cast<Eigen::Index>(prev.size()) != obs.cols()) {
      fail(ErrorCode::kDimensionMismatch, "agent step: bad input shape");
    }
    Mat<S> pre = w_obs_.value * obs;
    pre.colwise() += b_in_.value.col(0);
    for (Eigen::Index c = 0; c < pre.cols(); ++c) {
      if (prev[c] >= 0) pre.col(c) += w_act_.value.col(prev[c]);
    }
    Mat<S> x = pre.cwiseMax(S(0));
    h_next = gru_.forward(x, h, cache ? &cache->gru : nullptr);
    Mat<S> q = head_.forward(h_next);
    if (cache) {
      cache->obs = obs;
      cache->prev = prev;
      cache->pre = std::move(pre);
      cache->x = std::move(x);
      cache->h = h_next;
    }
    return q;
  }

  /// Backward through one step. `dq` is dL/dq of this step and `dh_next`
  /// the gradient flowing into this step's output state from later steps.
  /// Returns dL/dh for the step's input state.
  Mat<S> backward_step(const StepCache& c, const Mat<S>& dq, const Mat<S>& dh_next) {
    Mat<S> dh = head_.backward(c.h, dq);
    dh += dh_next;
    auto [dx, dh_prev] = gru_.backward(c.gru, dh);
    const Mat<S> dpre = (dx.array() * (c.pre.array() > S(0)).template cast<S>()).matrix();
    w_obs_.grad.noalias() += dpre * c.obs.transpose();
    b_in_.grad.col(0) += dpre.rowwise().sum().transpose();
    for (Eigen::Index col = 0; col < dpre.cols(); ++col) {
      if (c.prev[col] >= 0) w_act_.grad.col(c.prev[col]) += dpre.col(col);
    }
    return dh_prev;
  }

  nn::ParamList<S> params() {
    nn::ParamList<S> ps{&w_obs_, &w_act_, &b_in_};
    gru_.collect(ps);
    head_.collect(ps);
    return ps;
  }

 private:
  int obs_dim_ = 0;
  int num_actions_ = 0;
  int hidden_ = 0;
  nn::Param<S> w_obs_, w_act_, b_in_;
  nn::GruCell<S> gru_;
  nn::Linear<S> head_;
};

/// Monotonic mixing network. Hypernetworks map the state to the weights of a
/// one-hidden-layer network over the per-agent values; weight outputs pass
/// through |.|, the output bias comes from a two-layer ReLU hypernetwork.
template <typename S>
class MixerNet {
 public:
  struct Cache {
    Mat<S> s, q;
    Mat<S> w1_pre, w1, b1, hid_pre, hid, w2_pre, w2, b2_pre, b2_hid;
  };

  MixerNet() = default;
  MixerNet(int num_agents, int state_dim, int embed, int hyper_hidden, const std::string& name = "mixer")
      : agents_(num_agents),
        state_dim_(state_dim),
        embed_(embed),
        hyper_w1_(name + ".hyper_w1", state_dim, num_agents * embed),
        hyper_b1_(name + ".hyper_b1", state_dim, embed),
        hyper_w2_(name + ".hyper_w2", state_dim, embed),
        hyper_b2a_(name + ".hyper_b2.0", state_dim, hyper_hidden),
        hyper_b2b_(name + ".hyper_b2.1", hyper_hidden, 1) {}

  void init(Rng& rng) {
    hyper_w1_.init(rng);
    hyper_b1_.init(rng);
    hyper_w2_.init(rng);
    hyper_b2a_.init(rng);
    hyper_b2b_.init(rng);
  }

  int num_agents() const { return agents_; }
  int state_dim() const { return state_dim_; }
  int embed() const { return embed_; }

  /// q: agents x C, s: state_dim x C -> 1 x C.
  RowVec<S> forward(const Mat<S>& q, const Mat<S>& s, Cache* cache = nullptr) const {
    if (q.rows() != agents_ || s.rows() != state_dim_ || q.cols() != s.cols()) {
      fail(ErrorCode::kDimensionMismatch, "mixer: bad input shape");
    }
    const int E = embed_;
    Mat<S> w1_pre = hyper_w1_.forward(s);
    Mat<S> w1 = w1_pre.cwiseAbs();
    Mat<S> b1 = hyper_b1_.forward(s);
    Mat<S> hid_pre = b1;
    for (int m = 0; m < agents_; ++m) {
      hid_pre.array() += w1.middleRows(m * E, E).array().rowwise() * q.row(m).array();
    }
    Mat<S> hid = hid_pre.cwiseMax(S(0));
    Mat<S> w2_pre = hyper_w2_.forward(s);
    Mat<S> w2 = w2_pre.cwiseAbs();
    Mat<S> b2_pre = hyper_b2a_.forward(s);
    Mat<S> b2_hid = b2_pre.cwiseMax(S(0));
    RowVec<S> out = (hid.array() * w2.array()).colwise().sum().matrix() + hyper_b2b_.forward(b2_hid);
    if (cache) {
      cache->s = s;
      cache->q = q;
      cache->w1_pre = std::move(w1_pre);
      cache->w1 = std::move(w1);
      cache->b1 = std::move(b1);
      cache->hid_pre = std::move(hid_pre);
      cache->hid = std::move(hid);
      cache->w2_pre = std::move(w2_pre);
      cache->w2 = std::move(w2);
      cache->b2_pre = std::move(b2_pre);
      cache->b2_hid = std::move(b2_hid);
    }
    return out;
  }

  /// Accumulates parameter gradients for dL/dQ_tot and returns dL/dq.
  Mat<S> backward(const Cache& c, const RowVec<S>& dout) {
    const int E = embed_;
    const Mat<S> dw2 = (c.hid.array().rowwise() * dout.array()).matrix();
    const Mat<S> dhid = (c.w2.array().rowwise() * dout.array()).matrix();
    const Mat<S> db2b = dout;
    const Mat<S> db2_hid = hyper_b2b_.backward(c.b2_hid, db2b);
    const Mat<S> db2_pre = (db2_hid.array() * (c.b2_pre.array() > S(0)).template cast<S>()).matrix();
    hyper_b2a_.backward(c.s, db2_pre, false);
    hyper_w2_.backward(c.s, (dw2.array() * c.w2_pre.array().sign()).matrix(), false);

    const Mat<S> dhid_pre = (dhid.array() * (c.hid_pre.array() > S(0)).template cast<S>()).matrix();
    hyper_b1_.backward(c.s, dhid_pre, false);
    Mat<S> dw1(agents_ * E, dout.cols());
    Mat<S> dq(agents_, dout.cols());
    for (int m = 0; m < agents_; ++m) {
      dw1.middleRows(m * E, E) = (dhid_pre.array().rowwise() * c.q.row(m).array()).matrix();
      dq.row(m) = (dhid_pre.array() * c.w1.middleRows(m * E, E).array()).colwise().sum().matrix();
    }
    hyper_w1_.backward(c.s, (dw1.array() * c.w1_pre.array().sign()).matrix(), false);
    return dq;
  }

  nn::ParamList<S> params() {
    nn::ParamList<S> ps;
    hyper_w1_.collect(ps);
    hyper_b1_.collect(ps);
    hyper_w2_.collect(ps);
    hyper_b2a_.collect(ps);
    hyper_b2b_.collect(ps);
    return ps;
  }

 private:
  int agents_ = 0;
  int state_dim_ = 0;
  int embed_ = 0;
  nn::Linear<S> hyper_w1_, hyper_b1_, hyper_w2_, hyper_b2a_, hyper_b2b_;
};

// ---------------------------------------------------------------------------
// Action selection

/// Index of the smallest q among `allowed` (ties: lowest index).
template <typename Q>
int masked_argmin(const Q& q, const std::vector<int>& allowed) {
  if (allowed.empty()) fail(ErrorCode::kEmptyMask, "no available action");
  int best = allowed.front();
  for (int a : allowed) {
    if (q(a) < q(best) || (q(a) == q(best) && a < best)) best = a;
  }
  return best;
}

/// With probability eps a uniform draw from `allowed`, else the masked
/// argmin. Always consumes one uniform, plus one integer draw on exploration.
template <typename Q>
int masked_epsilon_greedy(const Q& q, const std::vector<int>& allowed, double eps, Rng& rng) {
  if (allowed.empty()) fail(ErrorCode::kEmptyMask, "no available action");
  if (rng.uniform() < eps) return allowed[rng.uniform_int(allowed.size())];
  return masked_argmin(q, allowed);
}

// ---------------------------------------------------------------------------
// Replay

/// Learner-side copy of one episode: features, chosen actions, availability
/// and costs. Everything is stored per slot t = 0..length-1.
struct EpisodeData {
  int length = 0;
  int num_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int num_actions = 0;
  std::vector<float> obs;            // [t][m][obs_dim]
  std::vector<float> state;          // [t][state_dim]
  std::vector<int> actions;          // [t][m]
  std::vector<std::uint8_t> avail;   // [t][m][num_actions]
  std::vector<float> costs;          // [t]
  std::vector<std::uint8_t> terminal;  // [t]

  const float* obs_at(int t, int m) const { return obs.data() + (static_cast<std::size_t>(t) * num_agents + m) * obs_dim; }
  const float* state_at(int t) const { return state.data() + static_cast<std::size_t>(t) * state_dim; }
  const std::uint8_t* avail_at(int t, int m) const {
    return avail.data() + (static_cast<std::size_t>(t) * num_agents + m) * num_actions;
  }
  int action(int t, int m) const { return actions[static_cast<std::size_t>(t) * num_agents + m]; }
};

/// Converts a recorded episode. With `use_mask` false every action counts
/// as available, matching a learner that ignores the masks.
inline EpisodeData to_episode_data(const EpisodeRecord& rec, const WorldConfig& cfg, bool use_mask) {
  EpisodeData d;
  const ActionCodec codec(cfg);
  d.length = static_cast<int>(rec.steps.size());
  d.num_agents = cfg.num_uavs;
  d.obs_dim = observation_dim(cfg);
  d.state_dim = state_dim(cfg);
  d.num_actions = codec.size();
  for (const auto& tr : rec.steps) {
    for (int m = 0; m < cfg.num_uavs; ++m) {
      const auto f = observation_features<float>(tr.observations[m], cfg);
      d.obs.insert(d.obs.end(), f.begin(), f.end());
      d.actions.push_back(tr.actions[m]);
      if (use_mask) {
        const auto fm = flat_mask(tr.masks[m], codec);
        d.avail.insert(d.avail.end(), fm.begin(), fm.end());
      } else {
        d.avail.insert(d.avail.end(), codec.size(), 1);
      }
    }
    const auto s = state_features<float>(tr.state, cfg);
    d.state.insert(d.state.end(), s.begin(), s.end());
    d.costs.push_back(static_cast<float>(tr.cost));
    d.terminal.push_back(0);
  }
  if (!d.terminal.empty()) d.terminal.back() = 1;
  return d;
}

/// FIFO buffer of whole episodes.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) fail(ErrorCode::kConfig, "replay capacity must be positive");
  }

  void push(EpisodeData ep) {
    if (buffer_.size() == capacity_) buffer_.pop_front();
    buffer_.push_back(std::move(ep));
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  const EpisodeData& at(std::size_t i) const { return buffer_.at(i); }

  /// `count` distinct episodes, uniformly without replacement.
  std::vector<const EpisodeData*> sample(std::size_t count, Rng& rng) const {
    if (count > buffer_.size()) fail(ErrorCode::kDimensionMismatch, "not enough episodes to sample");
    std::vector<std::size_t> idx(buffer_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<const EpisodeData*> out;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.uniform_int(idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(&buffer_[idx[i]]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<EpisodeData> buffer_;
};

// ---------------------------------------------------------------------------
// TD loss

/// Time-major view of a mini-batch. Column index within a slot is b*M + m.
template <typename S>
struct Batch {
  int episodes = 0;
  int agents = 0;
  int max_len = 0;
  int num_actions = 0;
  std::vector<int> lengths;
  std::vector<Mat<S>> obs;                  // [t] obs_dim x (B*M)
  std::vector<std::vector<int>> prev;       // [t] previous actions, -1 at t = 0
  std::vector<std::vector<int>> actions;    // [t] chosen actions
  std::vector<Mat<S>> state;                // [t] state_dim x B
  std::vector<std::vector<std::uint8_t>> avail;  // [t] (B*M) x num_actions, row-major
  Mat<S> costs;                             // max_len x B
  Mat<S> valid;                             // max_len x B, 1 on real transitions
  Mat<S> terminal;                          // max_len x B

  bool available(int t, int col, int a) const { return avail[t][static_cast<std::size_t>(col) * num_actions + a] != 0; }
};

template <typename S>
Batch<S> make_batch(const std::vector<const EpisodeData*>& eps, double cost_scale) {
  if (eps.empty()) fail(ErrorCode::kDimensionMismatch, "empty batch");
  Batch<S> b;
  const EpisodeData& e0 = *eps.front();
  b.episodes = static_cast<int>(eps.size());
  b.agents = e0.num_agents;
  b.num_actions = e0.num_actions;
  for (const auto* e : eps) {
    b.lengths.push_back(e->length);
    b.max_len = std::max(b.max_len, e->length);
  }
  const int B = b.episodes, M = b.agents, A = b.num_actions;
  b.costs = Mat<S>::Zero(b.max_len, B);
  b.valid = Mat<S>::Zero(b.max_len, B);
  b.terminal = Mat<S>::Zero(b.max_len, B);
  for (int t = 0; t < b.max_len; ++t) {
    Mat<S> o = Mat<S>::Zero(e0.obs_dim, B * M);
    Mat<S> s = Mat<S>::Zero(e0.state_dim, B);
    std::vector<int> prev(B * M, -1), act(B * M, 0);
    std::vector<std::uint8_t> av(static_cast<std::size_t>(B) * M * A, 0);
    for (int e = 0; e < B; ++e) {
      const EpisodeData& ep = *eps[e];
      if (t >= ep.length) {
        for (int m = 0; m < M; ++m) av[(static_cast<std::size_t>(e) * M + m) * A] = 1;
        continue;
      }
      for (int m = 0; m < M; ++m) {
        const int col = e * M + m;
        const float* f = ep.obs_at(t, m);
        for (int i = 0; i < ep.obs_dim; ++i) o(i, col) = static_cast<S>(f[i]);
        prev[col] = t > 0 ? ep.action(t - 1, m) : -1;
        act[col] = ep.action(t, m);
        std::copy_n(ep.avail_at(t, m), A, av.begin() + static_cast<std::ptrdiff_t>(col) * A);
      }
      const float* sf = ep.state_at(t);
      for (int i = 0; i < ep.state_dim; ++i) s(i, e) = static_cast<S>(sf[i]);
      b.costs(t, e) = static_cast<S>(ep.costs[t] * cost_scale);
      b.valid(t, e) = S(1);
      b.terminal(t, e) = static_cast<S>(ep.terminal[t]);
    }
    b.obs.push_back(std::move(o));
    b.state.push_back(std::move(s));
    b.prev.push_back(std::move(prev));
    b.actions.push_back(std::move(act));
    b.avail.push_back(std::move(av));
  }
  return b;
}

/// Runs `net` over a sequence from zero hidden state.
template <typename S>
std::vector<Mat<S>> unroll(const AgentNet<S>& net, const std::vector<Mat<S>>& obs,
                           const std::vector<std::vector<int>>& prev,
                           std::vector<typename AgentNet<S>::StepCache>* caches = nullptr) {
  const Eigen::Index cols = obs.front().cols();
  Mat<S> h = net.zero_hidden(static_cast<int>(cols)), h_next;
  std::vector<Mat<S>> qs;
  if (caches) caches->assign(obs.size(), {});
  for (std::size_t t = 0; t < obs.size(); ++t) {
    qs.push_back(net.step(obs[t], prev[t], h, h_next, caches ? &(*caches)[t] : nullptr));
    h.swap(h_next);
  }
  return qs;
}

template <typename S>
void backprop_unroll(AgentNet<S>& net, const std::vector<typename AgentNet<S>::StepCache>& caches,
                     const std::vector<Mat<S>>& dq) {
  Mat<S> dh = Mat<S>::Zero(net.hidden(), dq.front().cols());
  for (std::size_t t = caches.size(); t-- > 0;) dh = net.backward_step(caches[t], dq[t], dh);
}

/// Forward pass of one shared net (all columns) or of one net per agent
/// (each on its own agent's columns). Either way the result is laid out as
/// num_actions x (B*M) per slot.
template <typename S>
struct AgentUnroll {
  std::vector<Mat<S>> q;
  std::vector<std::vector<typename AgentNet<S>::StepCache>> caches;  // per net
};

template <typename S, typename Net>
AgentUnroll<S> unroll_agents(const Batch<S>& b, const std::vector<Net*>& nets, bool keep_cache) {
  const int B = b.episodes, M = b.agents, L = b.max_len;
  AgentUnroll<S> out;
  out.caches.resize(nets.size());
  if (nets.size() == 1) {
    out.q = unroll(*nets[0], b.obs, b.prev, keep_cache ? &out.caches[0] : nullptr);
    return out;
  }
  if (static_cast<int>(nets.size()) != M) fail(ErrorCode::kDimensionMismatch, "need one net per agent");
  for (int t = 0; t < L; ++t) out.q.push_back(Mat<S>(b.num_actions, B * M));
  for (int k = 0; k < M; ++k) {
    std::vector<Mat<S>> obs;
    std::vector<std::vector<int>> prev;
    for (int t = 0; t < L; ++t) {
      Mat<S> o(b.obs[t].rows(), B);
      std::vector<int> p(B);
      for (int e = 0; e < B; ++e) {
        o.col(e) = b.obs[t].col(e * M + k);
        p[e] = b.prev[t][e * M + k];
      }
      obs.push_back(std::move(o));
      prev.push_back(std::move(p));
    }
    const auto qk = unroll(*nets[k], obs, prev, keep_cache ? &out.caches[k] : nullptr);
    for (int t = 0; t < L; ++t) {
      for (int e = 0; e < B; ++e) out.q[t].col(e * M + k) = qk[t].col(e);
    }
  }
  return out;
}

/// Backward pass matching `unroll_agents`; dq has the combined layout.
template <typename S>
void backprop_agents(const Batch<S>& b, const std::vector<AgentNet<S>*>& nets, const AgentUnroll<S>& u,
                     const std::vector<Mat<S>>& dq) {
  if (nets.size() == 1) {
    backprop_unroll(*nets[0], u.caches[0], dq);
    return;
  }
  const int B = b.episodes, M = b.agents;
  for (int k = 0; k < M; ++k) {
    std::vector<Mat<S>> dk;
    for (const auto& d : dq) {
      Mat<S> x(d.rows(), B);
      for (int e = 0; e < B; ++e) x.col(e) = d.col(e * M + k);
      dk.push_back(std::move(x));
    }
    backprop_unroll(*nets[k], u.caches[k], dk);
  }
}

/// Per-column masked minimum of q (num_actions x B*M) under availability,
/// returned as agents x episodes.
template <typename S>
Mat<S> masked_min(const Mat<S>& q, const Batch<S>& b, int t) {
  Mat<S> out(b.agents, b.episodes);
  for (int e = 0; e < b.episodes; ++e) {
    for (int m = 0; m < b.agents; ++m) {
      const int col = e * b.agents + m;
      S best = std::numeric_limits<S>::infinity();
      for (int a = 0; a < b.num_actions; ++a) {
        if (b.available(t, col, a) && q(a, col) < best) best = q(a, col);
      }
      out(m, e) = best;
    }
  }
  return out;
}

/// TD targets y(t) = c(t) + Q^-(t+1), bootstrapping only at non-terminal
/// slots. With a mixer, Q^- mixes the per-agent masked minima of the target
/// agent nets (rows t, cols episodes); without one the target is per agent
/// (cols b*M + m).
template <typename S>
Mat<S> td_targets(const Batch<S>& b, const std::vector<const AgentNet<S>*>& target_agents,
                  const MixerNet<S>* target_mixer) {
  const int B = b.episodes, M = b.agents, L = b.max_len;
  const auto qt = unroll_agents(b, target_agents, false).q;
  Mat<S> y = Mat<S>::Zero(L, target_mixer ? B : B * M);
  for (int t = 0; t < L; ++t) {
    const bool has_next = t + 1 < L;
    Mat<S> mins;
    RowVec<S> next_tot;
    if (has_next) {
      mins = masked_min(qt[t + 1], b, t + 1);
      if (target_mixer) next_tot = target_mixer->forward(mins, b.state[t + 1]);
    }
    for (int e = 0; e < B; ++e) {
      if (b.valid(t, e) == S(0)) continue;
      const bool boot = has_next && b.terminal(t, e) == S(0) && b.valid(t + 1, e) != S(0);
      if (target_mixer) {
        y(t, e) = b.costs(t, e) + (boot ? next_tot(e) : S(0));
      } else {
        for (int m = 0; m < M; ++m) y(t, e * M + m) = b.costs(t, e) + (boot ? mins(m, e) : S(0));
      }
    }
  }
  return y;
}

/// Mean squared TD error over the valid transitions of the batch (one term
/// per transition with a mixer, one per transition and agent without), and
/// its gradient accumulated into the nets.
template <typename S>
double td_loss_and_grad(const Batch<S>& b, const std::vector<AgentNet<S>*>& agents, MixerNet<S>* mixer,
                        const Mat<S>& y, bool accumulate_grad = true) {
  const int B = b.episodes, M = b.agents, L = b.max_len;
  const AgentUnroll<S> u = unroll_agents(b, agents, accumulate_grad);
  auto q_chosen = [&](int t, int e, int m) -> S { return u.q[t](b.actions[t][e * M + m], e * M + m); };

  double count = 0.0;
  for (int t = 0; t < L; ++t) {
    for (int e = 0; e < B; ++e) count += static_cast<double>(b.valid(t, e)) * (mixer ? 1 : M);
  }
  if (count == 0.0) return 0.0;

  std::vector<Mat<S>> dq;
  if (accumulate_grad) {
    for (int t = 0; t < L; ++t) dq.push_back(Mat<S>::Zero(b.num_actions, B * M));
  }
  auto add_dq = [&](int t, int e, int m, S g) { dq[t](b.actions[t][e * M + m], e * M + m) += g; };

  double total = 0.0;
  if (mixer) {
    // all slots in one mixer call, column t*B + e
    Mat<S> qa(M, L * B), s(b.state.front().rows(), L * B);
    for (int t = 0; t < L; ++t) {
      for (int e = 0; e < B; ++e) {
        for (int m = 0; m < M; ++m) qa(m, t * B + e) = q_chosen(t, e, m);
        s.col(t * B + e) = b.state[t].col(e);
      }
    }
    typename MixerNet<S>::Cache mc;
    const RowVec<S> qtot = mixer->forward(qa, s, accumulate_grad ? &mc : nullptr);
    RowVec<S> dtot = RowVec<S>::Zero(L * B);
    for (int t = 0; t < L; ++t) {
      for (int e = 0; e < B; ++e) {
        if (b.valid(t, e) == S(0)) continue;
        const double err = static_cast<double>(qtot(t * B + e)) - static_cast<double>(y(t, e));
        total += err * err;
        dtot(t * B + e) = static_cast<S>(2.0 * err / count);
      }
    }
    if (accumulate_grad) {
      const Mat<S> dqa = mixer->backward(mc, dtot);
      for (int t = 0; t < L; ++t) {
        for (int e = 0; e < B; ++e) {
          for (int m = 0; m < M; ++m) add_dq(t, e, m, dqa(m, t * B + e));
        }
      }
    }
  } else {
    for (int t = 0; t < L; ++t) {
      for (int e = 0; e < B; ++e) {
        if (b.valid(t, e) == S(0)) continue;
        for (int m = 0; m < M; ++m) {
          const double err = static_cast<double>(q_chosen(t, e, m)) - static_cast<double>(y(t, e * M + m));
          total += err * err;
          if (accumulate_grad) add_dq(t, e, m, static_cast<S>(2.0 * err / count));
        }
      }
    }
  }

  if (accumulate_grad) backprop_agents(b, agents, u, dq);
  return total / count;
}

// ---------------------------------------------------------------------------
// Learner

enum class Algorithm { kQmix, kIdqn };

inline std::string to_string(Algorithm a) { return a == Algorithm::kQmix ? "qmix" : "idqn"; }

struct LearnerParams {
  int episodes = 50000;       // EP
  int hidden = 256;           // GRU width (also the input layer width)
  int mixer_embed = 256;      // mixer hidden layer
  int hyper_hidden = 256;     // hidden width of the output-bias hypernetwork
  double lr = 5e-4;
  int batch_episodes = 32;
  int replay_capacity = 1000;  // D
  int target_update = 200;     // O, in training updates
  double eps_start = 0.99;
  double eps_min = 0.01;
  double eps_decrement = 9.9e-6;  // per environment step
  int warmup_episodes = 32;
  double grad_clip = 10.0;
  double cost_scale = 0.0;  // <= 0: 1 / (N * delta_max)
  bool use_mask = true;

  double effective_cost_scale(const WorldConfig& cfg) const {
    return cost_scale > 0.0 ? cost_scale : 1.0 / (static_cast<double>(cfg.num_sns) * cfg.delta_max);
  }
};

inline nlohmann::json to_json(const LearnerParams& p) {
  return {{"episodes", p.episodes},
          {"hidden", p.hidden},
          {"mixer_embed", p.mixer_embed},
          {"hyper_hidden", p.hyper_hidden},
          {"lr", p.lr},
          {"batch_episodes", p.batch_episodes},
          {"replay_capacity", p.replay_capacity},
          {"target_update", p.target_update},
          {"eps_start", p.eps_start},
          {"eps_min", p.eps_min},
          {"eps_decrement", p.eps_decrement},
          {"warmup_episodes", p.warmup_episodes},
          {"grad_clip", p.grad_clip},
          {"cost_scale", p.cost_scale},
          {"use_mask", p.use_mask}};
}

inline LearnerParams learner_params_from_json(const nlohmann::json& j, LearnerParams p = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  try {
    get("episodes", p.episodes);
    get("hidden", p.hidden);
    get("mixer_embed", p.mixer_embed);
    get("hyper_hidden", p.hyper_hidden);
    get("lr", p.lr);
    get("batch_episodes", p.batch_episodes);
    get("replay_capacity", p.replay_capacity);
    get("target_update", p.target_update);
    get("eps_start", p.eps_start);
    get("eps_min", p.eps_min);
    get("eps_decrement", p.eps_decrement);
    get("warmup_episodes", p.warmup_episodes);
    get("grad_clip", p.grad_clip);
    get("cost_scale", p.cost_scale);
    get("use_mask", p.use_mask);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  if (p.episodes < 0 || p.hidden < 1 || p.mixer_embed < 1 || p.hyper_hidden < 1 || p.lr <= 0 ||
      p.batch_episodes < 1 || p.replay_capacity < p.batch_episodes || p.target_update < 1 ||
      p.warmup_episodes < p.batch_episodes) {
    fail(ErrorCode::kConfig, "invalid learner parameters");
  }
  return p;
}

inline double epsilon_at(const LearnerParams& p, std::uint64_t env_steps) {
  return std::max(p.eps_min, p.eps_start - p.eps_decrement * static_cast<double>(env_steps));
}

struct CurveRow {
  int episode = 0;
  double cumulative_cost = 0.0;
  double epsilon = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double average_aoi = 0.0;
  int collisions = 0;
};

/// Centralized learner. QMIX: one shared agent net plus mixer.
/// IDQN: one net (and target) per agent, no mixer, team cost.
template <typename S = float>
class Learner {
 public:
  Learner(const WorldConfig& cfg, LearnerParams params, Algorithm algo, std::uint64_t seed)
      : cfg_(cfg), params_(params), algo_(algo), seed_(seed), codec_(cfg) {
    const int obs = observation_dim(cfg), A = codec_.size();
    const int nets = algo == Algorithm::kQmix ? 1 : cfg.num_uavs;
    Rng init(seed, Rng::hash("init"));
    for (int k = 0; k < nets; ++k) {
      const std::string name = nets == 1 ? "agent" : "agent" + std::to_string(k);
      agents_.emplace_back(std::make_unique<AgentNet<S>>(obs, A, params.hidden, name));
      agents_.back()->init(init);
      targets_.emplace_back(std::make_unique<AgentNet<S>>(obs, A, params.hidden, name));
    }
    if (algo == Algorithm::kQmix) {
      mixer_ = std::make_unique<MixerNet<S>>(cfg.num_uavs, state_dim(cfg), params.mixer_embed, params.hyper_hidden);
      mixer_->init(init);
      target_mixer_ = std::make_unique<MixerNet<S>>(cfg.num_uavs, state_dim(cfg), params.mixer_embed, params.hyper_hidden);
    }
    sync_targets();
    optimizer_ = nn::Adam<S>(online_params(), {params.lr});
  }

  const WorldConfig& config() const { return cfg_; }
  const LearnerParams& params() const { return params_; }
  Algorithm algorithm() const { return algo_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t updates() const { return updates_; }
  std::uint64_t env_steps() const { return env_steps_; }
  int episodes_done() const { return episodes_done_; }

  AgentNet<S>& agent(int m) { return *agents_[agents_.size() == 1 ? 0 : m]; }
  const AgentNet<S>& agent(int m) const { return *agents_[agents_.size() == 1 ? 0 : m]; }
  MixerNet<S>* mixer() { return mixer_.get(); }

  nn::ParamList<S> online_params() {
    nn::ParamList<S> ps;
    for (auto& a : agents_) {
      auto p = a->params();
      ps.insert(ps.end(), p.begin(), p.end());
    }
    if (mixer_) {
      auto p = mixer_->params();
      ps.insert(ps.end(), p.begin(), p.end());
    }
    return ps;
  }

  nn::ParamList<S> target_params() {
    nn::ParamList<S> ps;
    for (auto& a : targets_) {
      auto p = a->params();
      ps.insert(ps.end(), p.begin(), p.end());
    }
    if (target_mixer_) {
      auto p = target_mixer_->params();
      ps.insert(ps.end(), p.begin(), p.end());
    }
    return ps;
  }

  void sync_targets() { nn::copy_params(target_params(), online_params()); }

  /// One gradient step on a batch; returns the loss before the step.
  double train_step(const std::vector<const EpisodeData*>& episodes) {
    const Batch<S> b = make_batch<S>(episodes, params_.effective_cost_scale(cfg_));
    std::vector<const AgentNet<S>*> targets;
    for (auto& a : targets_) targets.push_back(a.get());
    const Mat<S> y = td_targets(b, targets, target_mixer_.get());
    auto ps = online_params();
    nn::zero_grad(ps);
    std::vector<AgentNet<S>*> nets;
    for (auto& a : agents_) nets.push_back(a.get());
    const double loss = td_loss_and_grad(b, nets, mixer_.get(), y);
    if (!std::isfinite(loss)) fail(ErrorCode::kNonFiniteLoss, "loss " + std::to_string(loss) + " at update " + std::to_string(updates_));
    nn::clip_grad_norm(ps, params_.grad_clip);
    optimizer_.step();
    ++updates_;
    if (updates_ % static_cast<std::uint64_t>(params_.target_update) == 0) sync_targets();
    return loss;
  }

  /// Full training loop. `on_episode` sees each curve row as it is produced.
  std::vector<CurveRow> train(const std::function<void(const CurveRow&)>& on_episode = {}) {
    Environment env(cfg_, {params_.use_mask ? MaskMode::kEnforce : MaskMode::kProject, true});
    ReplayMemory replay(static_cast<std::size_t>(params_.replay_capacity));
    Rng sampler(seed_, Rng::hash("replay"));
    std::vector<CurveRow> curve;
    for (int ep = episodes_done_; ep < params_.episodes; ++ep) {
      Rng explore = Rng(seed_, Rng::hash("explore")).split(static_cast<std::uint64_t>(ep));
      Actor actor(*this, explore, params_.use_mask);
      actor.exploring = true;
      const EpisodeRecord rec =
          run_episode(env, Rng(seed_, Rng::hash("env")).split(static_cast<std::uint64_t>(ep)), actor, seed_, ep);
      CurveRow row;
      row.episode = ep + 1;
      row.cumulative_cost = rec.total_cost();
      row.epsilon = epsilon_at(params_, env_steps_);
      row.average_aoi = episode_average_aoi(rec);
      row.collisions = rec.collisions();
      replay.push(to_episode_data(rec, cfg_, params_.use_mask));
      if (static_cast<int>(replay.size()) >= params_.warmup_episodes) {
        row.loss = train_step(replay.sample(static_cast<std::size_t>(params_.batch_episodes), sampler));
      }
      ++episodes_done_;
      curve.push_back(row);
      if (on_episode) on_episode(row);
    }
    return curve;
  }

  /// Decentralized actor: each agent sees only its own observation, the
  /// previous own action and its own recurrent state.
  struct Actor {
    Learner& learner;
    Rng rng;
    bool use_mask = true;
    bool exploring = false;
    std::vector<Mat<S>> hidden;
    std::vector<int> prev;

    Actor(Learner& l, Rng r, bool mask) : learner(l), rng(r), use_mask(mask) {}

    std::vector<int> operator()(const Environment& env, const std::vector<Observation>& obs,
                                const std::vector<ActionMask>& masks) {
      const WorldConfig& cfg = learner.cfg_;
      if (env.state().t == 1 || hidden.empty()) {
        hidden.assign(cfg.num_uavs, learner.agent(0).zero_hidden(1));
        prev.assign(cfg.num_uavs, -1);
      }
      const double eps = exploring ? epsilon_at(learner.params_, learner.env_steps_) : 0.0;
      std::vector<int> out;
      std::vector<int> all;
      if (!use_mask) {
        all.resize(learner.codec_.size());
        for (int a = 0; a < learner.codec_.size(); ++a) all[a] = a;
      }
      for (int m = 0; m < cfg.num_uavs; ++m) {
        const auto f = observation_features<S>(obs[m], cfg);
        const Mat<S> x = Eigen::Map<const Mat<S>>(f.data(), static_cast<Eigen::Index>(f.size()), 1);
        Mat<S> h_next;
        const Mat<S> q = learner.agent(m).step(x, {prev[m]}, hidden[m], h_next);
        hidden[m] = std::move(h_next);
        const std::vector<int> allowed = use_mask ? allowed_actions(masks[m], env.codec()) : all;
        const auto col = q.col(0);
        const int a = exploring ? masked_epsilon_greedy(col, allowed, eps, rng) : masked_argmin(col, allowed);
        out.push_back(a);
        prev[m] = a;
      }
      if (exploring) ++learner.env_steps_;
      return out;
    }
  };

  /// Greedy evaluation episode (no exploration, no mixer).
  EpisodeRecord execute(Environment& env, Rng env_rng, std::uint64_t episode = 0) {
    Actor actor(*this, Rng(), params_.use_mask);
    return run_episode(env, env_rng, actor, seed_, episode);
  }

  // -- persistence ----------------------------------------------------------

  static constexpr char kMagic[8] = {'U', 'A', 'V', 'A', 'O', 'I', 'C', 'K'};
  static constexpr std::uint32_t kVersion = 1;

  void save(const std::string& path, const nlohmann::json& extra = {}) {
    nlohmann::json header;
    header["algorithm"] = to_string(algo_);
    header["seed"] = seed_;
    header["config_hash"] = hex64(config_hash(cfg_));
    header["config"] = uavaoi::to_json(cfg_);
    header["learner"] = uavaoi::to_json(params_);
    header["updates"] = updates_;
    header["env_steps"] = env_steps_;
    header["episodes_done"] = episodes_done_;
    header["adam_steps"] = optimizer_.steps();
    header["scalar_bytes"] = sizeof(S);
    header["extra"] = extra;
    nlohmann::json shapes = nlohmann::json::array();
    for (auto* p : online_params()) shapes.push_back({p->name, p->value.rows(), p->value.cols()});
    header["params"] = shapes;
    const std::string text = header.dump();

    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
      out.write(kMagic, 8);
      write_pod(out, kVersion);
      write_pod(out, static_cast<std::uint64_t>(text.size()));
      out.write(text.data(), static_cast<std::streamsize>(text.size()));
      auto dump = [&](const Mat<S>& m) {
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(S)));
      };
      for (auto* p : online_params()) dump(p->value);
      for (auto* p : target_params()) dump(p->value);
      for (auto& m : optimizer_.first_moments()) dump(m);
      for (auto& v : optimizer_.second_moments()) dump(v);
      if (!out) fail(ErrorCode::kIo, "write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) fail(ErrorCode::kIo, "cannot rename " + tmp);
  }

  /// Reads a checkpoint header without loading tensors.
  static nlohmann::json read_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open " + path);
    return read_header(in, path);
  }

  void load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open " + path);
    const nlohmann::json h = read_header(in, path);
    if (h.at("algorithm") != to_string(algo_) || h.at("config_hash") != hex64(config_hash(cfg_)) ||
        h.at("scalar_bytes").get<std::size_t>() != sizeof(S)) {
      fail(ErrorCode::kIo, path + ": checkpoint does not match this learner");
    }
    auto ps = online_params();
    const auto& shapes = h.at("params");
    if (shapes.size() != ps.size()) fail(ErrorCode::kIo, path + ": parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (shapes[i][0] != ps[i]->name || shapes[i][1] != ps[i]->value.rows() || shapes[i][2] != ps[i]->value.cols()) {
        fail(ErrorCode::kIo, path + ": shape mismatch at " + ps[i]->name);
      }
    }
    auto slurp = [&](Mat<S>& m) {
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(S)));
    };
    for (auto* p : ps) slurp(p->value);
    for (auto* p : target_params()) slurp(p->value);
    for (auto& m : optimizer_.first_moments()) slurp(m);
    for (auto& v : optimizer_.second_moments()) slurp(v);
    if (!in) fail(ErrorCode::kIo, path + ": truncated checkpoint");
    updates_ = h.at("updates");
    env_steps_ = h.at("env_steps");
    episodes_done_ = h.at("episodes_done");
    optimizer_.set_steps(h.at("adam_steps"));
  }

 private:
  template <typename T>
  static void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  static nlohmann::json read_header(std::istream& in, const std::string& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) fail(ErrorCode::kIo, path + ": not a checkpoint");
    std::uint32_t version = 0;
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || version != kVersion) fail(ErrorCode::kIo, path + ": unsupported checkpoint version");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) fail(ErrorCode::kIo, path + ": truncated header");
    return nlohmann::json::parse(text);
  }

  WorldConfig cfg_;
  LearnerParams params_;
  Algorithm algo_;
  std::uint64_t seed_;
  ActionCodec codec_;
  std::vector<std::unique_ptr<AgentNet<S>>> agents_, targets_;
  std::unique_ptr<MixerNet<S>> mixer_, target_mixer_;
  nn::Adam<S> optimizer_;
  std::uint64_t updates_ = 0;
  std::uint64_t env_steps_ = 0;
  int episodes_done_ = 0;
};

}  // namespace uavaoi
