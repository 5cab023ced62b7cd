#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "uavaoi/error.hpp"
#include "uavaoi/rng.hpp"

namespace uavaoi::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// A trainable tensor with its gradient accumulator.
template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;

  Param() = default;
  Param(std::string n, int rows, int cols) : name(std::move(n)), value(Mat<S>::Zero(rows, cols)), grad(Mat<S>::Zero(rows, cols)) {}

  void uniform_init(double bound, Rng& rng) {
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  }
};

template <typename S>
using ParamList = std::vector<Param<S>*>;

template <typename S>
void zero_grad(const ParamList<S>& ps) {
  for (auto* p : ps) p->grad.setZero();
}

template <typename S>
std::size_t param_count(const ParamList<S>& ps) {
  std::size_t n = 0;
  for (auto* p : ps) n += static_cast<std::size_t>(p->value.size());
  return n;
}

/// dst := src, parameter by parameter (shapes must agree).
template <typename S>
void copy_params(const ParamList<S>& dst, const ParamList<S>& src) {
  if (dst.size() != src.size()) fail(ErrorCode::kDimensionMismatch, "parameter lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.rows() != src[i]->value.rows() || dst[i]->value.cols() != src[i]->value.cols()) {
      fail(ErrorCode::kDimensionMismatch, "shape mismatch in " + dst[i]->name);
    }
    dst[i]->value = src[i]->value;
  }
}

/// Global L2 norm of all gradients, rescaled to at most `max_norm`.
template <typename S>
double clip_grad_norm(const ParamList<S>& ps, double max_norm) {
  double sq = 0.0;
  for (auto* p : ps) sq += static_cast<double>(p->grad.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / (norm + 1e-6));
    for (auto* p : ps) p->grad *= scale;
  }
  return norm;
}

template <typename S>
Mat<S> logistic(const Mat<S>& x) {
  return (S(1) / (S(1) + (-x.array()).exp())).matrix();
}

// ---------------------------------------------------------------------------

/// y = W x + b, columns are samples.
template <typename S>
struct Linear {
  Param<S> W;
  Param<S> b;

  Linear() = default;
  Linear(const std::string& name, int in, int out) : W(name + ".W", out, in), b(name + ".b", out, 1) {}

  int in_dim() const { return static_cast<int>(W.value.cols()); }
  int out_dim() const { return static_cast<int>(W.value.rows()); }

  /// PyTorch's default: U(-1/sqrt(in), 1/sqrt(in)) for weights and bias.
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    W.uniform_init(bound, rng);
    b.uniform_init(bound, rng);
  }

  Mat<S> forward(const Mat<S>& x) const {
    if (x.rows() != W.value.cols()) fail(ErrorCode::kDimensionMismatch, W.name + ": input rows " + std::to_string(x.rows()));
    Mat<S> y = W.value * x;
    y.colwise() += b.value.col(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx when `want_input_grad`.
  Mat<S> backward(const Mat<S>& x, const Mat<S>& dy, bool want_input_grad = true) {
    W.grad.noalias() += dy * x.transpose();
    b.grad.col(0) += dy.rowwise().sum().transpose();
    if (!want_input_grad) return {};
    return W.value.transpose() * dy;
  }

  void collect(ParamList<S>& ps) {
    ps.push_back(&W);
    ps.push_back(&b);
  }
};

/// Gated recurrent cell with reset gate r, update gate z and candidate n:
///   r = sig(Wi_r x + bi_r + Wh_r h + bh_r)
///   z = sig(Wi_z x + bi_z + Wh_z h + bh_z)
///   n = tanh(Wi_n x + bi_n + r * (Wh_n h + bh_n))
///   h' = (1 - z) * n + z * h
/// Gate blocks are stacked in the order r, z, n.
template <typename S>
struct GruCell {
  Param<S> Wi, Wh, bi, bh;
  int hidden = 0;

  struct Cache {
    Mat<S> x, h, r, z, n, hn;  // hn = Wh_n h + bh_n
  };

  GruCell() = default;
  GruCell(const std::string& name, int in, int hid)
      : Wi(name + ".Wi", 3 * hid, in), Wh(name + ".Wh", 3 * hid, hid), bi(name + ".bi", 3 * hid, 1),
        bh(name + ".bh", 3 * hid, 1), hidden(hid) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    Wi.uniform_init(bound, rng);
    Wh.uniform_init(bound, rng);
    bi.uniform_init(bound, rng);
    bh.uniform_init(bound, rng);
  }

  Mat<S> forward(const Mat<S>& x, const Mat<S>& h, Cache* cache = nullptr) const {
    const int H = hidden;
    Mat<S> gi = Wi.value * x;
    gi.colwise() += bi.value.col(0);
    Mat<S> gh = Wh.value * h;
    gh.colwise() += bh.value.col(0);
    const Mat<S> r = logistic<S>(gi.topRows(H) + gh.topRows(H));
    const Mat<S> z = logistic<S>(gi.middleRows(H, H) + gh.middleRows(H, H));
    const Mat<S> hn = gh.bottomRows(H);
    const Mat<S> n = (gi.bottomRows(H).array() + r.array() * hn.array()).tanh();
    Mat<S> out = ((S(1) - z.array()) * n.array() + z.array() * h.array()).matrix();
    if (cache) {
      cache->x = x;
      cache->h = h;
      cache->r = r;
      cache->z = z;
      cache->n = n;
      cache->hn = hn;
    }
    return out;
  }

  /// Given dL/dh', accumulates gradients and returns (dL/dx, dL/dh).
  std::pair<Mat<S>, Mat<S>> backward(const Cache& c, const Mat<S>& dout, bool want_input_grad = true) {
    const int H = hidden;
    const auto one = S(1);
    const Mat<S> dn = (dout.array() * (one - c.z.array())).matrix();
    const Mat<S> dz = (dout.array() * (c.h.array() - c.n.array())).matrix();
    Mat<S> dh = (dout.array() * c.z.array()).matrix();
    const Mat<S> dn_pre = (dn.array() * (one - c.n.array().square())).matrix();
    const Mat<S> dr = (dn_pre.array() * c.hn.array()).matrix();
    const Mat<S> dz_pre = (dz.array() * c.z.array() * (one - c.z.array())).matrix();
    const Mat<S> dr_pre = (dr.array() * c.r.array() * (one - c.r.array())).matrix();

    const Eigen::Index cols = dout.cols();
    Mat<S> dgi(3 * H, cols), dgh(3 * H, cols);
    dgi.topRows(H) = dr_pre;
    dgi.middleRows(H, H) = dz_pre;
    dgi.bottomRows(H) = dn_pre;
    dgh.topRows(H) = dr_pre;
    dgh.middleRows(H, H) = dz_pre;
    dgh.bottomRows(H) = (dn_pre.array() * c.r.array()).matrix();

    Wi.grad.noalias() += dgi * c.x.transpose();
    bi.grad.col(0) += dgi.rowwise().sum().transpose();
    Wh.grad.noalias() += dgh * c.h.transpose();
    bh.grad.col(0) += dgh.rowwise().sum().transpose();
    dh.noalias() += Wh.value.transpose() * dgh;
    Mat<S> dx;
    if (want_input_grad) dx = Wi.value.transpose() * dgi;
    return {std::move(dx), std::move(dh)};
  }

  void collect(ParamList<S>& ps) {
    ps.push_back(&Wi);
    ps.push_back(&Wh);
    ps.push_back(&bi);
    ps.push_back(&bh);
  }
};

// ---------------------------------------------------------------------------

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction, as in Kingma & Ba.
template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamList<S>& ps, AdamOptions opt) : params_(ps), opt_(opt) {
    for (auto* p : ps) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const S b1 = static_cast<S>(opt_.beta1), b2 = static_cast<S>(opt_.beta2);
    const S step = static_cast<S>(opt_.lr / c1);
    const S eps = static_cast<S>(opt_.eps);
    const S inv_sqrt_c2 = static_cast<S>(1.0 / std::sqrt(c2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& g = params_[i]->grad;
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseAbs2();
      params_[i]->value.array() -= step * m_[i].array() / ((v_[i].array().sqrt() * inv_sqrt_c2) + eps);
    }
  }

  std::uint64_t steps() const { return t_; }
  std::vector<Mat<S>>& first_moments() { return m_; }
  std::vector<Mat<S>>& second_moments() { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const AdamOptions& options() const { return opt_; }

 private:
  ParamList<S> params_;
  AdamOptions opt_;
  std::vector<Mat<S>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace uavaoi::nn
