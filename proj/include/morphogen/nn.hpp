#pragma once

#include "morphogen/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace morphogen {

// Per-sample layer primitives. These are the reference semantics; the batched
// training path in batch.hpp must agree with them column by column (and is
// tested against them). Everything is deterministic given its inputs.

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

/// Gate-stacked LSTM weights, gate order [input, forget, candidate, output]:
/// W is 4H x D, U is 4H x H, b is 4H.
template <typename S>
struct LstmWeights {
  MatX<S> W;
  MatX<S> U;
  VecX<S> b;

  Eigen::Index hidden_size() const { return U.cols(); }
  Eigen::Index input_size() const { return W.cols(); }

  static LstmWeights zeros(Eigen::Index hidden, Eigen::Index input) {
    return {MatX<S>::Zero(4 * hidden, input), MatX<S>::Zero(4 * hidden, hidden),
            VecX<S>::Zero(4 * hidden)};
  }
};

/// Scalar-logit projection for attention pooling; b held as a size-1 vector
/// so parameter traversal treats every weight uniformly.
template <typename S>
struct AttentionWeights {
  VecX<S> w;
  VecX<S> b;

  static AttentionWeights zeros(Eigen::Index dim) {
    return {VecX<S>::Zero(dim), VecX<S>::Zero(1)};
  }
};

template <typename S>
MatX<S> embedding_forward(std::span<const std::int32_t> ids, const MatX<S>& E) {
  MatX<S> out(static_cast<Eigen::Index>(ids.size()), E.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= E.rows())
      throw EncodingError("embedding id out of range: " + std::to_string(ids[t]));
    out.row(static_cast<Eigen::Index>(t)) = E.row(ids[t]);
  }
  return out;
}

/// One LSTM step: i = sig(Wi x + Ui h + bi), f, o likewise, g = tanh(.),
/// c = f.*c_prev + i.*g, h = o.*tanh(c).
template <typename S>
std::pair<VecX<S>, VecX<S>> lstm_cell(const VecX<S>& x, const VecX<S>& h_prev,
                                      const VecX<S>& c_prev,
                                      const LstmWeights<S>& w) {
  const Eigen::Index H = w.hidden_size();
  if (x.size() != w.input_size() || h_prev.size() != H || c_prev.size() != H ||
      w.W.rows() != 4 * H || w.b.size() != 4 * H)
    throw DimensionError("lstm_cell: inconsistent shapes");
  VecX<S> a = w.W * x + w.U * h_prev + w.b;
  ArrX<S> i = a.segment(0, H).array().unaryExpr([](S v) { return sigmoid(v); });
  ArrX<S> f = a.segment(H, H).array().unaryExpr([](S v) { return sigmoid(v); });
  ArrX<S> g = a.segment(2 * H, H).array().tanh();
  ArrX<S> o = a.segment(3 * H, H).array().unaryExpr([](S v) { return sigmoid(v); });
  VecX<S> c = (f * c_prev.array() + i * g).matrix();
  VecX<S> h = (o * c.array().tanh()).matrix();
  return {std::move(h), std::move(c)};
}

/// Bi-directional pass over X (T x D): forward direction runs t = 0..T-1,
/// backward direction t = T-1..0; row t of the result is
/// [h_fwd[t], h_bwd[t]]. Masked (PAD) timesteps pass state through unchanged
/// and emit zero rows.
template <typename S>
MatX<S> bilstm_forward(const MatX<S>& X, const LstmWeights<S>& fwd,
                       const LstmWeights<S>& bwd, const Mask& mask) {
  const Eigen::Index T = X.rows();
  const Eigen::Index H = fwd.hidden_size();
  if (bwd.hidden_size() != H || fwd.input_size() != X.cols() ||
      bwd.input_size() != X.cols() || mask.size() != T)
    throw DimensionError("bilstm_forward: inconsistent shapes");

  MatX<S> out = MatX<S>::Zero(T, 2 * H);
  for (int dir = 0; dir < 2; ++dir) {
    const LstmWeights<S>& w = dir == 0 ? fwd : bwd;
    VecX<S> h = VecX<S>::Zero(H);
    VecX<S> c = VecX<S>::Zero(H);
    for (Eigen::Index step = 0; step < T; ++step) {
      const Eigen::Index t = dir == 0 ? step : T - 1 - step;
      if (!mask(t)) continue;
      VecX<S> x = X.row(t).transpose();
      auto [h_new, c_new] = lstm_cell(x, h, c, w);
      out.row(t).segment(dir * H, H) = h_new.transpose();
      h = std::move(h_new);
      c = std::move(c_new);
    }
  }
  return out;
}

/// Attention-weighted average: scalar logit u_t = w . F[t] + b per unmasked
/// timestep, softmax over those logits, output = sum_t alpha_t F[t]. Masked
/// positions contribute exactly zero. Throws if every position is masked.
template <typename S>
VecX<S> attention_weighted_average(const MatX<S>& F, const AttentionWeights<S>& aw,
                                   const Mask& mask) {
  const Eigen::Index T = F.rows();
  if (aw.w.size() != F.cols() || mask.size() != T)
    throw DimensionError("attention: inconsistent shapes");
  if (!mask.any()) throw ValidationError("attention: all positions masked");

  VecX<S> u = F * aw.w;
  u.array() += aw.b(0);
  S umax = std::numeric_limits<S>::lowest();
  for (Eigen::Index t = 0; t < T; ++t) {
    if (mask(t)) umax = std::max(umax, u(t));
  }
  VecX<S> alpha = VecX<S>::Zero(T);
  S sum = S(0);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!mask(t)) continue;
    alpha(t) = std::exp(u(t) - umax);
    sum += alpha(t);
  }
  alpha /= sum;
  return F.transpose() * alpha;
}

/// Numerically stable softmax (max subtraction).
template <typename S>
VecX<S> softmax(const VecX<S>& logits) {
  VecX<S> p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

template <typename S>
VecX<S> dense_softmax(const VecX<S>& v, const MatX<S>& W, const VecX<S>& b) {
  if (W.cols() != v.size() || W.rows() != b.size())
    throw DimensionError("dense_softmax: inconsistent shapes");
  return softmax<S>(W * v + b);
}

/// -ln p[target], with p clamped below at 1e-12.
template <typename S>
S cross_entropy(const VecX<S>& p, std::int32_t target) {
  if (target < 0 || target >= p.size())
    throw ValidationError("cross_entropy: target out of range");
  return -std::log(std::max(p(target), S(1e-12)));
}

}  // namespace morphogen
