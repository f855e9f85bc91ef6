#pragma once

#include "morphogen/model.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace morphogen {

// Batched forward/backward over B samples at once, one column per sample, so
// every timestep update is a GEMM. Semantics match the per-sample reference
// ops in nn.hpp column for column; the unit tests assert that, and finite
// differences check the gradients end to end.

template <typename S>
struct LstmStepCache {
  // Indexed by step order k (k = 0 is the first step the direction takes).
  std::vector<MatX<S>> gates;  // 4H x B post-activation [i; f; g; o]
  std::vector<MatX<S>> c_new;  // H x B cell candidate
  std::vector<MatX<S>> tc;     // tanh(c_new)
  std::vector<MatX<S>> hs;     // T+1 states entering step k
  std::vector<MatX<S>> cs;

  void resize(Eigen::Index T) {
    gates.resize(static_cast<std::size_t>(T));
    c_new.resize(static_cast<std::size_t>(T));
    tc.resize(static_cast<std::size_t>(T));
    hs.resize(static_cast<std::size_t>(T) + 1);
    cs.resize(static_cast<std::size_t>(T) + 1);
  }
};

template <typename S>
struct BatchCache {
  MatX<S> mask;                                  // T x B of {0,1}
  std::vector<MatX<S>> emb;                      // T of embed_dim x B
  std::vector<std::vector<MatX<S>>> layer_out;   // per layer, T of width x B
  std::vector<LstmStepCache<S>> fwd;             // per layer
  std::vector<LstmStepCache<S>> bwd;
  std::vector<MatX<S>> features;                 // T of feature_dim x B
  MatX<S> alpha;                                 // T x B attention weights
  MatX<S> pooled;                                // feature_dim x B
  MatX<S> probs;                                 // V x B
};

/// Mask matrix from a batch of contexts: 1 where the id is not PAD; a
/// PAD-only column unmasks its final position.
template <typename S>
MatX<S> batch_mask(const IdMat& ids) {
  const Eigen::Index T = ids.rows(), B = ids.cols();
  MatX<S> mask(T, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    bool any = false;
    for (Eigen::Index t = 0; t < T; ++t) {
      const bool real = ids(t, j) != CharVocab::kPadId;
      mask(t, j) = real ? S(1) : S(0);
      any = any || real;
    }
    if (!any && T > 0) mask(T - 1, j) = S(1);
  }
  return mask;
}

namespace detail {

template <typename S>
void lstm_dir_forward(const std::vector<MatX<S>>& xs, const LstmWeights<S>& w,
                      const MatX<S>& mask, bool reverse, LstmStepCache<S>& cache,
                      std::vector<MatX<S>>& out, Eigen::Index out_row0) {
  const Eigen::Index T = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index B = xs[0].cols();
  const Eigen::Index H = w.hidden_size();
  cache.resize(T);
  cache.hs[0] = MatX<S>::Zero(H, B);
  cache.cs[0] = MatX<S>::Zero(H, B);

  MatX<S> a(4 * H, B);
  for (Eigen::Index k = 0; k < T; ++k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    const std::size_t ku = static_cast<std::size_t>(k);
    a.noalias() = w.W * xs[static_cast<std::size_t>(t)];
    a.noalias() += w.U * cache.hs[ku];
    a.colwise() += w.b;
    {
      auto ifo_top = a.topRows(H).array();
      ifo_top = S(1) / (S(1) + (-ifo_top).exp());
      auto ifo_f = a.middleRows(H, H).array();
      ifo_f = S(1) / (S(1) + (-ifo_f).exp());
      auto g = a.middleRows(2 * H, H).array();
      g = g.tanh();
      auto ifo_o = a.middleRows(3 * H, H).array();
      ifo_o = S(1) / (S(1) + (-ifo_o).exp());
    }
    cache.gates[ku] = a;
    const auto i = a.topRows(H).array();
    const auto f = a.middleRows(H, H).array();
    const auto g = a.middleRows(2 * H, H).array();
    const auto o = a.middleRows(3 * H, H).array();

    cache.c_new[ku] = (f * cache.cs[ku].array() + i * g).matrix();
    cache.tc[ku] = cache.c_new[ku].array().tanh().matrix();
    MatX<S> h_new = (o * cache.tc[ku].array()).matrix();

    const auto m = mask.row(t).array();
    out[static_cast<std::size_t>(t)].middleRows(out_row0, H) =
        (h_new.array().rowwise() * m).matrix();
    cache.hs[ku + 1] = (h_new.array().rowwise() * m +
                        cache.hs[ku].array().rowwise() * (S(1) - m))
                           .matrix();
    cache.cs[ku + 1] = (cache.c_new[ku].array().rowwise() * m +
                        cache.cs[ku].array().rowwise() * (S(1) - m))
                           .matrix();
  }
}

template <typename S>
void lstm_dir_backward(const std::vector<MatX<S>>& xs, const LstmWeights<S>& w,
                       const MatX<S>& mask, bool reverse,
                       const LstmStepCache<S>& cache,
                       const std::vector<MatX<S>>& dout, Eigen::Index row0,
                       LstmWeights<S>& gw, std::vector<MatX<S>>& dxs) {
  const Eigen::Index T = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index B = xs[0].cols();
  const Eigen::Index H = w.hidden_size();

  MatX<S> dh = MatX<S>::Zero(H, B);
  MatX<S> dc = MatX<S>::Zero(H, B);
  MatX<S> da(4 * H, B);
  for (Eigen::Index k = T - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    const std::size_t ku = static_cast<std::size_t>(k);
    const auto m = mask.row(t).array();
    const auto& gates = cache.gates[ku];
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto g = gates.middleRows(2 * H, H).array();
    const auto o = gates.middleRows(3 * H, H).array();
    const auto tc = cache.tc[ku].array();

    // h_new feeds both the output row and the next state; both are gated.
    MatX<S> dh_new =
        ((dh.array() + dout[static_cast<std::size_t>(t)].middleRows(row0, H).array())
             .rowwise() *
         m)
            .matrix();
    MatX<S> dcc =
        ((dc.array().rowwise() * m) + dh_new.array() * o * (S(1) - tc * tc))
            .matrix();
    da.topRows(H) = (dcc.array() * g * i * (S(1) - i)).matrix();
    da.middleRows(H, H) =
        (dcc.array() * cache.cs[ku].array() * f * (S(1) - f)).matrix();
    da.middleRows(2 * H, H) = (dcc.array() * i * (S(1) - g * g)).matrix();
    da.middleRows(3 * H, H) =
        (dh_new.array() * tc * o * (S(1) - o)).matrix();

    gw.W.noalias() += da * xs[static_cast<std::size_t>(t)].transpose();
    gw.U.noalias() += da * cache.hs[ku].transpose();
    gw.b.noalias() += da.rowwise().sum();
    dxs[static_cast<std::size_t>(t)].noalias() += w.W.transpose() * da;

    // Pass-through for masked columns plus the cell's own recurrent grads.
    MatX<S> dh_pass = (dh.array().rowwise() * (S(1) - m)).matrix();
    dh.noalias() = w.U.transpose() * da;
    dh += dh_pass;
    MatX<S> dc_pass = (dc.array().rowwise() * (S(1) - m)).matrix();
    dc = (dcc.array() * f).matrix();
    dc += dc_pass;
  }
}

}  // namespace detail

/// Forward pass over a batch of contexts; fills the cache and returns
/// per-column probability distributions (V x B).
template <typename S>
const MatX<S>& batch_forward(const ModelParams<S>& params, const ModelConfig& cfg,
                             const IdMat& ids, BatchCache<S>& cache) {
  const Eigen::Index T = ids.rows(), B = ids.cols();
  if (T != cfg.max_length) throw DimensionError("batch_forward: bad context length");
  const Eigen::Index D = cfg.embed_dim;
  const Eigen::Index W = cfg.layer_output_dim();
  const Eigen::Index L = cfg.lstm_layers;
  const Eigen::Index Df = cfg.feature_dim();
  const Eigen::Index H = cfg.lstm_units;

  cache.mask = batch_mask<S>(ids);

  cache.emb.assign(static_cast<std::size_t>(T), MatX<S>(D, B));
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index j = 0; j < B; ++j) {
      const std::int32_t id = ids(t, j);
      if (id < 0 || id >= params.embedding.rows())
        throw EncodingError("embedding id out of range: " + std::to_string(id));
      cache.emb[static_cast<std::size_t>(t)].col(j) =
          params.embedding.row(id).transpose();
    }
  }

  cache.layer_out.assign(static_cast<std::size_t>(L),
                         std::vector<MatX<S>>(static_cast<std::size_t>(T)));
  cache.fwd.assign(static_cast<std::size_t>(L), {});
  cache.bwd.assign(static_cast<std::size_t>(L), {});
  for (Eigen::Index l = 0; l < L; ++l) {
    auto& out = cache.layer_out[static_cast<std::size_t>(l)];
    for (auto& o : out) o.setZero(W, B);
    const auto& xs = l == 0 ? cache.emb : cache.layer_out[static_cast<std::size_t>(l - 1)];
    detail::lstm_dir_forward(xs, params.lstm_fwd[static_cast<std::size_t>(l)],
                             cache.mask, false,
                             cache.fwd[static_cast<std::size_t>(l)], out, 0);
    if (cfg.bidirectional) {
      detail::lstm_dir_forward(xs, params.lstm_bwd[static_cast<std::size_t>(l)],
                               cache.mask, true,
                               cache.bwd[static_cast<std::size_t>(l)], out, H);
    }
  }

  cache.features.assign(static_cast<std::size_t>(T), MatX<S>(Df, B));
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& ft = cache.features[static_cast<std::size_t>(t)];
    ft.topRows(D) = cache.emb[static_cast<std::size_t>(t)];
    for (Eigen::Index l = 0; l < L; ++l)
      ft.middleRows(D + l * W, W) =
          cache.layer_out[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)];
  }

  // Attention: scalar logit per (t, column), softmax over unmasked steps.
  MatX<S> u(T, B);
  for (Eigen::Index t = 0; t < T; ++t)
    u.row(t) = params.attention.w.transpose() *
               cache.features[static_cast<std::size_t>(t)];
  u.array() += params.attention.b(0);
  const S kFar = S(1e30);
  MatX<S> u_eff = u - (MatX<S>::Constant(T, B, S(1)) - cache.mask) * kFar;
  Eigen::Matrix<S, 1, Eigen::Dynamic> umax = u_eff.colwise().maxCoeff();
  cache.alpha =
      ((u_eff.rowwise() - umax).array().exp() * cache.mask.array()).matrix();
  Eigen::Matrix<S, 1, Eigen::Dynamic> asum = cache.alpha.colwise().sum();
  cache.alpha.array().rowwise() /= asum.array();

  cache.pooled.setZero(Df, B);
  for (Eigen::Index t = 0; t < T; ++t)
    cache.pooled.array() += cache.features[static_cast<std::size_t>(t)].array().rowwise() *
                            cache.alpha.row(t).array();

  MatX<S> logits = params.out_w * cache.pooled;
  logits.colwise() += params.out_b;
  Eigen::Matrix<S, 1, Eigen::Dynamic> lmax = logits.colwise().maxCoeff();
  cache.probs = (logits.rowwise() - lmax).array().exp().matrix();
  Eigen::Matrix<S, 1, Eigen::Dynamic> psum = cache.probs.colwise().sum();
  cache.probs.array().rowwise() /= psum.array();
  return cache.probs;
}

/// Sum of per-sample cross-entropies for the batch plus parameter gradients
/// of that sum, accumulated into `grads` (which must be zero_params-shaped).
template <typename S>
double batch_loss_grad(const ModelParams<S>& params, const ModelConfig& cfg,
                       const IdMat& ids, std::span<const std::int32_t> targets,
                       ModelGrads<S>& grads) {
  const Eigen::Index B = ids.cols();
  if (static_cast<Eigen::Index>(targets.size()) != B)
    throw DimensionError("batch_loss_grad: target count mismatch");

  BatchCache<S> cache;
  batch_forward(params, cfg, ids, cache);
  const Eigen::Index T = ids.rows();
  const Eigen::Index D = cfg.embed_dim;
  const Eigen::Index W = cfg.layer_output_dim();
  const Eigen::Index L = cfg.lstm_layers;
  const Eigen::Index H = cfg.lstm_units;

  double loss = 0.0;
  MatX<S> dlogits = cache.probs;
  for (Eigen::Index j = 0; j < B; ++j) {
    const std::int32_t tgt = targets[static_cast<std::size_t>(j)];
    if (tgt < 0 || tgt >= cache.probs.rows())
      throw ValidationError("batch_loss_grad: target out of range");
    loss -= std::log(std::max(static_cast<double>(cache.probs(tgt, j)), 1e-12));
    dlogits(tgt, j) -= S(1);
  }

  grads.out_w.noalias() += dlogits * cache.pooled.transpose();
  grads.out_b.noalias() += dlogits.rowwise().sum();
  MatX<S> dpooled = params.out_w.transpose() * dlogits;

  // Attention backward.
  MatX<S> dalpha(T, B);
  std::vector<MatX<S>> dfeat(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& ft = cache.features[static_cast<std::size_t>(t)];
    dalpha.row(t) = (ft.array() * dpooled.array()).colwise().sum().matrix();
    dfeat[static_cast<std::size_t>(t)] =
        (dpooled.array().rowwise() * cache.alpha.row(t).array()).matrix();
  }
  Eigen::Matrix<S, 1, Eigen::Dynamic> srow =
      (cache.alpha.array() * dalpha.array()).colwise().sum().matrix();
  MatX<S> du =
      (cache.alpha.array() * (dalpha.array().rowwise() - srow.array())).matrix();
  for (Eigen::Index t = 0; t < T; ++t) {
    grads.attention.w.noalias() +=
        cache.features[static_cast<std::size_t>(t)] * du.row(t).transpose();
    dfeat[static_cast<std::size_t>(t)].noalias() +=
        params.attention.w * du.row(t);
  }
  grads.attention.b(0) += du.sum();

  // Split feature grads into the embedding skip-connection and the per-layer
  // output slices, then run the layers backward from the top.
  std::vector<MatX<S>> demb(static_cast<std::size_t>(T));
  std::vector<std::vector<MatX<S>>> dout(static_cast<std::size_t>(L));
  for (Eigen::Index t = 0; t < T; ++t)
    demb[static_cast<std::size_t>(t)] = dfeat[static_cast<std::size_t>(t)].topRows(D);
  for (Eigen::Index l = 0; l < L; ++l) {
    auto& slice = dout[static_cast<std::size_t>(l)];
    slice.resize(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t)
      slice[static_cast<std::size_t>(t)] =
          dfeat[static_cast<std::size_t>(t)].middleRows(D + l * W, W);
  }

  for (Eigen::Index l = L - 1; l >= 0; --l) {
    const auto& xs =
        l == 0 ? cache.emb : cache.layer_out[static_cast<std::size_t>(l - 1)];
    auto& dxs = l == 0 ? demb : dout[static_cast<std::size_t>(l - 1)];
    detail::lstm_dir_backward(xs, params.lstm_fwd[static_cast<std::size_t>(l)],
                              cache.mask, false, cache.fwd[static_cast<std::size_t>(l)],
                              dout[static_cast<std::size_t>(l)], 0,
                              grads.lstm_fwd[static_cast<std::size_t>(l)], dxs);
    if (cfg.bidirectional) {
      detail::lstm_dir_backward(xs, params.lstm_bwd[static_cast<std::size_t>(l)],
                                cache.mask, true, cache.bwd[static_cast<std::size_t>(l)],
                                dout[static_cast<std::size_t>(l)], H,
                                grads.lstm_bwd[static_cast<std::size_t>(l)], dxs);
    }
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& de = demb[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < B; ++j)
      grads.embedding.row(ids(t, j)) += de.col(j).transpose();
  }
  return loss;
}

/// Convenience single-sample wrappers for gradient checking.
inline IdMat context_to_ids(std::span<const std::int32_t> context) {
  IdMat ids(static_cast<Eigen::Index>(context.size()), 1);
  for (std::size_t t = 0; t < context.size(); ++t)
    ids(static_cast<Eigen::Index>(t), 0) = context[t];
  return ids;
}

}  // namespace morphogen
