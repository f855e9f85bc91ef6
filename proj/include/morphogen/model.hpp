#pragma once

#include "morphogen/nn.hpp"
#include "morphogen/rng.hpp"
#include "morphogen/types.hpp"
#include "morphogen/vocab.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace morphogen {

/// Network hyperparameters. Defaults mirror the reference configuration:
/// 40-character context, 100-D embedding, two bi-directional 128-unit LSTM
/// layers. vocab_size must be set from the corpus (PAD + EOL + characters).
struct ModelConfig {
  std::int32_t max_length = 40;
  std::int32_t embed_dim = 100;
  std::int32_t lstm_units = 128;
  std::int32_t lstm_layers = 2;
  bool bidirectional = true;
  std::int32_t vocab_size = 0;
  std::uint64_t seed = 0;

  void validate() const;

  std::int32_t directions() const { return bidirectional ? 2 : 1; }
  /// Output width of one LSTM layer (2H when bidirectional).
  std::int32_t layer_output_dim() const { return directions() * lstm_units; }
  /// Input width of LSTM layer `layer` (embedding for layer 0).
  std::int32_t layer_input_dim(std::int32_t layer) const {
    return layer == 0 ? embed_dim : layer_output_dim();
  }
  /// Width of the attention features: embedding skip-connection plus every
  /// LSTM layer's output (100 + 256 + 256 = 612 at defaults).
  std::int32_t feature_dim() const {
    return embed_dim + lstm_layers * layer_output_dim();
  }

  bool operator==(const ModelConfig&) const = default;
};

/// All learned weights. Also reused as the gradient container (same shapes).
template <typename S>
struct ModelParams {
  MatX<S> embedding;                    // V x embed_dim
  std::vector<LstmWeights<S>> lstm_fwd;  // one per layer
  std::vector<LstmWeights<S>> lstm_bwd;  // empty when unidirectional
  AttentionWeights<S> attention;
  MatX<S> out_w;  // V x feature_dim
  VecX<S> out_b;  // V
};

template <typename S>
using ModelGrads = ModelParams<S>;

/// Visits every weight tensor in the fixed canonical order used by the
/// optimizer, the flat parameter view, and the checkpoint manifest:
/// embedding; per layer fwd W,U,b then bwd W,U,b; attention w,b; out W,b.
template <typename S, typename Fn>
void for_each_tensor(ModelParams<S>& p, Fn&& fn) {
  fn(p.embedding);
  for (std::size_t l = 0; l < p.lstm_fwd.size(); ++l) {
    fn(p.lstm_fwd[l].W);
    fn(p.lstm_fwd[l].U);
    fn(p.lstm_fwd[l].b);
    if (l < p.lstm_bwd.size()) {
      fn(p.lstm_bwd[l].W);
      fn(p.lstm_bwd[l].U);
      fn(p.lstm_bwd[l].b);
    }
  }
  fn(p.attention.w);
  fn(p.attention.b);
  fn(p.out_w);
  fn(p.out_b);
}

template <typename S, typename Fn>
void for_each_tensor(const ModelParams<S>& p, Fn&& fn) {
  for_each_tensor(const_cast<ModelParams<S>&>(p),
                  [&fn](auto& t) { fn(std::as_const(t)); });
}

/// Tensor names in canonical order (checkpoint manifest order).
std::vector<std::string> tensor_names(const ModelConfig& cfg);

template <typename S>
ModelParams<S> zero_params(const ModelConfig& cfg) {
  ModelParams<S> p;
  p.embedding = MatX<S>::Zero(cfg.vocab_size, cfg.embed_dim);
  for (std::int32_t l = 0; l < cfg.lstm_layers; ++l) {
    p.lstm_fwd.push_back(
        LstmWeights<S>::zeros(cfg.lstm_units, cfg.layer_input_dim(l)));
    if (cfg.bidirectional)
      p.lstm_bwd.push_back(
          LstmWeights<S>::zeros(cfg.lstm_units, cfg.layer_input_dim(l)));
  }
  p.attention = AttentionWeights<S>::zeros(cfg.feature_dim());
  p.out_w = MatX<S>::Zero(cfg.vocab_size, cfg.feature_dim());
  p.out_b = VecX<S>::Zero(cfg.vocab_size);
  return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.embedding = p.embedding.template cast<To>();
  for (const auto& w : p.lstm_fwd)
    out.lstm_fwd.push_back({w.W.template cast<To>(), w.U.template cast<To>(),
                            w.b.template cast<To>()});
  for (const auto& w : p.lstm_bwd)
    out.lstm_bwd.push_back({w.W.template cast<To>(), w.U.template cast<To>(),
                            w.b.template cast<To>()});
  out.attention.w = p.attention.w.template cast<To>();
  out.attention.b = p.attention.b.template cast<To>();
  out.out_w = p.out_w.template cast<To>();
  out.out_b = p.out_b.template cast<To>();
  return out;
}

template <typename S>
std::size_t param_count(const ModelParams<S>& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&n](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

/// Column-major concatenation of all tensors in canonical order.
template <typename S>
Vecd flatten_params(const ModelParams<S>& p) {
  Vecd flat(static_cast<Eigen::Index>(param_count(p)));
  Eigen::Index off = 0;
  for_each_tensor(p, [&](const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i)
      flat(off + i) = static_cast<double>(t.data()[i]);
    off += t.size();
  });
  return flat;
}

template <typename S>
void unflatten_params(const Vecd& flat, ModelParams<S>& p) {
  if (flat.size() != static_cast<Eigen::Index>(param_count(p)))
    throw DimensionError("unflatten_params: size mismatch");
  Eigen::Index off = 0;
  for_each_tensor(p, [&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<S>(flat(off + i));
    off += t.size();
  });
}

/// Glorot-uniform initialization, limit sqrt(6 / (fan_in + fan_out)) with
/// fan_in = cols and fan_out = rows; LSTM forget-gate biases start at 1,
/// every other bias at 0. Fully determined by cfg.seed.
ModelParams<double> init_model(const ModelConfig& cfg);

/// Attention/LSTM mask for a left-padded context: true where the id is not
/// PAD. A PAD-only context unmasks the final position so the empty-prefix
/// sample stays well-defined.
Mask derive_mask(std::span<const std::int32_t> context);

/// Full per-sample forward pass: embedding -> stacked bi-LSTM layers ->
/// [embedding | layer outputs] concatenation -> attention pooling -> dense
/// softmax over the vocabulary.
Vecd forward(const ModelParams<double>& params, const ModelConfig& cfg,
             std::span<const std::int32_t> context);

// --- Checkpoints (.mgck) ---------------------------------------------------
//
// Binary container: 4-byte magic "MGCK", little-endian u32 header length, a
// JSON header {format_version, config, vocab, tensors: [{name, rows, cols,
// offset, bytes}]}, then raw little-endian float64 tensor data (column-major,
// canonical tensor order). Round-trips bit-exactly.

struct ModelBundle {
  ModelConfig config;
  CharVocab vocab;
  ModelParams<double> params;
};

void save_checkpoint(const ModelParams<double>& params, const ModelConfig& cfg,
                     const CharVocab& vocab, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace morphogen
