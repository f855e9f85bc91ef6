#pragma once

#include "morphogen/model.hpp"
#include "morphogen/vocab.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace morphogen {

enum class Optimizer { kAdam, kRmsProp };
enum class Precision { kFloat32, kFloat64 };

std::string to_string(Optimizer o);
std::string to_string(Precision p);
Optimizer optimizer_from_string(const std::string& s);
Precision precision_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 14;
  int batch_size = 128;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double rms_decay = 0.9;
  double grad_clip_norm = 5.0;  // global L2; <= 0 disables
  std::uint64_t shuffle_seed = 0;
  Precision precision = Precision::kFloat32;
  int threads = 1;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean cross-entropy per sample
  std::vector<double> epoch_seconds;
  std::size_t sample_count = 0;
  TrainConfig config;
  std::string checkpoint_path;  // set by callers that write one
};

/// Serialized report. Wall-clock fields are zeroed when include_timing is
/// false so deterministic runs compare byte-identically.
std::string train_report_to_json(const TrainReport& report,
                                 bool include_timing = true);

template <typename S>
double gradient_global_norm(const ModelGrads<S>& grads) {
  double sq = 0.0;
  for_each_tensor(grads, [&sq](const auto& t) {
    sq += static_cast<double>(t.template cast<double>().squaredNorm());
  });
  return std::sqrt(sq);
}

/// Rescales grads so the global L2 norm is at most clip_norm (no-op when
/// clip_norm <= 0 or the norm is already within it). Returns the pre-clip
/// norm.
template <typename S>
double clip_global_norm(ModelGrads<S>& grads, double clip_norm) {
  const double norm = gradient_global_norm(grads);
  if (clip_norm > 0 && norm > clip_norm) {
    const S scale = static_cast<S>(clip_norm / norm);
    for_each_tensor(grads, [scale](auto& t) { t *= scale; });
  }
  return norm;
}

/// Called after each epoch with the current weights (always 64-bit).
using EpochCallback =
    std::function<void(int epoch, double mean_loss, const ModelParams<double>&)>;

/// Mini-batch training. Each epoch shuffles with a seeded generator, batches
/// the samples, and applies clipped optimizer updates to the mean batch loss.
/// Gradients are accumulated over fixed 32-column chunks and reduced in chunk
/// order, so results are byte-identical for any thread count. Throws
/// TrainError on an empty sample set or a non-finite loss.
TrainReport train(ModelParams<double>& params, const ModelConfig& cfg,
                  const SampleSet& samples, const TrainConfig& tc,
                  const EpochCallback& callback = {});

/// Two training sessions back to back: the fine-tuning phase continues from
/// the pretrained weights but starts from fresh optimizer state. Both sample
/// sets must be encoded with one shared vocabulary covering the union of the
/// two corpora's characters.
std::pair<TrainReport, TrainReport> pretrain_finetune(
    ModelParams<double>& params, const ModelConfig& cfg, const SampleSet& pretrain,
    const SampleSet& finetune, const TrainConfig& tc_pre, const TrainConfig& tc_fine,
    const EpochCallback& pre_callback = {}, const EpochCallback& fine_callback = {});

}  // namespace morphogen
