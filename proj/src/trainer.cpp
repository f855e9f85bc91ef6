#include "morphogen/trainer.hpp"

#include "morphogen/batch.hpp"
#include "morphogen/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace morphogen {

namespace {

// Batch columns are processed in fixed-width chunks whose gradients are
// reduced in chunk order; that keeps float summation identical for any
// --threads value.
constexpr Eigen::Index kChunkCols = 32;

template <typename S>
struct TensorView {
  S* data;
  std::size_t n;
};

template <typename S>
std::vector<TensorView<S>> views(ModelParams<S>& p) {
  std::vector<TensorView<S>> v;
  for_each_tensor(p, [&v](auto& t) {
    v.push_back({t.data(), static_cast<std::size_t>(t.size())});
  });
  return v;
}

template <typename S>
void add_scaled(ModelParams<S>& dst, const ModelParams<S>& src, S scale) {
  auto d = views(dst);
  auto s = views(const_cast<ModelParams<S>&>(src));
  for (std::size_t i = 0; i < d.size(); ++i) {
    Eigen::Map<VecX<S>> dm(d[i].data, static_cast<Eigen::Index>(d[i].n));
    Eigen::Map<const VecX<S>> sm(s[i].data, static_cast<Eigen::Index>(s[i].n));
    dm += scale * sm;
  }
}

template <typename S>
void set_zero(ModelParams<S>& p) {
  for_each_tensor(p, [](auto& t) { t.setZero(); });
}

template <typename S>
void scale_params(ModelParams<S>& g, S scale) {
  for_each_tensor(g, [scale](auto& t) { t *= scale; });
}

template <typename S>
struct OptimizerState {
  ModelParams<S> m;  // first moment (Adam) / unused (RMSProp)
  ModelParams<S> v;  // second moment
  long step = 0;
};

template <typename S>
void apply_update(ModelParams<S>& params, const ModelParams<S>& grads,
                  OptimizerState<S>& state, const TrainConfig& tc) {
  ++state.step;
  const S lr = static_cast<S>(tc.learning_rate);
  auto pv = views(params);
  auto gv = views(const_cast<ModelParams<S>&>(grads));
  auto mv = views(state.m);
  auto vv = views(state.v);

  if (tc.optimizer == Optimizer::kAdam) {
    const S b1 = static_cast<S>(tc.adam_beta1);
    const S b2 = static_cast<S>(tc.adam_beta2);
    const S eps = static_cast<S>(tc.adam_eps);
    const S corr1 = static_cast<S>(1.0 - std::pow(tc.adam_beta1, state.step));
    const S corr2 = static_cast<S>(1.0 - std::pow(tc.adam_beta2, state.step));
    for (std::size_t i = 0; i < pv.size(); ++i) {
      Eigen::Map<ArrX<S>> p(pv[i].data, static_cast<Eigen::Index>(pv[i].n));
      Eigen::Map<const ArrX<S>> g(gv[i].data, static_cast<Eigen::Index>(gv[i].n));
      Eigen::Map<ArrX<S>> m(mv[i].data, static_cast<Eigen::Index>(mv[i].n));
      Eigen::Map<ArrX<S>> v(vv[i].data, static_cast<Eigen::Index>(vv[i].n));
      m = b1 * m + (S(1) - b1) * g;
      v = b2 * v + (S(1) - b2) * g * g;
      p -= lr * (m / corr1) / ((v / corr2).sqrt() + eps);
    }
  } else {
    const S rho = static_cast<S>(tc.rms_decay);
    const S eps = static_cast<S>(tc.adam_eps);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      Eigen::Map<ArrX<S>> p(pv[i].data, static_cast<Eigen::Index>(pv[i].n));
      Eigen::Map<const ArrX<S>> g(gv[i].data, static_cast<Eigen::Index>(gv[i].n));
      Eigen::Map<ArrX<S>> v(vv[i].data, static_cast<Eigen::Index>(vv[i].n));
      v = rho * v + (S(1) - rho) * g * g;
      p -= lr * g / (v.sqrt() + eps);
    }
  }
}

struct BatchSlices {
  IdMat ids;
  std::vector<std::int32_t> targets;
};

BatchSlices gather_batch(const SampleSet& samples,
                         const std::vector<std::size_t>& order, std::size_t begin,
                         std::size_t end) {
  const Eigen::Index T = samples.context_length;
  const Eigen::Index B = static_cast<Eigen::Index>(end - begin);
  BatchSlices batch;
  batch.ids.resize(T, B);
  batch.targets.resize(static_cast<std::size_t>(B));
  for (Eigen::Index j = 0; j < B; ++j) {
    const std::size_t s = order[begin + static_cast<std::size_t>(j)];
    auto ctx = samples.context(s);
    std::copy(ctx.begin(), ctx.end(), batch.ids.col(j).data());
    batch.targets[static_cast<std::size_t>(j)] = samples.targets[s];
  }
  return batch;
}

template <typename S>
double chunked_loss_grad(const ModelParams<S>& params, const ModelConfig& cfg,
                         const BatchSlices& batch, int threads,
                         ModelParams<S>& grads) {
  const Eigen::Index B = batch.ids.cols();
  const std::size_t n_chunks =
      static_cast<std::size_t>((B + kChunkCols - 1) / kChunkCols);
  std::vector<ModelParams<S>> chunk_grads(n_chunks);
  std::vector<double> chunk_loss(n_chunks, 0.0);
  std::vector<std::exception_ptr> chunk_error(n_chunks);

  auto run_chunk = [&](std::size_t c) {
    try {
      const Eigen::Index col0 = static_cast<Eigen::Index>(c) * kChunkCols;
      const Eigen::Index cols = std::min<Eigen::Index>(kChunkCols, B - col0);
      IdMat ids = batch.ids.middleCols(col0, cols);
      std::span<const std::int32_t> targets(batch.targets.data() + col0,
                                            static_cast<std::size_t>(cols));
      chunk_grads[c] = zero_params<S>(cfg);
      chunk_loss[c] = batch_loss_grad(params, cfg, ids, targets, chunk_grads[c]);
    } catch (...) {
      chunk_error[c] = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n_chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t c = static_cast<std::size_t>(w); c < n_chunks;
             c += static_cast<std::size_t>(workers))
          run_chunk(c);
      });
    }
    for (auto& t : pool) t.join();
  }

  double loss = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    if (chunk_error[c]) std::rethrow_exception(chunk_error[c]);
    add_scaled(grads, chunk_grads[c], S(1));
    loss += chunk_loss[c];
  }
  return loss;
}

void validate_samples(const SampleSet& samples, const ModelConfig& cfg) {
  if (samples.size() == 0) throw TrainError("empty sample set");
  if (samples.context_length != cfg.max_length)
    throw TrainError("sample context length " +
                     std::to_string(samples.context_length) +
                     " != model max_length " + std::to_string(cfg.max_length));
  for (std::int32_t id : samples.contexts) {
    if (id < 0 || id >= cfg.vocab_size)
      throw TrainError("context id out of range: " + std::to_string(id));
  }
  for (std::int32_t id : samples.targets) {
    if (id < 0 || id >= cfg.vocab_size)
      throw TrainError("target id out of range: " + std::to_string(id));
  }
}

template <typename S>
TrainReport train_impl(ModelParams<double>& params64, const ModelConfig& cfg,
                       const SampleSet& samples, const TrainConfig& tc,
                       const EpochCallback& callback) {
  ModelParams<S> params = cast_params<S>(params64);
  OptimizerState<S> opt{zero_params<S>(cfg), zero_params<S>(cfg), 0};
  ModelParams<S> grads = zero_params<S>(cfg);

  TrainReport report;
  report.config = tc;
  report.sample_count = samples.size();

  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(tc.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < n;
         begin += static_cast<std::size_t>(tc.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(n, begin + static_cast<std::size_t>(tc.batch_size));
      BatchSlices batch = gather_batch(samples, order, begin, end);
      set_zero(grads);
      const double batch_loss =
          chunked_loss_grad(params, cfg, batch, tc.threads, grads);
      const double batch_mean = batch_loss / static_cast<double>(end - begin);
      if (!std::isfinite(batch_mean))
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch_index) + ": " +
                         std::to_string(batch_mean));
      // Updates use the batch-mean gradient.
      scale_params(grads, S(1.0 / static_cast<double>(end - begin)));
      clip_global_norm(grads, tc.grad_clip_norm);
      apply_update(params, grads, opt, tc);
      loss_sum += batch_loss;
    }

    const auto t1 = std::chrono::steady_clock::now();
    report.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    report.epoch_seconds.push_back(
        std::chrono::duration<double>(t1 - t0).count());
    if (callback) {
      params64 = cast_params<double>(params);
      callback(epoch, report.epoch_loss.back(), params64);
    }
  }
  params64 = cast_params<double>(params);
  return report;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate >= 0)) throw ValidationError("learning_rate must be >= 0");
  if (threads < 1) throw ValidationError("threads must be >= 1");
}

std::string to_string(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "rmsprop";
}
std::string to_string(Precision p) {
  return p == Precision::kFloat32 ? "f32" : "f64";
}
Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "rmsprop") return Optimizer::kRmsProp;
  throw ValidationError("unknown optimizer: " + s);
}
Precision precision_from_string(const std::string& s) {
  if (s == "f32" || s == "float32" || s == "32") return Precision::kFloat32;
  if (s == "f64" || s == "float64" || s == "64") return Precision::kFloat64;
  throw ValidationError("unknown precision: " + s);
}

std::string train_report_to_json(const TrainReport& report, bool include_timing) {
  nlohmann::json j;
  j["epoch_loss"] = report.epoch_loss;
  j["epoch_seconds"] = include_timing
                           ? report.epoch_seconds
                           : std::vector<double>(report.epoch_seconds.size(), 0.0);
  j["sample_count"] = report.sample_count;
  j["checkpoint_path"] = report.checkpoint_path;
  j["config"] = {{"epochs", report.config.epochs},
                 {"batch_size", report.config.batch_size},
                 {"learning_rate", report.config.learning_rate},
                 {"optimizer", to_string(report.config.optimizer)},
                 {"adam_beta1", report.config.adam_beta1},
                 {"adam_beta2", report.config.adam_beta2},
                 {"adam_eps", report.config.adam_eps},
                 {"rms_decay", report.config.rms_decay},
                 {"grad_clip_norm", report.config.grad_clip_norm},
                 {"shuffle_seed", report.config.shuffle_seed},
                 {"precision", to_string(report.config.precision)},
                 {"threads", report.config.threads}};
  return j.dump(2);
}

TrainReport train(ModelParams<double>& params, const ModelConfig& cfg,
                  const SampleSet& samples, const TrainConfig& tc,
                  const EpochCallback& callback) {
  cfg.validate();
  tc.validate();
  validate_samples(samples, cfg);
  if (tc.precision == Precision::kFloat64)
    return train_impl<double>(params, cfg, samples, tc, callback);
  return train_impl<float>(params, cfg, samples, tc, callback);
}

std::pair<TrainReport, TrainReport> pretrain_finetune(
    ModelParams<double>& params, const ModelConfig& cfg, const SampleSet& pretrain,
    const SampleSet& finetune, const TrainConfig& tc_pre, const TrainConfig& tc_fine,
    const EpochCallback& pre_callback, const EpochCallback& fine_callback) {
  // Either phase may be given 0 epochs and becomes a no-op (the weights pass
  // through unchanged); a phase that does run starts from fresh optimizer
  // state.
  auto run_phase = [&](const SampleSet& samples, const TrainConfig& tc,
                       const EpochCallback& cb) {
    if (tc.epochs == 0) {
      TrainReport report;
      report.config = tc;
      report.sample_count = samples.size();
      return report;
    }
    return train(params, cfg, samples, tc, cb);
  };
  TrainReport pre = run_phase(pretrain, tc_pre, pre_callback);
  TrainReport fine = run_phase(finetune, tc_fine, fine_callback);
  return {std::move(pre), std::move(fine)};
}

}  // namespace morphogen
