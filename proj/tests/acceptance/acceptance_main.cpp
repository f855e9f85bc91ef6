// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Budgets are wall-clock seconds and are part of the criteria.
//
// The conditional Romanian reproduction runs only when MORPHOGEN_RO_DATASET
// points at the labeled 30k noun corpus; otherwise it reports SKIP.

#include "morphogen/batch.hpp"
#include "morphogen/corpus.hpp"
#include "morphogen/evaluator.hpp"
#include "morphogen/generator.hpp"
#include "morphogen/gradcheck.hpp"
#include "morphogen/model.hpp"
#include "morphogen/trainer.hpp"
#include "morphogen/vocab.hpp"

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace morphogen;

namespace {

int hw_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 2 : static_cast<int>(n);
}

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Failure(message);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

void fill_uniform(Matd& m, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
}
void fill_uniform(Vecd& v, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(lo, hi);
}

// --- 1. Gradient correctness ------------------------------------------------

std::string check_gradient_correctness() {
  ModelConfig cfg;
  cfg.max_length = 6;
  cfg.embed_dim = 4;
  cfg.lstm_units = 3;
  cfg.lstm_layers = 2;
  cfg.vocab_size = 5;
  cfg.seed = 2024;
  auto params = init_model(cfg);

  Rng rng(99);
  IdMat ids(cfg.max_length, 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const Eigen::Index pad = j == 2 ? cfg.max_length : 2 * j;
    for (Eigen::Index t = 0; t < cfg.max_length; ++t)
      ids(t, j) = t < pad ? CharVocab::kPadId
                          : 2 + static_cast<std::int32_t>(rng.below(3));
  }
  const std::vector<std::int32_t> targets = {2, CharVocab::kEolId, 4};
  const Vecd theta = flatten_params(params);
  const auto names = tensor_names(cfg);

  // One loss per sample keeps |loss| small, which keeps the finite-difference
  // rounding noise (machine eps * |loss| / eps) well under the tolerance.
  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
  ModelParams<double> scratch = zero_params<double>(cfg);
  for (Eigen::Index sample = 0; sample < ids.cols(); ++sample) {
    const IdMat one = ids.middleCols(sample, 1);
    const std::vector<std::int32_t> tgt = {
        targets[static_cast<std::size_t>(sample)]};

    ModelGrads<double> grads = zero_params<double>(cfg);
    batch_loss_grad(params, cfg, one, tgt, grads);
    const Vecd analytic = flatten_params(grads);

    auto loss = [&](const Vecd& flat) {
      unflatten_params(flat, scratch);
      BatchCache<double> cache;
      const Matd& probs = batch_forward(scratch, cfg, one, cache);
      return -std::log(std::max(probs(tgt[0], 0), 1e-12));
    };

    Eigen::Index offset = 0;
    std::size_t idx = 0;
    Vecd x = theta;
    for_each_tensor(params, [&](const auto& t) {
      double group_max = 0.0;
      for (Eigen::Index i = offset; i < offset + t.size(); ++i) {
        const double orig = x(i);
        x(i) = orig + 1e-5;
        const double lp = loss(x);
        x(i) = orig - 1e-5;
        const double lm = loss(x);
        x(i) = orig;
        const double gn = (lp - lm) / 2e-5;
        const double ga = analytic(i);
        group_max =
            std::max(group_max, std::abs(ga - gn) /
                                    std::max(1e-8, std::abs(ga) + std::abs(gn)));
      }
      require(group_max < 1e-4, "sample " + std::to_string(sample) + " group " +
                                    names[idx] + " max rel err " +
                                    fmt(group_max) + " >= 1e-4");
      if (group_max > worst) {
        worst = group_max;
        worst_name = names[idx];
      }
      offset += t.size();
      ++idx;
      coords += static_cast<std::size_t>(t.size());
    });
  }
  return "worst group " + worst_name + " rel err " + fmt(worst) + " over " +
         std::to_string(coords) + " sample-coordinates";
}

// --- 2. Layer invariants -----------------------------------------------------

std::string check_layer_invariants() {
  Rng rng(7);
  for (int iter = 0; iter < 1000; ++iter) {
    // Softmax: sums to one, shift invariance.
    Vecd logits(2 + static_cast<Eigen::Index>(rng.below(12)));
    fill_uniform(logits, rng, -30, 30);
    const Vecd p = softmax<double>(logits);
    require(std::abs(p.sum() - 1.0) < 1e-9, "softmax sum deviates");
    const Vecd shifted =
        softmax<double>((logits.array() + rng.uniform(-50, 50)).matrix());
    require((p - shifted).lpNorm<Eigen::Infinity>() < 1e-9,
            "softmax not shift-invariant");

    // Attention: unmasked weights sum to 1, masked steps contribute nothing.
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.below(8));
    const Eigen::Index D = 1 + static_cast<Eigen::Index>(rng.below(6));
    Mask mask(T);
    bool any = false;
    for (Eigen::Index t = 0; t < T; ++t) {
      mask(t) = rng.below(2) == 1;
      any = any || mask(t);
    }
    if (!any) mask(T - 1) = true;
    AttentionWeights<double> aw = AttentionWeights<double>::zeros(D);
    fill_uniform(aw.w, rng, -2, 2);
    aw.b(0) = rng.uniform(-1, 1);
    // Identical unmasked rows, garbage masked rows: the average must return
    // the shared row exactly iff the weights sum to 1 and masked rows get 0.
    Vecd shared(D);
    fill_uniform(shared, rng, -3, 3);
    Matd F(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (mask(t)) {
        F.row(t) = shared.transpose();
      } else {
        for (Eigen::Index k = 0; k < D; ++k) F(t, k) = rng.uniform(-1e6, 1e6);
      }
    }
    const Vecd pooled = attention_weighted_average(F, aw, mask);
    require((pooled - shared).lpNorm<Eigen::Infinity>() < 1e-6,
            "attention weights do not sum to 1 over unmasked steps");

    // Zero-weight LSTM maps any input to zeros.
    const Eigen::Index H = 1 + static_cast<Eigen::Index>(rng.below(5));
    const auto zero = LstmWeights<double>::zeros(H, D);
    Matd X(T, D);
    fill_uniform(X, rng, -5, 5);
    require(bilstm_forward(X, zero, zero, mask).isZero(),
            "zero-weight LSTM emitted nonzero output");
  }

  // Attention weights observed directly in the batched path.
  ModelConfig cfg;
  cfg.max_length = 8;
  cfg.embed_dim = 5;
  cfg.lstm_units = 4;
  cfg.lstm_layers = 2;
  cfg.vocab_size = 6;
  cfg.seed = 5;
  const auto params = init_model(cfg);
  IdMat ids(cfg.max_length, 64);
  for (Eigen::Index j = 0; j < ids.cols(); ++j) {
    const Eigen::Index pad = static_cast<Eigen::Index>(rng.below(9));
    for (Eigen::Index t = 0; t < cfg.max_length; ++t)
      ids(t, j) = t < pad ? CharVocab::kPadId
                          : 2 + static_cast<std::int32_t>(rng.below(4));
  }
  BatchCache<double> cache;
  batch_forward(params, cfg, ids, cache);
  for (Eigen::Index j = 0; j < ids.cols(); ++j) {
    require(std::abs(cache.alpha.col(j).sum() - 1.0) < 1e-6,
            "batched attention weights do not sum to 1");
    for (Eigen::Index t = 0; t < cfg.max_length; ++t) {
      if (cache.mask(t, j) == 0.0)
        require(cache.alpha(t, j) == 0.0, "masked step got attention weight");
    }
  }
  return "1000 randomized cases plus 64 batched columns";
}

// --- 3. Oracle equivalence ---------------------------------------------------

std::string check_oracle_equivalence() {
  Rng rng(11);
  double worst = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    // LSTM cell vs the scalar loop oracle.
    const Eigen::Index H = 1 + static_cast<Eigen::Index>(rng.below(5));
    const Eigen::Index D = 1 + static_cast<Eigen::Index>(rng.below(5));
    LstmWeights<double> w = LstmWeights<double>::zeros(H, D);
    fill_uniform(w.W, rng);
    fill_uniform(w.U, rng);
    fill_uniform(w.b, rng);
    Vecd x(D), h_prev(H), c_prev(H);
    fill_uniform(x, rng);
    fill_uniform(h_prev, rng);
    fill_uniform(c_prev, rng);
    const auto [h, c] = lstm_cell<double>(x, h_prev, c_prev, w);

    std::vector<std::vector<double>> wr(static_cast<std::size_t>(4 * H)),
        ur(static_cast<std::size_t>(4 * H));
    for (Eigen::Index r = 0; r < 4 * H; ++r) {
      for (Eigen::Index k = 0; k < D; ++k)
        wr[static_cast<std::size_t>(r)].push_back(w.W(r, k));
      for (Eigen::Index k = 0; k < H; ++k)
        ur[static_cast<std::size_t>(r)].push_back(w.U(r, k));
    }
    const auto ref = oracle::lstm_cell(
        {x.data(), x.data() + D}, {h_prev.data(), h_prev.data() + H},
        {c_prev.data(), c_prev.data() + H}, wr, ur,
        {w.b.data(), w.b.data() + 4 * H}, static_cast<std::size_t>(H));
    for (Eigen::Index j = 0; j < H; ++j) {
      worst = std::max(worst, std::abs(h(j) - ref.h[static_cast<std::size_t>(j)]));
      worst = std::max(worst, std::abs(c(j) - ref.c[static_cast<std::size_t>(j)]));
    }

    // Attention pooling vs the oracle.
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.below(6));
    Matd F(T, D);
    fill_uniform(F, rng, -2, 2);
    AttentionWeights<double> aw = AttentionWeights<double>::zeros(D);
    fill_uniform(aw.w, rng);
    aw.b(0) = rng.uniform(-1, 1);
    Mask mask(T);
    std::vector<bool> mask_ref(static_cast<std::size_t>(T));
    bool any = false;
    for (Eigen::Index t = 0; t < T; ++t) {
      mask(t) = rng.below(2) == 1;
      mask_ref[static_cast<std::size_t>(t)] = mask(t);
      any = any || mask(t);
    }
    if (!any) {
      mask(T - 1) = true;
      mask_ref[static_cast<std::size_t>(T - 1)] = true;
    }
    const Vecd pooled = attention_weighted_average(F, aw, mask);
    std::vector<std::vector<double>> fr(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index k = 0; k < D; ++k)
        fr[static_cast<std::size_t>(t)].push_back(F(t, k));
    const auto pref = oracle::attention_average(
        fr, {aw.w.data(), aw.w.data() + D}, aw.b(0), mask_ref);
    for (Eigen::Index k = 0; k < D; ++k)
      worst = std::max(worst, std::abs(pooled(k) - pref[static_cast<std::size_t>(k)]));

    // Cross-entropy vs the oracle.
    Vecd logits(2 + static_cast<Eigen::Index>(rng.below(6)));
    fill_uniform(logits, rng, -4, 4);
    const Vecd p = softmax<double>(logits);
    const auto target = static_cast<std::int32_t>(rng.below(
        static_cast<std::uint64_t>(p.size())));
    const double ce = cross_entropy<double>(p, target);
    const double ce_ref = oracle::cross_entropy(
        {p.data(), p.data() + p.size()}, static_cast<std::size_t>(target));
    worst = std::max(worst, std::abs(ce - ce_ref));
  }
  require(worst < 1e-12, "max oracle deviation " + fmt(worst) + " >= 1e-12");
  return "max deviation " + fmt(worst) + " over 500 randomized cases each";
}

// --- 4. Memorization ----------------------------------------------------------

std::string check_memorization() {
  const std::string line =
      "poartă, porți, poarta, porții, porți, porți, "
      "porțile, porților";
  const auto entries = parse_inflection_file(line);
  const CharVocab vocab = build_vocab(entries);
  ModelConfig cfg;
  cfg.max_length = 40;
  cfg.embed_dim = 16;
  cfg.lstm_units = 24;
  cfg.lstm_layers = 2;
  cfg.vocab_size = vocab.size();
  cfg.seed = 17;
  auto params = init_model(cfg);

  TrainConfig tc;
  tc.epochs = 300;
  tc.learning_rate = 1e-2;
  tc.batch_size = 128;
  tc.shuffle_seed = 18;
  tc.precision = Precision::kFloat64;
  tc.threads = hw_threads();

  const SampleSet samples = encode_corpus(entries, vocab, cfg.max_length);
  double final_loss = 0.0;
  int epochs_used = 0;
  // Stop early once the target is reached; the cap is the criterion.
  try {
    train(params, cfg, samples, tc,
          [&](int epoch, double loss, const ModelParams<double>&) {
            final_loss = loss;
            epochs_used = epoch + 1;
            if (loss < 0.005) throw Failure("converged");
          });
  } catch (const Failure&) {
  }
  require(final_loss < 0.01, "final loss " + fmt(final_loss) + " >= 0.01 after " +
                                 std::to_string(epochs_used) + " epochs");

  GenConfig gc;
  gc.temperature = 0.0;
  gc.max_chars = 256;
  const std::string regenerated =
      generate(params, cfg, vocab, "poartă", gc);
  require(regenerated == line,
          "greedy generation produced '" + regenerated + "'");
  return "loss " + fmt(final_loss) + " after " + std::to_string(epochs_used) +
         " epochs; line reproduced exactly";
}

// --- 5. Synthetic-language end-to-end -----------------------------------------

std::string check_synthetic_end_to_end() {
  const auto entries = synthetic::corpus(2000, 42);
  const SplitPair split = stratified_split(entries, 0.1, 7);

  ModelBundle bundle;
  bundle.vocab = build_vocab(split.train);
  bundle.config.max_length = 40;
  bundle.config.embed_dim = 32;
  bundle.config.lstm_units = 64;
  bundle.config.lstm_layers = 2;
  bundle.config.vocab_size = bundle.vocab.size();
  bundle.config.seed = 1;
  bundle.params = init_model(bundle.config);

  TrainConfig tc;
  tc.epochs = 14;
  tc.batch_size = 128;
  tc.learning_rate = 1e-3;
  tc.shuffle_seed = 3;
  tc.threads = hw_threads();
  const SampleSet samples =
      encode_corpus(split.train, bundle.vocab, bundle.config.max_length);
  train(bundle.params, bundle.config, samples, tc);

  GenConfig gc;
  gc.temperature = 0.0;
  gc.sample_seed = 9;
  gc.max_chars = default_max_chars(compute_stats(split.train));

  // Gold tables come from the rule oracle by construction; assert that on a
  // sample to keep the oracle wired in.
  for (std::size_t i = 0; i < split.test.size(); i += 37) {
    require(split.test[i] == synthetic::table_for(split.test[i].forms[0]),
            "gold table does not match the rule oracle");
  }

  const EvalReport report =
      evaluate(bundle, split.test, gc, hw_threads(), "synthetic");
  require(report.accuracy_percent >= 90.0,
          "held-out exact-match accuracy " + fmt(report.accuracy_percent) +
              "% < 90%");
  return "accuracy " + fmt(report.accuracy_percent) + "% (" +
         std::to_string(report.correct) + "/" + std::to_string(report.total) +
         "), form-count MAE " + fmt(report.form_count_mae);
}

// --- 6. Evaluator correctness ---------------------------------------------------

std::string check_evaluator_correctness() {
  Rng rng(19);
  const std::u32string pool = U"abșțăxy";
  auto random_table = [&](std::size_t max_forms) {
    std::vector<std::string> forms;
    const std::size_t n = 1 + rng.below(max_forms);
    for (std::size_t i = 0; i < n; ++i) {
      std::u32string form;
      const std::size_t len = 1 + rng.below(6);
      for (std::size_t k = 0; k < len; ++k) form += pool[rng.below(pool.size())];
      forms.push_back(utf8_encode(form));
    }
    return forms;
  };
  auto join_norm = [](const std::vector<std::string>& forms) {
    std::string out;
    for (std::size_t i = 0; i < forms.size(); ++i) {
      if (i) out += ", ";
      out += normalize_text(forms[i]);
    }
    return out;
  };

  std::size_t agreements = 0;
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<std::string> a = random_table(5);
    std::vector<std::string> b;
    switch (rng.below(4)) {
      case 0: b = a; break;
      case 1: b = random_table(5); break;
      case 2:
        b = a;
        b.push_back("x");
        break;
      default: {
        b = a;
        std::string replaced;
        for (char32_t c : utf8_decode(b[rng.below(b.size())]))
          replaced += utf8_encode(c == U'ș' ? U'ş' : c);
        b[0] = replaced.empty() ? b[0] : replaced;
        break;
      }
    }
    const bool got = exact_match(a, b);
    require(got == (join_norm(a) == join_norm(b)),
            "exact_match disagrees with joined-string equality");
    agreements++;
  }

  // Accuracy / MAE arithmetic against hand counts: 4 entries, 2 exact, form
  // count deltas 0,0,1,3 -> accuracy 50%, MAE 1.0.
  EvalReport hand;
  hand.total = 4;
  hand.correct = 2;
  hand.accuracy_percent = 100.0 * 2 / 4;
  require(hand.accuracy_percent == 50.0, "accuracy arithmetic");
  const double mae = (0 + 0 + 1 + 3) / 4.0;
  require(mae == 1.0, "MAE arithmetic");
  return std::to_string(agreements) + " randomized pairs agree with the oracle";
}

// --- 7. Determinism -------------------------------------------------------------

std::string check_determinism() {
  testsupport::TmpDir tmp;
  const auto entries = synthetic::corpus(40, 5);
  const CharVocab vocab = build_vocab(entries);
  ModelConfig cfg;
  cfg.max_length = 24;
  cfg.embed_dim = 12;
  cfg.lstm_units = 12;
  cfg.lstm_layers = 2;
  cfg.vocab_size = vocab.size();
  cfg.seed = 77;

  auto run_once = [&](const std::string& tag) {
    auto params = init_model(cfg);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 64;
    tc.shuffle_seed = 78;
    tc.threads = hw_threads();
    const TrainReport report =
        train(params, cfg, encode_corpus(entries, vocab, cfg.max_length), tc);
    save_checkpoint(params, cfg, vocab, tmp.file(tag + ".mgck"));

    GenConfig gc;
    gc.temperature = 0.0;
    gc.max_chars = 64;
    const EvalReport eval =
        evaluate({cfg, vocab, params}, entries, gc, hw_threads(), "synthetic");
    return std::pair{train_report_to_json(report, false),
                     eval_report_to_json(eval, false)};
  };

  const auto [train1, eval1] = run_once("a");
  const auto [train2, eval2] = run_once("b");
  require(read_text_file(tmp.file("a.mgck")) == read_text_file(tmp.file("b.mgck")),
          "checkpoints differ between identical runs");
  require(train1 == train2, "train reports differ");
  require(eval1 == eval2, "eval reports differ");
  return "checkpoints and reports byte-identical across two runs";
}

// --- 8. Checkpoint round-trip -----------------------------------------------------

std::string check_checkpoint_roundtrip() {
  testsupport::TmpDir tmp;
  const auto entries = synthetic::corpus(10, 3);
  const CharVocab vocab = build_vocab(entries);
  ModelConfig cfg;
  cfg.max_length = 12;
  cfg.embed_dim = 6;
  cfg.lstm_units = 5;
  cfg.lstm_layers = 2;
  cfg.vocab_size = vocab.size();
  cfg.seed = 31;
  const auto params = init_model(cfg);

  const std::string path = tmp.file("m.mgck");
  save_checkpoint(params, cfg, vocab, path);
  const ModelBundle loaded = load_checkpoint(path);
  require(loaded.config == cfg, "config not reproduced");
  require(loaded.vocab == vocab, "vocab not reproduced");
  require(flatten_params(loaded.params) == flatten_params(params),
          "weights not bit-identical");

  const std::string raw = read_text_file(path);
  // Truncation -> truncated-data error.
  write_text_file(tmp.file("t.mgck"), raw.substr(0, raw.size() - 9));
  bool truncated = false, version = false, manifest = false;
  try {
    load_checkpoint(tmp.file("t.mgck"));
  } catch (const CheckpointTruncatedError&) {
    truncated = true;
  }
  // Version flip -> version error (format_version sits in the JSON header).
  std::string flipped = raw;
  const std::size_t vpos = flipped.find("\"format_version\":1");
  require(vpos != std::string::npos, "header missing format_version");
  flipped[vpos + std::string("\"format_version\":").size()] = '9';
  write_text_file(tmp.file("v.mgck"), flipped);
  try {
    load_checkpoint(tmp.file("v.mgck"));
  } catch (const CheckpointVersionError&) {
    version = true;
  }
  // Shape edit -> manifest error ("rows":6 belongs to the embedding tensor).
  std::string reshaped = raw;
  const std::size_t rpos = reshaped.find("\"rows\":");
  require(rpos != std::string::npos, "header missing tensor rows");
  reshaped[rpos + 7] = '9';
  write_text_file(tmp.file("s.mgck"), reshaped);
  try {
    load_checkpoint(tmp.file("s.mgck"));
  } catch (const CheckpointManifestError&) {
    manifest = true;
  }
  require(truncated, "truncated file did not raise CheckpointTruncatedError");
  require(version, "version flip did not raise CheckpointVersionError");
  require(manifest, "shape edit did not raise CheckpointManifestError");
  return "bit-exact round-trip; distinct truncation/version/manifest errors";
}

// --- 9. Pretrain/finetune diagnostic ------------------------------------------------

std::string check_pretrain_finetune_diagnostic() {
  const auto prose = synthetic::prose_lines(50000, 21);
  const auto entries = synthetic::corpus(500, 22);
  std::vector<std::string> prose_norm;
  prose_norm.reserve(prose.size());
  for (const auto& line : prose) prose_norm.push_back(normalize_text(line));

  const CharVocab vocab =
      merge_vocabs(build_vocab_lines(prose_norm), build_vocab(entries));
  ModelConfig cfg;
  cfg.max_length = 24;
  cfg.embed_dim = 16;
  cfg.lstm_units = 24;
  cfg.lstm_layers = 2;
  cfg.vocab_size = vocab.size();
  cfg.seed = 51;

  TrainConfig tc_pre;
  tc_pre.epochs = 1;
  tc_pre.batch_size = 128;
  tc_pre.shuffle_seed = 52;
  tc_pre.threads = hw_threads();
  TrainConfig tc_fine = tc_pre;
  tc_fine.epochs = 1;
  tc_fine.shuffle_seed = 53;

  const SampleSet pre_samples = encode_lines(prose_norm, vocab, cfg.max_length);
  const SampleSet fine_samples = encode_corpus(entries, vocab, cfg.max_length);

  auto params = init_model(cfg);
  pretrain_finetune(params, cfg, pre_samples, fine_samples, tc_pre, tc_fine);

  auto scratch = init_model(cfg);
  train(scratch, cfg, fine_samples, tc_fine);

  std::vector<std::string> lemmas;
  for (std::size_t i = 0; i < 100; ++i) lemmas.push_back(entries[i].forms[0]);
  GenConfig gc;
  gc.temperature = 0.0;
  gc.sample_seed = 54;
  gc.max_chars = 96;

  const double tuned_rate =
      separator_rate({cfg, vocab, params}, lemmas, gc, hw_threads());
  const double scratch_rate =
      separator_rate({cfg, vocab, scratch}, lemmas, gc, hw_threads());
  require(std::isfinite(tuned_rate) && std::isfinite(scratch_rate),
          "separator rates not populated");
  // The paper's directional finding is recorded, not gated.
  const char* direction = tuned_rate < scratch_rate
                              ? " (pretrained output stays less table-like)"
                              : "";
  return "pretrained rate " + fmt(tuned_rate) + ", from-scratch rate " +
         fmt(scratch_rate) + " over 100 lemmas" + direction;
}

// --- 10. Conditional Romanian reproduction ---------------------------------------

std::string check_romanian_conditional(bool& skipped) {
  const char* path = std::getenv("MORPHOGEN_RO_DATASET");
  if (path == nullptr || !std::ifstream(path).good()) {
    skipped = true;
    return "MORPHOGEN_RO_DATASET not set; supply the labeled 30k noun corpus "
           "to run the Nominal_8 reproduction";
  }
  const auto all = read_inflection_file(path);
  double total = 0.0;
  std::vector<double> accs;
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const SplitPair split = stratified_split(all, 0.1, seed);
    auto train_set = filter_by_form_count(split.train, 8);
    auto test_set = filter_by_form_count(split.test, 8);

    ModelBundle bundle;
    bundle.vocab = build_vocab(train_set);
    bundle.config.max_length = 40;
    bundle.config.vocab_size = bundle.vocab.size();
    bundle.config.seed = seed;
    bundle.params = init_model(bundle.config);

    TrainConfig tc;
    tc.epochs = 14;
    tc.shuffle_seed = mix_seed(seed, 1);
    tc.threads = hw_threads();
    const SampleSet samples =
        encode_corpus(train_set, bundle.vocab, bundle.config.max_length);
    train(bundle.params, bundle.config, samples, tc);
    GenConfig gc;
    gc.temperature = 0.0;
    gc.sample_seed = mix_seed(seed, 2);
    gc.max_chars = default_max_chars(compute_stats(train_set));
    const EvalReport report =
        evaluate(bundle, test_set, gc, hw_threads(), "romanian_nominal8");
    accs.push_back(report.accuracy_percent);
    total += report.accuracy_percent;
  }
  const double mean = total / 3.0;
  std::string note = mean >= 67.6 && mean <= 77.6
                         ? "within +/-5 points of 72.6"
                         : "OUTSIDE +/-5 points of 72.6 (reported, not gated)";
  return "mean accuracy " + fmt(mean) + "% across 3 seeds [" + fmt(accs[0]) +
         ", " + fmt(accs[1]) + ", " + fmt(accs[2]) + "]; " + note;
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"gradient-correctness", 60, check_gradient_correctness},
      {"layer-invariants", 120, check_layer_invariants},
      {"oracle-equivalence", 60, check_oracle_equivalence},
      {"memorization", 120, check_memorization},
      {"synthetic-end-to-end", 1800, check_synthetic_end_to_end},
      {"evaluator-correctness", 120, check_evaluator_correctness},
      {"determinism", 300, check_determinism},
      {"checkpoint-roundtrip", 60, check_checkpoint_roundtrip},
      {"pretrain-finetune-diagnostic", 1800, check_pretrain_finetune_diagnostic},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string note;
    bool ok = true;
    try {
      note = criterion.run();
    } catch (const std::exception& e) {
      ok = false;
      note = e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (ok && seconds > criterion.budget_seconds) {
      ok = false;
      note = "exceeded runtime budget (" + fmt(seconds) + "s > " +
             fmt(criterion.budget_seconds) + "s); " + note;
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << criterion.name << " ("
              << fmt(seconds) << "s): " << note << "\n"
              << std::flush;
    failures += ok ? 0 : 1;
  }

  {
    const auto t0 = std::chrono::steady_clock::now();
    bool skipped = false;
    std::string note;
    bool ok = true;
    try {
      note = check_romanian_conditional(skipped);
    } catch (const std::exception& e) {
      ok = false;
      note = e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::cout << (ok ? (skipped ? "[SKIP] " : "[PASS] ") : "[FAIL] ")
              << "romanian-conditional (" << fmt(seconds) << "s): " << note
              << "\n";
    failures += ok ? 0 : 1;
  }

  std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed\n"
                              : "ACCEPTANCE: " + std::to_string(failures) +
                                    " criteria failed\n");
  return failures == 0 ? 0 : 1;
}
