#include "morphogen/trainer.hpp"

#include "morphogen/generator.hpp"
#include "morphogen/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace morphogen;

namespace {

struct Fixture {
  std::vector<InflectionEntry> entries;
  CharVocab vocab;
  ModelConfig cfg;
  SampleSet samples;
};

Fixture small_fixture(const std::string& corpus, std::int32_t T = 12) {
  Fixture f;
  f.entries = parse_inflection_file(corpus);
  f.vocab = build_vocab(f.entries);
  f.cfg.max_length = T;
  f.cfg.embed_dim = 8;
  f.cfg.lstm_units = 10;
  f.cfg.lstm_layers = 2;
  f.cfg.vocab_size = f.vocab.size();
  f.cfg.seed = 7;
  f.samples = encode_corpus(f.entries, f.vocab, T);
  return f;
}

}  // namespace

TEST_CASE("lr = 0 training is the identity on parameters") {
  Fixture f = small_fixture("ab, ba\ncd, dc\n");
  auto params = init_model(f.cfg);
  const Vecd before = flatten_params(params);

  TrainConfig tc;
  tc.epochs = 3;
  tc.learning_rate = 0.0;
  tc.precision = Precision::kFloat64;
  const TrainReport report = train(params, f.cfg, f.samples, tc);

  CHECK(flatten_params(params) == before);
  REQUIRE(report.epoch_loss.size() == 3);
  CHECK(report.epoch_loss[0] == doctest::Approx(report.epoch_loss[1]));
  CHECK(report.epoch_loss[1] == doctest::Approx(report.epoch_loss[2]));
  CHECK(report.sample_count == f.samples.size());
  CHECK(report.epoch_seconds.size() == 3);
}

TEST_CASE("training is deterministic and thread-count invariant") {
  Fixture f = small_fixture("ab, ba\ncd, dc\nac, ca\nbd, db\n");
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.shuffle_seed = 5;

  for (const Precision precision : {Precision::kFloat32, Precision::kFloat64}) {
    tc.precision = precision;
    auto p1 = init_model(f.cfg);
    tc.threads = 1;
    const TrainReport r1 = train(p1, f.cfg, f.samples, tc);

    auto p2 = init_model(f.cfg);
    const TrainReport r2 = train(p2, f.cfg, f.samples, tc);
    CHECK(flatten_params(p1) == flatten_params(p2));
    CHECK(r1.epoch_loss == r2.epoch_loss);

    auto p3 = init_model(f.cfg);
    tc.threads = 3;
    const TrainReport r3 = train(p3, f.cfg, f.samples, tc);
    CHECK(flatten_params(p1) == flatten_params(p3));
    CHECK(r1.epoch_loss == r3.epoch_loss);
    tc.threads = 1;
  }
}

TEST_CASE("gradient clipping bounds the global norm") {
  Fixture f = small_fixture("ab");
  Rng rng(3);
  for (int iter = 0; iter < 100; ++iter) {
    ModelGrads<double> grads = zero_params<double>(f.cfg);
    for_each_tensor(grads, [&rng](auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i)
        t.data()[i] = rng.uniform(-10, 10);
    });
    const double clip = 0.1 + 5.0 * rng.unit();
    const double before = gradient_global_norm(grads);
    const double reported = clip_global_norm(grads, clip);
    CHECK(reported == doctest::Approx(before));
    CHECK(gradient_global_norm(grads) <= clip + 1e-9);
  }
  SUBCASE("no-op when already within the bound") {
    ModelGrads<double> grads = zero_params<double>(f.cfg);
    grads.out_b(0) = 0.5;
    clip_global_norm(grads, 5.0);
    CHECK(grads.out_b(0) == 0.5);
  }
}

TEST_CASE("single-sample memorization: loss is driven to ~0, non-increasing") {
  Fixture f = small_fixture("abcd");
  // One sample only: predict 'b' after "a".
  SampleSet one;
  one.context_length = f.cfg.max_length;
  one.append(encode_line("abcd", f.vocab, f.cfg.max_length)[1]);

  auto params = init_model(f.cfg);
  TrainConfig tc;
  tc.epochs = 60;
  tc.learning_rate = 1e-2;
  tc.precision = Precision::kFloat64;
  const TrainReport report = train(params, f.cfg, one, tc);

  CHECK(report.epoch_loss.back() < 0.01);
  for (std::size_t e = 10; e + 1 < report.epoch_loss.size(); ++e)
    CHECK(report.epoch_loss[e + 1] <= report.epoch_loss[e] + 1e-3);
}

TEST_CASE("single-line memorization and greedy reproduction") {
  const std::string line = "poartă, porți, poarta";
  Fixture f = small_fixture(line, 24);
  f.cfg.embed_dim = 12;
  f.cfg.lstm_units = 16;

  auto params = init_model(f.cfg);
  TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 1e-2;
  tc.batch_size = 64;
  tc.precision = Precision::kFloat64;
  const TrainReport report = train(params, f.cfg, f.samples, tc);
  CHECK(report.epoch_loss.back() < 0.01);

  GenConfig gc;
  gc.temperature = 0.0;
  gc.max_chars = 256;
  CHECK(generate(params, f.cfg, f.vocab, "poartă", gc) == line);
}

TEST_CASE("training errors") {
  Fixture f = small_fixture("ab, ba");
  auto params = init_model(f.cfg);
  TrainConfig tc;
  tc.epochs = 1;

  SUBCASE("empty sample set") {
    SampleSet empty;
    empty.context_length = f.cfg.max_length;
    CHECK_THROWS_AS(train(params, f.cfg, empty, tc), TrainError);
  }
  SUBCASE("out-of-range ids") {
    SampleSet bad = f.samples;
    bad.targets[0] = 999;
    CHECK_THROWS_AS(train(params, f.cfg, bad, tc), TrainError);
  }
  SUBCASE("context length mismatch") {
    SampleSet bad = f.samples;
    bad.context_length = f.cfg.max_length + 1;
    CHECK_THROWS_AS(train(params, f.cfg, bad, tc), TrainError);
  }
  SUBCASE("non-finite loss aborts with a diagnostic") {
    auto exploded = init_model(f.cfg);
    exploded.embedding.setConstant(1e200);
    exploded.out_w.setConstant(1e200);
    tc.precision = Precision::kFloat64;
    try {
      train(exploded, f.cfg, f.samples, tc);
      FAIL("expected TrainError");
    } catch (const TrainError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("non-finite") != std::string::npos);
      CHECK(msg.find("epoch 0") != std::string::npos);
    }
  }
}

TEST_CASE("rmsprop also learns") {
  Fixture f = small_fixture("ab, ba");
  auto params = init_model(f.cfg);
  TrainConfig tc;
  tc.epochs = 40;
  tc.optimizer = Optimizer::kRmsProp;
  tc.learning_rate = 5e-3;
  tc.precision = Precision::kFloat64;
  const TrainReport report = train(params, f.cfg, f.samples, tc);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front() * 0.5);
}

TEST_CASE("pretrain_finetune") {
  Fixture fa = small_fixture("ab, ba\ncd, dc\n");
  // Shared vocab across both phases (the union precondition).
  const SampleSet phase_a = fa.samples;
  const SampleSet phase_b =
      encode_corpus(parse_inflection_file("ad, da\ncb, bc\n"), fa.vocab,
                    fa.cfg.max_length);

  TrainConfig tc_pre;
  tc_pre.epochs = 2;
  tc_pre.precision = Precision::kFloat64;
  TrainConfig tc_fine = tc_pre;

  SUBCASE("zero fine-tuning epochs leaves the phase-1 weights untouched") {
    auto p1 = init_model(fa.cfg);
    const TrainReport only = train(p1, fa.cfg, phase_a, tc_pre);

    auto p2 = init_model(fa.cfg);
    TrainConfig none = tc_fine;
    none.epochs = 0;
    const auto [pre, fine] = pretrain_finetune(p2, fa.cfg, phase_a, phase_b,
                                               tc_pre, none);
    CHECK(flatten_params(p1) == flatten_params(p2));
    CHECK(pre.epoch_loss == only.epoch_loss);
    CHECK(fine.epoch_loss.empty());
  }
  SUBCASE("two phases equal two manual sessions (fresh optimizer state)") {
    auto p1 = init_model(fa.cfg);
    pretrain_finetune(p1, fa.cfg, phase_a, phase_b, tc_pre, tc_fine);

    auto p2 = init_model(fa.cfg);
    train(p2, fa.cfg, phase_a, tc_pre);
    train(p2, fa.cfg, phase_b, tc_fine);
    CHECK(flatten_params(p1) == flatten_params(p2));
  }
  SUBCASE("identical corpora two-phase differs from one long session") {
    // The optimizer-state reset between phases is observable.
    auto p1 = init_model(fa.cfg);
    pretrain_finetune(p1, fa.cfg, phase_a, phase_a, tc_pre, tc_fine);

    auto p2 = init_model(fa.cfg);
    TrainConfig joint = tc_pre;
    joint.epochs = tc_pre.epochs + tc_fine.epochs;
    train(p2, fa.cfg, phase_a, joint);
    CHECK(flatten_params(p1) != flatten_params(p2));
  }
}

TEST_CASE("train report JSON") {
  Fixture f = small_fixture("ab");
  auto params = init_model(f.cfg);
  TrainConfig tc;
  tc.epochs = 1;
  TrainReport report = train(params, f.cfg, f.samples, tc);
  report.checkpoint_path = "model.mgck";

  const std::string with_timing = train_report_to_json(report, true);
  const std::string without = train_report_to_json(report, false);
  CHECK(with_timing.find("\"epochs\": 1") != std::string::npos);
  CHECK(with_timing.find("\"optimizer\": \"adam\"") != std::string::npos);
  CHECK(without.find("\"epoch_seconds\": [\n    0.0\n  ]") != std::string::npos);

  // Reports of two identical runs serialize identically without timing.
  auto params2 = init_model(f.cfg);
  const TrainReport report2 = train(params2, f.cfg, f.samples, tc);
  TrainReport r2 = report2;
  r2.checkpoint_path = "model.mgck";
  CHECK(train_report_to_json(report, false) == train_report_to_json(r2, false));
}

TEST_CASE("epoch callback sees evolving 64-bit weights") {
  Fixture f = small_fixture("ab, ba");
  auto params = init_model(f.cfg);
  TrainConfig tc;
  tc.epochs = 3;
  std::vector<double> losses;
  int calls = 0;
  train(params, f.cfg, f.samples, tc,
        [&](int epoch, double loss, const ModelParams<double>& p) {
          CHECK(epoch == calls);
          losses.push_back(loss);
          CHECK(p.embedding.allFinite());
          ++calls;
        });
  CHECK(calls == 3);
  CHECK(losses.size() == 3);
}
