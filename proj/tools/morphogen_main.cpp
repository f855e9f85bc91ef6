// morphogen: train character-level language models on inflection-table
// corpora, generate full tables from bare lemmas, and score them by exact
// match. Subcommands: prepare, stats, train, generate, eval, ablate,
// pretrain-finetune.

#include "morphogen/corpus.hpp"
#include "morphogen/evaluator.hpp"
#include "morphogen/generator.hpp"
#include "morphogen/manifest.hpp"
#include "morphogen/model.hpp"
#include "morphogen/trainer.hpp"
#include "morphogen/vocab.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace morphogen;

namespace {

// ---------------------------------------------------------------------------
// Config precedence: explicit flags > --config JSON file > built-in defaults.
// Each option registers a puller that fills its bound variable from the JSON
// only when the flag was not passed on the command line.
class ConfigFile {
 public:
  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path_, "JSON config file (flags take precedence)");
  }

  template <typename T>
  void bind(CLI::Option* opt, const std::string& key, T& target) {
    pullers_.push_back([opt, key, &target](const json& j) {
      if (opt->count() == 0 && j.contains(key)) target = j.at(key).get<T>();
    });
  }

  void apply() const {
    if (path_.empty()) return;
    const json j = json::parse(read_text_file(path_));
    for (const auto& pull : pullers_) pull(j);
  }

 private:
  std::string path_;
  std::vector<std::function<void(const json&)>> pullers_;
};

struct ModelFlags {
  std::int32_t max_length = 40;
  std::int32_t embed_dim = 100;
  std::int32_t lstm_units = 128;
  std::int32_t lstm_layers = 2;
  bool unidirectional = false;
  std::uint64_t seed = 0;

  ModelConfig to_config(std::int32_t vocab_size) const {
    ModelConfig cfg;
    cfg.max_length = max_length;
    cfg.embed_dim = embed_dim;
    cfg.lstm_units = lstm_units;
    cfg.lstm_layers = lstm_layers;
    cfg.bidirectional = !unidirectional;
    cfg.vocab_size = vocab_size;
    cfg.seed = seed;
    return cfg;
  }

  void attach(CLI::App* cmd, ConfigFile& config) {
    config.bind(cmd->add_option("--max-length", max_length,
                                "Context window T in characters"),
                "max_length", max_length);
    config.bind(cmd->add_option("--embed-dim", embed_dim, "Embedding width"),
                "embed_dim", embed_dim);
    config.bind(cmd->add_option("--lstm-units", lstm_units, "LSTM hidden units"),
                "lstm_units", lstm_units);
    config.bind(cmd->add_option("--lstm-layers", lstm_layers, "LSTM layer count"),
                "lstm_layers", lstm_layers);
    config.bind(cmd->add_flag("--unidirectional", unidirectional,
                              "Disable the backward LSTM direction"),
                "unidirectional", unidirectional);
    config.bind(cmd->add_option("--seed", seed,
                                "Master seed (initialization, shuffling, sampling)"),
                "seed", seed);
  }
};

struct TrainFlags {
  int epochs = 14;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double grad_clip_norm = 5.0;
  std::string precision = "f32";
  int threads = 1;

  TrainConfig to_config(std::uint64_t seed) const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = learning_rate;
    tc.optimizer = optimizer_from_string(optimizer);
    tc.grad_clip_norm = grad_clip_norm;
    tc.shuffle_seed = mix_seed(seed, 1);
    tc.precision = precision_from_string(precision);
    tc.threads = threads;
    return tc;
  }

  void attach(CLI::App* cmd, ConfigFile& config, bool with_epochs = true) {
    if (with_epochs) {
      config.bind(cmd->add_option("--epochs", epochs, "Training epochs"),
                  "epochs", epochs);
    }
    config.bind(cmd->add_option("--batch-size", batch_size, "Mini-batch size"),
                "batch_size", batch_size);
    config.bind(cmd->add_option("--lr,--learning-rate", learning_rate,
                                "Learning rate"),
                "learning_rate", learning_rate);
    config.bind(cmd->add_option("--optimizer", optimizer, "adam or rmsprop")
                    ->check(CLI::IsMember({"adam", "rmsprop"})),
                "optimizer", optimizer);
    config.bind(cmd->add_option("--clip-norm", grad_clip_norm,
                                "Global gradient clip norm (<= 0 disables)"),
                "grad_clip_norm", grad_clip_norm);
    config.bind(cmd->add_option("--precision", precision,
                                "Training arithmetic: f32 or f64")
                    ->check(CLI::IsMember({"f32", "f64"})),
                "precision", precision);
    config.bind(cmd->add_option("--threads", threads, "Worker thread cap"),
                "threads", threads);
  }
};

json model_flags_json(const ModelConfig& cfg) {
  return json::parse(config_to_json(cfg));
}

json train_flags_json(const TrainConfig& tc) {
  return {{"epochs", tc.epochs},
          {"batch_size", tc.batch_size},
          {"learning_rate", tc.learning_rate},
          {"optimizer", to_string(tc.optimizer)},
          {"grad_clip_norm", tc.grad_clip_norm},
          {"shuffle_seed", tc.shuffle_seed},
          {"precision", to_string(tc.precision)},
          {"threads", tc.threads}};
}

void write_manifest(const std::string& path, const std::string& command,
                    const json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json& seeds,
                    bool deterministic) {
  json m;
  m["command"] = command;
  m["tool_version"] = kToolVersion;
  m["timestamp"] = deterministic ? "" : now_iso8601_utc();
  m["config"] = config;
  json in = json::object();
  for (const auto& p : inputs) in[p] = file_digest_hex(p);
  m["inputs"] = std::move(in);
  m["outputs"] = outputs;
  m["seeds"] = seeds;
  write_text_file(path, m.dump(2) + "\n");
}

std::string checkpoint_stem(const std::string& out_path) {
  const std::string suffix = ".mgck";
  if (out_path.size() > suffix.size() &&
      out_path.compare(out_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out_path.substr(0, out_path.size() - suffix.size());
  return out_path;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string input;
  std::string consolidate_path;
  std::string out_train;
  std::string out_test;
  bool labels = false;
  std::int64_t filter_forms = 0;
  double split_fraction = 0.0;
  std::uint64_t seed = 0;
  bool deterministic = false;
};

int run_prepare(const PrepareArgs& args) {
  auto entries = read_inflection_file(args.input);
  if (args.labels) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!entries[i].class_label)
        throw ValidationError("--labels: entry " + std::to_string(i + 1) +
                              " has no class label");
    }
  }
  std::vector<std::string> inputs = {args.input};
  if (!args.consolidate_path.empty()) {
    entries = consolidate(std::move(entries),
                          read_inflection_file(args.consolidate_path));
    inputs.push_back(args.consolidate_path);
  }
  if (args.filter_forms > 0)
    entries = filter_by_form_count(entries,
                                   static_cast<std::size_t>(args.filter_forms));

  std::vector<std::string> outputs;
  if (args.split_fraction > 0.0) {
    if (args.out_test.empty())
      throw ValidationError("--split requires --out-test");
    const SplitPair split = stratified_split(entries, args.split_fraction, args.seed);
    write_inflection_file(split.train, args.out_train);
    write_inflection_file(split.test, args.out_test);
    outputs = {args.out_train, args.out_test};
    std::cerr << "prepare: " << split.train.size() << " train / "
              << split.test.size() << " test entries\n";
  } else {
    write_inflection_file(entries, args.out_train);
    outputs = {args.out_train};
    std::cerr << "prepare: " << entries.size() << " entries\n";
  }

  const json config = {{"labels", args.labels},
                       {"filter_forms", args.filter_forms},
                       {"split", args.split_fraction},
                       {"consolidate", args.consolidate_path}};
  write_manifest(args.out_train + ".manifest.json", "prepare", config, inputs,
                 outputs, {{"split_seed", args.seed}}, args.deterministic);
  return 0;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string input;
  std::int64_t bin_width = 1;
  std::string out;
  std::string summary;
  bool deterministic = false;
};

int run_stats(const StatsArgs& args) {
  const auto entries = read_inflection_file(args.input);
  const CorpusStats stats =
      compute_stats(entries, static_cast<std::size_t>(args.bin_width));
  const std::string tsv = stats_to_tsv(stats);
  if (args.out.empty()) {
    std::cout << tsv;
  } else {
    write_text_file(args.out, tsv);
  }

  json summary;
  summary["entry_count"] = stats.entry_count;
  summary["mean_line_length"] = stats.mean_line_length;
  summary["max_line_length"] = stats.max_line_length;
  summary["bin_width"] = stats.bin_width;
  json dist = json::object();
  for (const auto& [forms, count] : stats.form_count_distribution)
    dist[std::to_string(forms)] = count;
  summary["form_count_distribution"] = std::move(dist);
  if (!args.summary.empty()) write_text_file(args.summary, summary.dump(2) + "\n");

  std::cerr << "stats: " << stats.entry_count << " entries, mean line length "
            << stats.mean_line_length << ", max " << stats.max_line_length << "\n";

  if (!args.out.empty()) {
    std::vector<std::string> outputs = {args.out};
    if (!args.summary.empty()) outputs.push_back(args.summary);
    write_manifest(args.out + ".manifest.json", "stats",
                   {{"bin_width", args.bin_width}}, {args.input}, outputs,
                   json::object(), args.deterministic);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string train_path;
  std::string out = "model.mgck";
  ModelFlags model;
  TrainFlags train;
  bool deterministic = false;
};

int run_train(const TrainArgs& args) {
  const auto entries = read_inflection_file(args.train_path);
  if (entries.empty()) throw ValidationError("training file has no entries");
  const CharVocab vocab = build_vocab(entries);
  const ModelConfig cfg = args.model.to_config(vocab.size());
  const TrainConfig tc = args.train.to_config(args.model.seed);
  const SampleSet samples = encode_corpus(entries, vocab, cfg.max_length);

  std::cerr << "train: " << entries.size() << " entries, " << samples.size()
            << " samples, vocab " << vocab.size() << "\n";

  const std::string stem = checkpoint_stem(args.out);
  const std::string best_path = stem + ".best.mgck";
  auto params = init_model(cfg);
  double best_loss = std::numeric_limits<double>::infinity();
  TrainReport report = train(
      params, cfg, samples, tc,
      [&](int epoch, double loss, const ModelParams<double>& p) {
        save_checkpoint(p, cfg, vocab, args.out);  // last
        if (loss < best_loss) {
          best_loss = loss;
          save_checkpoint(p, cfg, vocab, best_path);
        }
        std::cerr << "epoch " << epoch << ": mean loss " << loss << "\n";
      });
  report.checkpoint_path = args.out;
  write_text_file(stem + ".train.json",
                  train_report_to_json(report, !args.deterministic) + "\n");

  write_manifest(stem + ".manifest.json", "train",
                 {{"model", model_flags_json(cfg)}, {"train", train_flags_json(tc)}},
                 {args.train_path}, {args.out, best_path, stem + ".train.json"},
                 {{"seed", args.model.seed}, {"shuffle_seed", tc.shuffle_seed}},
                 args.deterministic);
  std::cout << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string model_path;
  std::string prefix;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::int64_t max_chars = 256;
  bool prefix_separator = false;
};

int run_generate(const GenerateArgs& args) {
  const ModelBundle bundle = load_checkpoint(args.model_path);
  GenConfig gc;
  gc.temperature = args.temperature;
  gc.sample_seed = args.seed;
  gc.max_chars = static_cast<std::int32_t>(args.max_chars);
  gc.prefix_separator = args.prefix_separator;
  const std::string lemma = normalize_text(args.prefix);
  const std::string prefix = gc.prefix_separator ? lemma + ", " : lemma;
  std::cout << generate(bundle.params, bundle.config, bundle.vocab, prefix, gc)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model_path;
  std::string test_path;
  std::string out;
  std::string dataset_id;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::int64_t max_chars = 0;  // 0: derive from the test corpus
  bool prefix_separator = false;
  int threads = 1;
  bool deterministic = false;
};

int run_eval(const EvalArgs& args) {
  const ModelBundle bundle = load_checkpoint(args.model_path);
  const auto test = read_inflection_file(args.test_path);
  GenConfig gc;
  gc.temperature = args.temperature;
  gc.sample_seed = args.seed;
  gc.prefix_separator = args.prefix_separator;
  gc.max_chars = args.max_chars > 0
                     ? static_cast<std::int32_t>(args.max_chars)
                     : default_max_chars(compute_stats(test));

  const std::string dataset_id =
      args.dataset_id.empty() ? fs::path(args.test_path).filename().string()
                              : args.dataset_id;
  const EvalReport report = evaluate(bundle, test, gc, args.threads, dataset_id);

  std::cout << "accuracy " << report.accuracy_percent << "% (" << report.correct
            << "/" << report.total << "), form-count MAE "
            << report.form_count_mae << "\n";

  if (!args.out.empty()) {
    write_text_file(args.out + ".json",
                    eval_report_to_json(report, !args.deterministic) + "\n");
    write_text_file(args.out + ".tsv", eval_report_to_tsv(report));
    write_manifest(
        args.out + ".manifest.json", "eval",
        {{"temperature", gc.temperature},
         {"max_chars", gc.max_chars},
         {"prefix_separator", gc.prefix_separator},
         {"model", model_flags_json(bundle.config)}},
        {args.model_path, args.test_path},
        {args.out + ".json", args.out + ".tsv"},
        {{"sample_seed", gc.sample_seed}}, args.deterministic);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  std::string grid_path;
  std::string out_dir;
  int threads = 1;
  bool deterministic = false;
};

int run_ablate(const AblateArgs& args) {
  AblationGrid grid = parse_ablation_grid(read_text_file(args.grid_path));
  // Dataset paths are resolved relative to the grid file.
  const fs::path grid_dir = fs::path(args.grid_path).parent_path();
  for (auto& [name, dataset] : grid.datasets) {
    if (fs::path(dataset.train_path).is_relative())
      dataset.train_path = (grid_dir / dataset.train_path).string();
    if (fs::path(dataset.test_path).is_relative())
      dataset.test_path = (grid_dir / dataset.test_path).string();
  }

  AblationOptions options;
  options.threads = args.threads;
  options.include_timing = !args.deterministic;
  options.log = [](const std::string& line) { std::cerr << line << "\n"; };

  const auto rows = run_ablation(grid, args.out_dir, options);
  const std::string tsv_path = (fs::path(args.out_dir) / "results.tsv").string();
  write_text_file(tsv_path, ablation_rows_to_tsv(rows));
  write_text_file((fs::path(args.out_dir) / "results.json").string(),
                  ablation_rows_to_json(rows, !args.deterministic) + "\n");

  std::vector<std::string> inputs = {args.grid_path};
  for (const auto& [name, dataset] : grid.datasets) {
    if (fs::exists(dataset.train_path)) inputs.push_back(dataset.train_path);
    if (fs::exists(dataset.test_path)) inputs.push_back(dataset.test_path);
  }
  write_manifest((fs::path(args.out_dir) / "run.manifest.json").string(), "ablate",
                 {{"grid", args.grid_path}}, inputs,
                 {tsv_path, (fs::path(args.out_dir) / "results.json").string()},
                 json::object(), args.deterministic);
  std::cout << tsv_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain-finetune

struct PretrainArgs {
  std::string pretrain_path;
  std::string finetune_path;
  std::string out_dir = "pretrain_out";
  int epochs_pre = 14;
  int epochs_fine = 14;
  ModelFlags model;
  TrainFlags train;
  double diag_temperature = 0.0;
  std::int64_t diag_lemmas = 50;
  bool deterministic = false;
};

int run_pretrain_finetune(const PretrainArgs& args) {
  // Pretraining corpus: plain text lines, normalized like everything else.
  std::vector<std::string> prose;
  for (const auto& line : split_lines(read_text_file(args.pretrain_path))) {
    if (!line.empty()) prose.push_back(normalize_text(line));
  }
  if (prose.empty()) throw ValidationError("pretraining corpus is empty");
  const auto entries = read_inflection_file(args.finetune_path);
  if (entries.empty()) throw ValidationError("fine-tuning corpus is empty");

  // One vocabulary over the union of both corpora.
  const CharVocab vocab =
      merge_vocabs(build_vocab_lines(prose), build_vocab(entries));
  const ModelConfig cfg = args.model.to_config(vocab.size());

  TrainConfig tc_pre = args.train.to_config(args.model.seed);
  tc_pre.epochs = args.epochs_pre;
  TrainConfig tc_fine = args.train.to_config(mix_seed(args.model.seed, 2));
  tc_fine.epochs = args.epochs_fine;

  const SampleSet pre_samples = encode_lines(prose, vocab, cfg.max_length);
  const SampleSet fine_samples = encode_corpus(entries, vocab, cfg.max_length);
  std::cerr << "pretrain: " << pre_samples.size() << " samples; finetune: "
            << fine_samples.size() << " samples; vocab " << vocab.size() << "\n";

  fs::create_directories(args.out_dir);
  auto path_of = [&](const std::string& name) {
    return (fs::path(args.out_dir) / name).string();
  };

  // Two-phase pipeline.
  auto params = init_model(cfg);
  const int last_pre = args.epochs_pre - 1;
  auto [pre_report, fine_report] = pretrain_finetune(
      params, cfg, pre_samples, fine_samples, tc_pre, tc_fine,
      [&](int epoch, double loss, const ModelParams<double>& p) {
        std::cerr << "pretrain epoch " << epoch << ": loss " << loss << "\n";
        if (epoch == last_pre) save_checkpoint(p, cfg, vocab, path_of("pretrained.mgck"));
      },
      [&](int epoch, double loss, const ModelParams<double>&) {
        std::cerr << "finetune epoch " << epoch << ": loss " << loss << "\n";
      });
  save_checkpoint(params, cfg, vocab, path_of("finetuned.mgck"));

  // From-scratch reference: same init, fine-tuning corpus only.
  auto scratch = init_model(cfg);
  const TrainReport scratch_report = train(scratch, cfg, fine_samples, tc_fine);
  save_checkpoint(scratch, cfg, vocab, path_of("scratch.mgck"));

  write_text_file(path_of("pretrain.train.json"),
                  train_report_to_json(pre_report, !args.deterministic) + "\n");
  write_text_file(path_of("finetune.train.json"),
                  train_report_to_json(fine_report, !args.deterministic) + "\n");
  write_text_file(path_of("scratch.train.json"),
                  train_report_to_json(scratch_report, !args.deterministic) + "\n");

  // Separator-rate diagnostic: does generation still look like an inflection
  // table after prose pretraining?
  std::vector<std::string> lemmas;
  for (const auto& e : entries) {
    lemmas.push_back(e.forms.front());
    if (lemmas.size() >= static_cast<std::size_t>(args.diag_lemmas)) break;
  }
  GenConfig gc;
  gc.temperature = args.diag_temperature;
  gc.sample_seed = mix_seed(args.model.seed, 3);
  gc.max_chars = default_max_chars(compute_stats(entries));

  const ModelBundle tuned{cfg, vocab, params};
  const ModelBundle from_scratch{cfg, vocab, scratch};
  const double tuned_rate = separator_rate(tuned, lemmas, gc, args.train.threads);
  const double scratch_rate =
      separator_rate(from_scratch, lemmas, gc, args.train.threads);

  json diag;
  diag["pretrained_separator_rate"] = tuned_rate;
  diag["scratch_separator_rate"] = scratch_rate;
  diag["lemma_count"] = lemmas.size();
  diag["temperature"] = gc.temperature;
  diag["epochs_pre"] = args.epochs_pre;
  diag["epochs_fine"] = args.epochs_fine;
  json samples_json = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(3, lemmas.size()); ++i) {
    json pair;
    pair["lemma"] = lemmas[i];
    pair["pretrained"] =
        generate(params, cfg, vocab, lemmas[i], gc);
    pair["scratch"] = generate(scratch, cfg, vocab, lemmas[i], gc);
    samples_json.push_back(std::move(pair));
  }
  diag["samples"] = std::move(samples_json);
  write_text_file(path_of("diagnostic.json"), diag.dump(2) + "\n");

  write_manifest(
      path_of("run.manifest.json"), "pretrain-finetune",
      {{"model", model_flags_json(cfg)},
       {"train_pre", train_flags_json(tc_pre)},
       {"train_fine", train_flags_json(tc_fine)},
       {"diag_lemmas", args.diag_lemmas},
       {"diag_temperature", args.diag_temperature}},
      {args.pretrain_path, args.finetune_path},
      {path_of("pretrained.mgck"), path_of("finetuned.mgck"),
       path_of("scratch.mgck"), path_of("diagnostic.json")},
      {{"seed", args.model.seed}}, args.deterministic);

  std::cout << "pretrained separator rate " << tuned_rate
            << ", from-scratch separator rate " << scratch_rate << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphogen: unsupervised inflection-table generation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // prepare
  PrepareArgs prepare_args;
  auto* prepare_cmd = app.add_subcommand(
      "prepare", "Normalize, consolidate, filter, and split a corpus");
  prepare_cmd->add_option("--input", prepare_args.input, "Inflection-table file")
      ->required();
  prepare_cmd->add_flag("--labels", prepare_args.labels,
                        "Require a class label on every entry");
  prepare_cmd->add_option("--consolidate", prepare_args.consolidate_path,
                          "Append this dev file to the input");
  prepare_cmd->add_option("--filter-forms", prepare_args.filter_forms,
                          "Keep only entries with exactly N forms");
  prepare_cmd->add_option("--split", prepare_args.split_fraction,
                          "Class-stratified test fraction in (0,1)");
  prepare_cmd->add_option("--seed", prepare_args.seed, "Split shuffle seed");
  prepare_cmd->add_option("--out-train", prepare_args.out_train,
                          "Output file (train half when splitting)")
      ->required();
  prepare_cmd->add_option("--out-test", prepare_args.out_test,
                          "Test-half output file (with --split)");
  prepare_cmd->add_flag("--deterministic", prepare_args.deterministic,
                        "Zero volatile manifest fields");
  prepare_cmd->callback([&]() { run_prepare(prepare_args); });

  // stats
  StatsArgs stats_args;
  auto* stats_cmd =
      app.add_subcommand("stats", "Line-length histogram and corpus summary");
  stats_cmd->add_option("--input", stats_args.input, "Inflection-table file")
      ->required();
  stats_cmd->add_option("--bin-width", stats_args.bin_width, "Histogram bin width")
      ->check(CLI::PositiveNumber);
  stats_cmd->add_option("--out", stats_args.out, "Write the TSV here (default stdout)");
  stats_cmd->add_option("--summary", stats_args.summary, "Write a JSON summary here");
  stats_cmd->add_flag("--deterministic", stats_args.deterministic,
                      "Zero volatile manifest fields");
  stats_cmd->callback([&]() { run_stats(stats_args); });

  // train
  TrainArgs train_args;
  ConfigFile train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_config.attach(train_cmd);
  train_cmd->add_option("--train", train_args.train_path, "Training corpus")
      ->required();
  train_cmd->add_option("--out", train_args.out, "Checkpoint path (.mgck)");
  train_args.model.attach(train_cmd, train_config);
  train_args.train.attach(train_cmd, train_config);
  train_cmd->add_flag("--deterministic", train_args.deterministic,
                      "Zero volatile report/manifest fields");
  train_cmd->callback([&]() {
    train_config.apply();
    run_train(train_args);
  });

  // generate
  GenerateArgs gen_args;
  ConfigFile gen_config;
  auto* gen_cmd =
      app.add_subcommand("generate", "Generate one table line from a prefix");
  gen_config.attach(gen_cmd);
  gen_cmd->add_option("--model", gen_args.model_path, "Checkpoint")->required();
  gen_cmd->add_option("--prefix", gen_args.prefix, "Lemma (dictionary form)")
      ->required();
  gen_config.bind(gen_cmd->add_option("--temperature", gen_args.temperature,
                                      "Sampling temperature (0 = greedy)"),
                  "temperature", gen_args.temperature);
  gen_config.bind(gen_cmd->add_option("--seed", gen_args.seed, "Sampling seed"),
                  "seed", gen_args.seed);
  gen_config.bind(gen_cmd->add_option("--max-chars", gen_args.max_chars,
                                      "Generated-character cap"),
                  "max_chars", gen_args.max_chars);
  gen_config.bind(gen_cmd->add_flag("--prefix-separator", gen_args.prefix_separator,
                                    "Seed the context with \"lemma, \""),
                  "prefix_separator", gen_args.prefix_separator);
  gen_cmd->callback([&]() {
    gen_config.apply();
    run_generate(gen_args);
  });

  // eval
  EvalArgs eval_args;
  ConfigFile eval_config;
  auto* eval_cmd =
      app.add_subcommand("eval", "Exact-match evaluation on a test corpus");
  eval_config.attach(eval_cmd);
  eval_cmd->add_option("--model", eval_args.model_path, "Checkpoint")->required();
  eval_cmd->add_option("--test", eval_args.test_path, "Test corpus")->required();
  eval_cmd->add_option("--out", eval_args.out,
                       "Report path prefix (writes .json/.tsv)");
  eval_cmd->add_option("--dataset-id", eval_args.dataset_id,
                       "Dataset identifier echoed into the report");
  eval_config.bind(eval_cmd->add_option("--temperature", eval_args.temperature,
                                        "Sampling temperature (0 = greedy)"),
                   "temperature", eval_args.temperature);
  eval_config.bind(eval_cmd->add_option("--seed", eval_args.seed, "Sampling seed"),
                   "seed", eval_args.seed);
  eval_config.bind(eval_cmd->add_option("--max-chars", eval_args.max_chars,
                                        "Generated-character cap (0 = derive)"),
                   "max_chars", eval_args.max_chars);
  eval_config.bind(
      eval_cmd->add_flag("--prefix-separator", eval_args.prefix_separator,
                         "Seed the context with \"lemma, \""),
      "prefix_separator", eval_args.prefix_separator);
  eval_config.bind(eval_cmd->add_option("--threads", eval_args.threads,
                                        "Worker thread cap"),
                   "threads", eval_args.threads);
  eval_cmd->add_flag("--deterministic", eval_args.deterministic,
                     "Zero volatile report/manifest fields");
  eval_cmd->callback([&]() {
    eval_config.apply();
    run_eval(eval_args);
  });

  // ablate
  AblateArgs ablate_args;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Run a JSON grid of train/eval specs");
  ablate_cmd->add_option("--grid", ablate_args.grid_path, "Grid JSON file")
      ->required();
  ablate_cmd->add_option("--out", ablate_args.out_dir, "Output directory")
      ->required();
  ablate_cmd->add_option("--threads", ablate_args.threads, "Worker thread cap");
  ablate_cmd->add_flag("--deterministic", ablate_args.deterministic,
                       "Zero volatile report/manifest fields");
  ablate_cmd->callback([&]() { run_ablate(ablate_args); });

  // pretrain-finetune
  PretrainArgs pre_args;
  ConfigFile pre_config;
  auto* pre_cmd = app.add_subcommand(
      "pretrain-finetune",
      "Two-phase training plus the from-scratch comparison diagnostic");
  pre_config.attach(pre_cmd);
  pre_cmd->add_option("--pretrain", pre_args.pretrain_path,
                      "Plain-text pretraining corpus")
      ->required();
  pre_cmd->add_option("--finetune", pre_args.finetune_path,
                      "Inflection-table fine-tuning corpus")
      ->required();
  pre_cmd->add_option("--out", pre_args.out_dir, "Output directory");
  pre_config.bind(pre_cmd->add_option("--epochs-pre", pre_args.epochs_pre,
                                      "Pretraining epochs"),
                  "epochs_pre", pre_args.epochs_pre);
  pre_config.bind(pre_cmd->add_option("--epochs-fine", pre_args.epochs_fine,
                                      "Fine-tuning epochs"),
                  "epochs_fine", pre_args.epochs_fine);
  pre_args.model.attach(pre_cmd, pre_config);
  pre_args.train.attach(pre_cmd, pre_config, /*with_epochs=*/false);
  pre_config.bind(pre_cmd->add_option("--diag-lemmas", pre_args.diag_lemmas,
                                      "Lemmas used by the separator diagnostic"),
                  "diag_lemmas", pre_args.diag_lemmas);
  pre_config.bind(
      pre_cmd->add_option("--diag-temperature", pre_args.diag_temperature,
                          "Diagnostic sampling temperature"),
      "diag_temperature", pre_args.diag_temperature);
  pre_cmd->add_flag("--deterministic", pre_args.deterministic,
                    "Zero volatile report/manifest fields");
  pre_cmd->callback([&]() {
    pre_config.apply();
    run_pretrain_finetune(pre_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run '" << argv[0] << " --help' for usage\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
