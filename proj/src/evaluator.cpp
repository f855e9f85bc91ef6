#include "morphogen/evaluator.hpp"

#include "morphogen/rng.hpp"
#include "morphogen/vocab.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

namespace morphogen {

bool exact_match(const std::vector<std::string>& generated,
                 const std::vector<std::string>& gold) {
  if (generated.size() != gold.size()) return false;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (normalize_text(generated[i]) != normalize_text(gold[i])) return false;
  }
  return true;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, n, w, workers]() {
      for (std::size_t i = static_cast<std::size_t>(w); i < n;
           i += static_cast<std::size_t>(workers))
        fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

EvalReport evaluate(const ModelBundle& bundle,
                    const std::vector<InflectionEntry>& test, const GenConfig& gc,
                    int threads, const std::string& dataset_id) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  const auto t0 = std::chrono::steady_clock::now();

  EvalReport report;
  report.total = test.size();
  report.dataset_id = dataset_id;
  report.model_config = bundle.config;
  report.gen_config = gc;
  report.per_entry.resize(test.size());

  parallel_for(test.size(), threads, [&](std::size_t i) {
    const InflectionEntry& entry = test[i];
    EvalEntry& out = report.per_entry[i];
    out.lemma = entry.forms.front();
    out.gold_form_count = entry.forms.size();
    try {
      const auto generated =
          generate_table(bundle.params, bundle.config, bundle.vocab, out.lemma, gc);
      out.generated_form_count = generated.size();
      out.exact = exact_match(generated, entry.forms);
    } catch (const Error& e) {
      out.exact = false;
      out.generated_form_count = 0;
      out.note = e.what();
    }
  });

  std::size_t correct = 0;
  std::size_t abs_dev = 0;
  for (const auto& e : report.per_entry) {
    correct += e.exact ? 1 : 0;
    abs_dev += e.gold_form_count > e.generated_form_count
                   ? e.gold_form_count - e.generated_form_count
                   : e.generated_form_count - e.gold_form_count;
  }
  report.correct = correct;
  report.accuracy_percent =
      100.0 * static_cast<double>(correct) / static_cast<double>(report.total);
  report.form_count_mae =
      static_cast<double>(abs_dev) / static_cast<double>(report.total);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

namespace {

nlohmann::json gen_config_json(const GenConfig& gc) {
  return {{"temperature", gc.temperature},
          {"max_chars", gc.max_chars},
          {"sample_seed", gc.sample_seed},
          {"prefix_separator", gc.prefix_separator}};
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report, bool include_timing) {
  nlohmann::json j;
  j["total"] = report.total;
  j["correct"] = report.correct;
  j["accuracy_percent"] = report.accuracy_percent;
  j["form_count_mae"] = report.form_count_mae;
  j["dataset_id"] = report.dataset_id;
  j["model_config"] = nlohmann::json::parse(config_to_json(report.model_config));
  j["gen_config"] = gen_config_json(report.gen_config);
  j["wall_seconds"] = include_timing ? report.wall_seconds : 0.0;
  auto entries = nlohmann::json::array();
  for (const auto& e : report.per_entry) {
    nlohmann::json je = {{"lemma", e.lemma},
                         {"gold_form_count", e.gold_form_count},
                         {"generated_form_count", e.generated_form_count},
                         {"exact_match", e.exact}};
    if (!e.note.empty()) je["note"] = e.note;
    entries.push_back(std::move(je));
  }
  j["per_entry"] = std::move(entries);
  return j.dump(2);
}

std::string eval_report_to_tsv(const EvalReport& report) {
  std::string out = "lemma\tgold_form_count\tgenerated_form_count\texact_match\n";
  for (const auto& e : report.per_entry) {
    out += e.lemma;
    out += '\t';
    out += std::to_string(e.gold_form_count);
    out += '\t';
    out += std::to_string(e.generated_form_count);
    out += '\t';
    out += e.exact ? "1" : "0";
    out += '\n';
  }
  return out;
}

double separator_rate(const ModelBundle& bundle,
                      const std::vector<std::string>& lemmas, const GenConfig& gc,
                      int threads) {
  if (lemmas.empty()) throw ValidationError("separator_rate: no lemmas");
  std::vector<int> hits(lemmas.size(), 0);
  parallel_for(lemmas.size(), threads, [&](std::size_t i) {
    std::string line;
    try {
      line = generate(bundle.params, bundle.config, bundle.vocab, lemmas[i], gc);
    } catch (const Error&) {
      return;  // out-of-vocab lemma: counts as no separators
    }
    std::size_t count = 0;
    for (std::size_t pos = line.find(", "); pos != std::string::npos;
         pos = line.find(", ", pos + 2))
      ++count;
    hits[i] = count >= 2 ? 1 : 0;
  });
  std::size_t total = 0;
  for (int h : hits) total += static_cast<std::size_t>(h);
  return static_cast<double>(total) / static_cast<double>(lemmas.size());
}

// --- Ablation grid ---------------------------------------------------------

namespace {

nlohmann::json spec_to_json(const AblationSpec& s) {
  nlohmann::json j;
  j["dataset"] = s.dataset;
  if (s.form_filter) j["form_filter"] = *s.form_filter;
  j["max_length"] = s.max_length;
  j["epochs"] = s.epochs;
  j["temperature"] = s.temperature;
  j["seed"] = s.seed;
  if (s.embed_dim) j["embed_dim"] = *s.embed_dim;
  if (s.lstm_units) j["lstm_units"] = *s.lstm_units;
  if (s.lstm_layers) j["lstm_layers"] = *s.lstm_layers;
  if (s.batch_size) j["batch_size"] = *s.batch_size;
  if (s.learning_rate) j["learning_rate"] = *s.learning_rate;
  if (s.precision) j["precision"] = *s.precision;
  if (s.max_chars) j["max_chars"] = *s.max_chars;
  return j;
}

AblationSpec spec_from_json(const nlohmann::json& j) {
  AblationSpec s;
  s.dataset = j.at("dataset").get<std::string>();
  if (j.contains("form_filter") && !j["form_filter"].is_null())
    s.form_filter = j["form_filter"].get<std::size_t>();
  s.max_length = j.value("max_length", 40);
  s.epochs = j.value("epochs", 14);
  s.temperature = j.value("temperature", 0.0);
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("embed_dim")) s.embed_dim = j["embed_dim"].get<std::int32_t>();
  if (j.contains("lstm_units")) s.lstm_units = j["lstm_units"].get<std::int32_t>();
  if (j.contains("lstm_layers"))
    s.lstm_layers = j["lstm_layers"].get<std::int32_t>();
  if (j.contains("batch_size")) s.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate"))
    s.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("precision")) s.precision = j["precision"].get<std::string>();
  if (j.contains("max_chars")) s.max_chars = j["max_chars"].get<std::int32_t>();
  return s;
}

nlohmann::json row_to_json(const AblationRow& row, bool include_timing) {
  nlohmann::json j;
  j["spec"] = spec_to_json(row.spec);
  j["accuracy_percent"] = row.accuracy_percent;
  j["form_count_mae"] = row.form_count_mae;
  j["train_minutes"] = include_timing ? row.train_minutes : 0.0;
  j["test_total"] = row.test_total;
  j["error"] = row.error;
  return j;
}

AblationRow row_from_json(const nlohmann::json& j) {
  AblationRow row;
  row.spec = spec_from_json(j.at("spec"));
  row.accuracy_percent = j.value("accuracy_percent", 0.0);
  row.form_count_mae = j.value("form_count_mae", 0.0);
  row.train_minutes = j.value("train_minutes", 0.0);
  row.test_total = j.value("test_total", std::size_t{0});
  row.error = j.value("error", std::string{});
  return row;
}

std::string spec_key(const AblationSpec& s) {
  const std::string text = spec_to_json(s).dump();
  const std::uint64_t h = fnv1a64(text.data(), text.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

AblationRow run_spec(const AblationSpec& spec, const AblationDataset& dataset,
                     const AblationOptions& options) {
  AblationRow row;
  row.spec = spec;

  auto train_entries = read_inflection_file(dataset.train_path);
  auto test_entries = read_inflection_file(dataset.test_path);
  if (spec.form_filter) {
    train_entries = filter_by_form_count(train_entries, *spec.form_filter);
    test_entries = filter_by_form_count(test_entries, *spec.form_filter);
  }
  if (train_entries.empty()) throw ValidationError("empty training set");
  if (test_entries.empty()) throw ValidationError("empty test set");

  ModelBundle bundle;
  bundle.vocab = build_vocab(train_entries);
  bundle.config.max_length = spec.max_length;
  bundle.config.vocab_size = bundle.vocab.size();
  bundle.config.seed = spec.seed;
  if (spec.embed_dim) bundle.config.embed_dim = *spec.embed_dim;
  if (spec.lstm_units) bundle.config.lstm_units = *spec.lstm_units;
  if (spec.lstm_layers) bundle.config.lstm_layers = *spec.lstm_layers;
  bundle.params = init_model(bundle.config);

  TrainConfig tc;
  tc.epochs = spec.epochs;
  tc.shuffle_seed = mix_seed(spec.seed, 1);
  tc.threads = options.threads;
  if (spec.batch_size) tc.batch_size = *spec.batch_size;
  if (spec.learning_rate) tc.learning_rate = *spec.learning_rate;
  if (spec.precision) tc.precision = precision_from_string(*spec.precision);

  const SampleSet samples =
      encode_corpus(train_entries, bundle.vocab, spec.max_length);
  const TrainReport report = train(bundle.params, bundle.config, samples, tc);
  for (double s : report.epoch_seconds) row.train_minutes += s / 60.0;

  GenConfig gc;
  gc.temperature = spec.temperature;
  gc.sample_seed = mix_seed(spec.seed, 2);
  gc.max_chars = spec.max_chars ? *spec.max_chars
                                : default_max_chars(compute_stats(train_entries));

  const EvalReport eval =
      evaluate(bundle, test_entries, gc, options.threads, spec.dataset);
  row.accuracy_percent = eval.accuracy_percent;
  row.form_count_mae = eval.form_count_mae;
  row.test_total = eval.total;
  return row;
}

}  // namespace

AblationGrid parse_ablation_grid(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("grid JSON: ") + e.what());
  }
  AblationGrid grid;
  if (j.contains("datasets")) {
    for (const auto& [name, d] : j["datasets"].items()) {
      grid.datasets[name] = {d.at("train").get<std::string>(),
                             d.at("test").get<std::string>()};
    }
  }
  for (const auto& js : j.value("specs", nlohmann::json::array()))
    grid.specs.push_back(spec_from_json(js));
  if (grid.specs.empty()) throw ValidationError("ablation grid has no specs");
  for (const auto& s : grid.specs) {
    if (!grid.datasets.count(s.dataset))
      throw ValidationError("spec references unknown dataset '" + s.dataset + "'");
  }
  return grid;
}

std::vector<AblationRow> run_ablation(const AblationGrid& grid,
                                      const std::string& out_dir,
                                      const AblationOptions& options) {
  if (grid.specs.empty()) throw ValidationError("ablation grid has no specs");
  std::filesystem::create_directories(out_dir);

  std::vector<AblationRow> rows;
  for (const auto& spec : grid.specs) {
    const std::string row_path =
        (std::filesystem::path(out_dir) / ("row_" + spec_key(spec) + ".json"))
            .string();
    if (std::filesystem::exists(row_path)) {
      rows.push_back(row_from_json(nlohmann::json::parse(read_text_file(row_path))));
      if (options.log)
        options.log("skip (already complete): " + spec_to_json(spec).dump());
      continue;
    }
    AblationRow row;
    try {
      row = run_spec(spec, grid.datasets.at(spec.dataset), options);
    } catch (const std::exception& e) {
      row.spec = spec;
      row.error = e.what();
    }
    write_text_file(row_path, row_to_json(row, options.include_timing).dump(2));
    if (options.log) {
      options.log(row.ok() ? "done: " + spec_to_json(spec).dump() + " accuracy " +
                                 std::to_string(row.accuracy_percent)
                           : "failed: " + spec_to_json(spec).dump() + " (" +
                                 row.error + ")");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_rows_to_tsv(const std::vector<AblationRow>& rows) {
  std::string out =
      "dataset\tform_filter\tmax_length\tepochs\ttemperature\tseed\taccuracy_"
      "percent\tform_count_mae\ttrain_minutes\terror\n";
  for (const auto& r : rows) {
    out += r.spec.dataset;
    out += '\t';
    out += r.spec.form_filter ? std::to_string(*r.spec.form_filter) : "all";
    out += '\t';
    out += std::to_string(r.spec.max_length);
    out += '\t';
    out += std::to_string(r.spec.epochs);
    out += '\t';
    out += std::to_string(r.spec.temperature);
    out += '\t';
    out += std::to_string(r.spec.seed);
    out += '\t';
    out += std::to_string(r.accuracy_percent);
    out += '\t';
    out += std::to_string(r.form_count_mae);
    out += '\t';
    out += std::to_string(r.train_minutes);
    out += '\t';
    out += r.error;
    out += '\n';
  }
  return out;
}

std::string ablation_rows_to_json(const std::vector<AblationRow>& rows,
                                  bool include_timing) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) j.push_back(row_to_json(r, include_timing));
  return j.dump(2);
}

}  // namespace morphogen
