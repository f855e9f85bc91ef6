#pragma once

#include "morphogen/corpus.hpp"
#include "morphogen/generator.hpp"
#include "morphogen/model.hpp"
#include "morphogen/trainer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace morphogen {

/// True iff both tables have the same number of forms and every form matches
/// character for character after corpus normalization.
bool exact_match(const std::vector<std::string>& generated,
                 const std::vector<std::string>& gold);

struct EvalEntry {
  std::string lemma;
  std::size_t gold_form_count = 0;
  std::size_t generated_form_count = 0;
  bool exact = false;
  std::string note;  // failure reason (e.g. out-of-vocab lemma)
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy_percent = 0.0;
  double form_count_mae = 0.0;
  std::vector<EvalEntry> per_entry;
  std::string dataset_id;
  ModelConfig model_config;
  GenConfig gen_config;
  double wall_seconds = 0.0;
};

/// Generates each test entry's table from its lemma (forms[0]) and scores it
/// with exact_match. An out-of-vocabulary lemma is recorded as a failed entry
/// with a reason instead of raising. Entries may be evaluated in parallel;
/// the aggregate is order-independent.
EvalReport evaluate(const ModelBundle& bundle,
                    const std::vector<InflectionEntry>& test, const GenConfig& gc,
                    int threads = 1, const std::string& dataset_id = "");

std::string eval_report_to_json(const EvalReport& report,
                                bool include_timing = true);
/// One row per test entry: lemma, gold/generated form counts, exact flag.
std::string eval_report_to_tsv(const EvalReport& report);

/// Fraction of generated lines (one per lemma) containing at least two ", "
/// separators — the inflection-table shape probe used by the
/// pretrain-vs-scratch diagnostic.
double separator_rate(const ModelBundle& bundle,
                      const std::vector<std::string>& lemmas, const GenConfig& gc,
                      int threads = 1);

// --- Ablation grid ---------------------------------------------------------

struct AblationSpec {
  std::string dataset;
  std::optional<std::size_t> form_filter;
  std::int32_t max_length = 40;
  int epochs = 14;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  // Optional per-spec overrides of the model/training defaults.
  std::optional<std::int32_t> embed_dim;
  std::optional<std::int32_t> lstm_units;
  std::optional<std::int32_t> lstm_layers;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::string> precision;
  std::optional<std::int32_t> max_chars;
};

struct AblationDataset {
  std::string train_path;
  std::string test_path;
};

struct AblationGrid {
  std::map<std::string, AblationDataset> datasets;
  std::vector<AblationSpec> specs;
};

/// Parses the grid JSON:
///   {"datasets": {"name": {"train": PATH, "test": PATH}},
///    "specs": [{"dataset": "name", "form_filter": 8, "max_length": 40,
///               "epochs": 14, "temperature": 0.0, "seed": 1, ...overrides}]}
AblationGrid parse_ablation_grid(const std::string& json_text);

struct AblationRow {
  AblationSpec spec;
  double accuracy_percent = 0.0;
  double form_count_mae = 0.0;
  double train_minutes = 0.0;
  std::size_t test_total = 0;
  std::string error;  // nonempty when the spec failed

  bool ok() const { return error.empty(); }
};

struct AblationOptions {
  int threads = 1;
  bool include_timing = true;
  /// Progress sink; called with one line per spec. May be null.
  std::function<void(const std::string&)> log;
};

/// Runs every spec, one row each. Completed rows are persisted as
/// out_dir/row_<hash>.json and skipped on rerun, so an interrupted grid
/// resumes where it stopped. Per-spec failures are recorded in the row and
/// the grid continues. Throws ValidationError on an empty grid.
std::vector<AblationRow> run_ablation(const AblationGrid& grid,
                                      const std::string& out_dir,
                                      const AblationOptions& options = {});

std::string ablation_rows_to_tsv(const std::vector<AblationRow>& rows);
std::string ablation_rows_to_json(const std::vector<AblationRow>& rows,
                                  bool include_timing = true);

}  // namespace morphogen
