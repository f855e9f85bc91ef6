#pragma once

#include "morphogen/corpus.hpp"
#include "morphogen/model.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace morphogen {

struct GenConfig {
  /// 0 means greedy argmax (lowest-id tie-break); otherwise probabilities are
  /// rescaled p^(1/temperature) and renormalized before sampling.
  double temperature = 1.0;
  /// Cap on generated characters (the prefix does not count).
  std::int32_t max_chars = 256;
  std::uint64_t sample_seed = 0;
  /// Seed the context with "lemma, " instead of the bare lemma.
  bool prefix_separator = false;
};

/// 4x the mean training line length, never below 256.
std::int32_t default_max_chars(const CorpusStats& stats);

/// Next-character distribution given a left-padded context of length T.
using NextCharPolicy = std::function<Vecd(std::span<const std::int32_t>)>;

/// Draw from a distribution at the given temperature. PAD is never produced
/// (it is an encoding artifact, not a character); the remaining mass is
/// renormalized.
std::int32_t sample_char(const Vecd& probs, double temperature, Rng& rng);

/// Core generation loop against an arbitrary policy (tests stub this).
/// Returns prefix + continuation; stops at EOL or after max_chars generated
/// characters. Deterministic given (policy, prefix, gc).
std::string generate_with(const NextCharPolicy& policy, const CharVocab& vocab,
                          const std::string& prefix, const GenConfig& gc,
                          std::int32_t context_length);

/// Prefix-conditioned generation from a trained model. The per-lemma random
/// state is derived from (sample_seed, prefix), so distinct lemmas can be
/// generated in parallel and reproducibly.
std::string generate(const ModelParams<double>& params, const ModelConfig& cfg,
                     const CharVocab& vocab, const std::string& prefix,
                     const GenConfig& gc);

/// Splits on ", " with no filtering; joining the result with ", " reproduces
/// the line exactly.
std::vector<std::string> split_table_line(const std::string& line);

/// Generates a full table line from a lemma and splits it into forms.
std::vector<std::string> generate_table(const ModelParams<double>& params,
                                        const ModelConfig& cfg,
                                        const CharVocab& vocab,
                                        const std::string& lemma,
                                        const GenConfig& gc);

}  // namespace morphogen
