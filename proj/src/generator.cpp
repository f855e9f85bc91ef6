#include "morphogen/generator.hpp"

#include <algorithm>
#include <cmath>

namespace morphogen {

std::int32_t default_max_chars(const CorpusStats& stats) {
  const double cap = 4.0 * stats.mean_line_length;
  return std::max<std::int32_t>(256, static_cast<std::int32_t>(std::ceil(cap)));
}

std::int32_t sample_char(const Vecd& probs, double temperature, Rng& rng) {
  const Eigen::Index V = probs.size();
  if (V < 2) throw ValidationError("sample_char: distribution too small");
  if (temperature < 0) throw ValidationError("temperature must be >= 0");

  if (temperature == 0.0) {
    // Greedy: argmax over non-PAD ids, lowest id wins ties.
    Eigen::Index best = 1;
    for (Eigen::Index i = 2; i < V; ++i) {
      if (probs(i) > probs(best)) best = i;
    }
    return static_cast<std::int32_t>(best);
  }

  // p^(1/tau) renormalized, computed in log space for stability.
  Vecd logits(V - 1);
  for (Eigen::Index i = 1; i < V; ++i)
    logits(i - 1) = std::log(std::max(probs(i), 1e-300)) / temperature;
  Vecd w = (logits.array() - logits.maxCoeff()).exp();
  const double total = w.sum();
  const double u = rng.unit() * total;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    cum += w(i);
    if (u < cum) return static_cast<std::int32_t>(i + 1);
  }
  return static_cast<std::int32_t>(V - 1);  // rounding slack
}

std::string generate_with(const NextCharPolicy& policy, const CharVocab& vocab,
                          const std::string& prefix, const GenConfig& gc,
                          std::int32_t context_length) {
  if (gc.max_chars < 1) throw ValidationError("max_chars must be >= 1");
  const std::size_t T = static_cast<std::size_t>(context_length);

  std::vector<std::int32_t> history;
  for (char32_t c : utf8_decode(prefix)) {
    if (!vocab.contains(c))
      throw EncodingError("out-of-vocabulary prefix character '" +
                          utf8_encode(c) + "'");
    history.push_back(vocab.id_of(c));
  }

  Rng rng(mix_seed(gc.sample_seed, fnv1a64(prefix.data(), prefix.size())));

  std::string out = prefix;
  std::vector<std::int32_t> context(T, CharVocab::kPadId);
  for (std::int32_t produced = 0; produced < gc.max_chars; ++produced) {
    const std::size_t n = std::min(history.size(), T);
    std::fill(context.begin(), context.end(), CharVocab::kPadId);
    std::copy(history.end() - static_cast<std::ptrdiff_t>(n), history.end(),
              context.end() - static_cast<std::ptrdiff_t>(n));
    const Vecd probs = policy(context);
    const std::int32_t next = sample_char(probs, gc.temperature, rng);
    if (next == CharVocab::kEolId) break;
    out += utf8_encode(vocab.char_of(next));
    history.push_back(next);
  }
  return out;
}

std::string generate(const ModelParams<double>& params, const ModelConfig& cfg,
                     const CharVocab& vocab, const std::string& prefix,
                     const GenConfig& gc) {
  NextCharPolicy policy = [&](std::span<const std::int32_t> context) {
    return forward(params, cfg, context);
  };
  return generate_with(policy, vocab, prefix, gc, cfg.max_length);
}

std::vector<std::string> split_table_line(const std::string& line) {
  std::vector<std::string> forms;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(", ", start);
    if (pos == std::string::npos) {
      forms.push_back(line.substr(start));
      break;
    }
    forms.push_back(line.substr(start, pos - start));
    start = pos + 2;
  }
  return forms;
}

std::vector<std::string> generate_table(const ModelParams<double>& params,
                                        const ModelConfig& cfg,
                                        const CharVocab& vocab,
                                        const std::string& lemma,
                                        const GenConfig& gc) {
  const std::string prefix = gc.prefix_separator ? lemma + ", " : lemma;
  return split_table_line(generate(params, cfg, vocab, prefix, gc));
}

}  // namespace morphogen
