#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace morphogen {

/// One noun's paradigm: forms[0] is the base (dictionary) form, the rest are
/// the inflected forms in paradigm order. Forms never contain commas or line
/// terminators and are stored normalized (see normalize_text).
struct InflectionEntry {
  std::vector<std::string> forms;
  std::optional<int> class_label;  // inflectional class, 0..20

  bool operator==(const InflectionEntry&) const = default;
};

struct CorpusStats {
  std::size_t entry_count = 0;
  std::map<std::size_t, std::size_t> form_count_distribution;
  // Keyed by bin lower edge: bin = (len / bin_width) * bin_width.
  std::map<std::size_t, std::size_t> line_length_histogram;
  std::size_t bin_width = 1;
  double mean_line_length = 0.0;  // characters (codepoints), not bytes
  std::size_t max_line_length = 0;
};

struct SplitPair {
  std::vector<InflectionEntry> train;
  std::vector<InflectionEntry> test;
};

// --- UTF-8 helpers -------------------------------------------------------

/// Decodes UTF-8 into codepoints. Throws EncodingError on invalid bytes.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

/// Number of codepoints in a UTF-8 string.
std::size_t codepoint_count(std::string_view s);

// --- Operations ----------------------------------------------------------

/// Canonical text form: composes base + combining-mark pairs into their
/// precomposed codepoints and maps the four Romanian cedilla letters
/// (U+015E/5F, U+0162/63) to their comma-below equivalents (U+0218/19,
/// U+021A/1B). Idempotent; identity on ASCII.
std::string normalize_text(std::string_view s);

/// Parses one entry per non-empty line: forms joined by ", ", optionally
/// followed by a tab and an integer class label in [0, 20]. CR is stripped,
/// forms are normalized, empty lines are skipped. Throws ParseError (with
/// the 1-based line number) on empty forms or stray commas, and
/// ValidationError on labels outside [0, 20].
std::vector<InflectionEntry> parse_inflection_file(std::string_view text);

/// Forms joined with ", " (the training-line shape; no class label).
std::string format_entry(const InflectionEntry& e);

/// format_entry plus the "\t<label>" suffix when a class label is present;
/// parse_inflection_file inverts it exactly.
std::string format_file_line(const InflectionEntry& e);

std::string format_file(const std::vector<InflectionEntry>& entries);

std::vector<InflectionEntry> read_inflection_file(const std::string& path);
void write_inflection_file(const std::vector<InflectionEntry>& entries,
                           const std::string& path);

/// Concatenation, train order then dev order. No deduplication.
std::vector<InflectionEntry> consolidate(std::vector<InflectionEntry> train,
                                         const std::vector<InflectionEntry>& dev);

/// Class-stratified split: within each class, round-half-up(n * test_fraction)
/// entries go to test, chosen by a seeded shuffle; both halves keep the input
/// order. Entries must be all labeled or all unlabeled (one stratum).
SplitPair stratified_split(const std::vector<InflectionEntry>& entries,
                           double test_fraction, std::uint64_t seed);

/// Entries whose form count equals n, in the original order.
std::vector<InflectionEntry> filter_by_form_count(
    const std::vector<InflectionEntry>& entries, std::size_t n);

/// Line lengths are codepoint counts of format_entry(e).
CorpusStats compute_stats(const std::vector<InflectionEntry>& entries,
                          std::size_t bin_width = 1);

/// Plot-ready two-column table, header "bin\tcount", bins ascending.
std::string stats_to_tsv(const CorpusStats& stats);

// Plain-text helpers shared with the pretraining path.
std::vector<std::string> split_lines(std::string_view text);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace morphogen
