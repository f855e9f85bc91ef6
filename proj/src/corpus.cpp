#include "morphogen/corpus.hpp"

#include "morphogen/rng.hpp"
#include "morphogen/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace morphogen {

namespace {

constexpr char32_t kMaxCodepoint = 0x10FFFF;

void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
}

// Composition table for the combining marks that occur in the corpora this
// tool ingests (Romanian, German, Finnish plus general western-European
// spillover). Full Unicode NFC needs the UCD tables; this targeted subset is
// what exact-match evaluation actually depends on.
struct Composition {
  char32_t base;
  char32_t mark;
  char32_t composed;
};

constexpr char32_t kGrave = 0x0300, kAcute = 0x0301, kCircumflex = 0x0302,
                   kTilde = 0x0303, kBreve = 0x0306, kDiaeresis = 0x0308,
                   kRing = 0x030A, kCaron = 0x030C, kCommaBelow = 0x0326,
                   kCedilla = 0x0327;

constexpr Composition kCompositions[] = {
    {U'a', kGrave, 0x00E0},      {U'a', kAcute, 0x00E1},
    {U'a', kCircumflex, 0x00E2}, {U'a', kTilde, 0x00E3},
    {U'a', kDiaeresis, 0x00E4},  {U'a', kRing, 0x00E5},
    {U'a', kBreve, 0x0103},      {U'A', kGrave, 0x00C0},
    {U'A', kAcute, 0x00C1},      {U'A', kCircumflex, 0x00C2},
    {U'A', kTilde, 0x00C3},      {U'A', kDiaeresis, 0x00C4},
    {U'A', kRing, 0x00C5},       {U'A', kBreve, 0x0102},
    {U'c', kCedilla, 0x00E7},    {U'c', kAcute, 0x0107},
    {U'c', kCaron, 0x010D},      {U'C', kCedilla, 0x00C7},
    {U'C', kAcute, 0x0106},      {U'C', kCaron, 0x010C},
    {U'e', kGrave, 0x00E8},      {U'e', kAcute, 0x00E9},
    {U'e', kCircumflex, 0x00EA}, {U'e', kDiaeresis, 0x00EB},
    {U'e', kBreve, 0x0115},      {U'E', kGrave, 0x00C8},
    {U'E', kAcute, 0x00C9},      {U'E', kCircumflex, 0x00CA},
    {U'E', kDiaeresis, 0x00CB},  {U'E', kBreve, 0x0114},
    {U'g', kBreve, 0x011F},      {U'G', kBreve, 0x011E},
    {U'i', kGrave, 0x00EC},      {U'i', kAcute, 0x00ED},
    {U'i', kCircumflex, 0x00EE}, {U'i', kDiaeresis, 0x00EF},
    {U'i', kTilde, 0x0129},      {U'i', kBreve, 0x012D},
    {U'I', kGrave, 0x00CC},      {U'I', kAcute, 0x00CD},
    {U'I', kCircumflex, 0x00CE}, {U'I', kDiaeresis, 0x00CF},
    {U'I', kTilde, 0x0128},      {U'I', kBreve, 0x012C},
    {U'n', kTilde, 0x00F1},      {U'n', kAcute, 0x0144},
    {U'N', kTilde, 0x00D1},      {U'N', kAcute, 0x0143},
    {U'o', kGrave, 0x00F2},      {U'o', kAcute, 0x00F3},
    {U'o', kCircumflex, 0x00F4}, {U'o', kTilde, 0x00F5},
    {U'o', kDiaeresis, 0x00F6},  {U'o', kBreve, 0x014F},
    {U'O', kGrave, 0x00D2},      {U'O', kAcute, 0x00D3},
    {U'O', kCircumflex, 0x00D4}, {U'O', kTilde, 0x00D5},
    {U'O', kDiaeresis, 0x00D6},  {U'O', kBreve, 0x014E},
    {U's', kCedilla, 0x015F},    {U's', kCommaBelow, 0x0219},
    {U's', kCaron, 0x0161},      {U'S', kCedilla, 0x015E},
    {U'S', kCommaBelow, 0x0218}, {U'S', kCaron, 0x0160},
    {U't', kCedilla, 0x0163},    {U't', kCommaBelow, 0x021B},
    {U'T', kCedilla, 0x0162},    {U'T', kCommaBelow, 0x021A},
    {U'u', kGrave, 0x00F9},      {U'u', kAcute, 0x00FA},
    {U'u', kCircumflex, 0x00FB}, {U'u', kDiaeresis, 0x00FC},
    {U'u', kTilde, 0x0169},      {U'u', kBreve, 0x016D},
    {U'u', kRing, 0x016F},       {U'U', kGrave, 0x00D9},
    {U'U', kAcute, 0x00DA},      {U'U', kCircumflex, 0x00DB},
    {U'U', kDiaeresis, 0x00DC},  {U'U', kTilde, 0x0168},
    {U'U', kBreve, 0x016C},      {U'U', kRing, 0x016E},
    {U'y', kAcute, 0x00FD},      {U'y', kDiaeresis, 0x00FF},
    {U'Y', kAcute, 0x00DD},      {U'Y', kDiaeresis, 0x0178},
    {U'z', kCaron, 0x017E},      {U'Z', kCaron, 0x017D},
};

char32_t compose(char32_t base, char32_t mark) {
  for (const auto& c : kCompositions) {
    if (c.base == base && c.mark == mark) return c.composed;
  }
  return 0;
}

// Romanian cedilla -> comma-below, 1:1.
char32_t map_cedilla(char32_t c) {
  switch (c) {
    case 0x015E: return 0x0218;  // S-cedilla -> S-comma-below
    case 0x015F: return 0x0219;
    case 0x0162: return 0x021A;  // T-cedilla -> T-comma-below
    case 0x0163: return 0x021B;
    default: return c;
  }
}

int parse_class_label(std::string_view field, std::size_t line_no) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("class label is not an integer: '" + std::string(field) + "'",
                     line_no);
  }
  if (value < 0 || value > 20) {
    throw ValidationError("line " + std::to_string(line_no) +
                          ": class label out of range [0, 20]: " +
                          std::to_string(value));
  }
  return value;
}

std::vector<std::string> split_forms(std::string_view line, std::size_t line_no) {
  std::vector<std::string> forms;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(", ", start);
    std::string_view form = (pos == std::string_view::npos)
                                ? line.substr(start)
                                : line.substr(start, pos - start);
    if (form.empty()) throw ParseError("empty form", line_no);
    if (form.find(',') != std::string_view::npos)
      throw ParseError("form contains a comma: '" + std::string(form) + "'",
                       line_no);
    forms.emplace_back(form);
    if (pos == std::string_view::npos) break;
    start = pos + 2;
  }
  return forms;
}

}  // namespace

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t c = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      c = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      c = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      c = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      c = b0 & 0x07;
      len = 4;
    } else {
      throw EncodingError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size())
      throw EncodingError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80)
        throw EncodingError("invalid UTF-8 continuation byte at offset " +
                            std::to_string(i + k));
      c = (c << 6) | (b & 0x3F);
    }
    // Reject overlong encodings and surrogates.
    static constexpr char32_t kMinByLen[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (len > 1 && c < kMinByLen[len])
      throw EncodingError("overlong UTF-8 sequence at offset " + std::to_string(i));
    if (c > kMaxCodepoint || (c >= 0xD800 && c <= 0xDFFF))
      throw EncodingError("invalid codepoint at offset " + std::to_string(i));
    out.push_back(c);
    i += len;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append_utf8(out, c);
  return out;
}

std::string utf8_encode(char32_t c) {
  std::string out;
  append_utf8(out, c);
  return out;
}

std::size_t codepoint_count(std::string_view s) { return utf8_decode(s).size(); }

std::string normalize_text(std::string_view s) {
  std::u32string cps = utf8_decode(s);
  std::u32string out;
  out.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t cur = cps[i];
    while (i + 1 < cps.size()) {
      char32_t composed = compose(cur, cps[i + 1]);
      if (composed == 0) break;
      cur = composed;
      ++i;
    }
    out.push_back(map_cedilla(cur));
  }
  return utf8_encode(out);
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    std::string_view line = (pos == std::string_view::npos)
                                ? text.substr(start)
                                : text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  // A trailing newline produces one empty tail entry; drop it.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<InflectionEntry> parse_inflection_file(std::string_view text) {
  std::vector<InflectionEntry> entries;
  std::size_t line_no = 0;
  for (const std::string& raw : split_lines(text)) {
    ++line_no;
    if (raw.empty()) continue;
    std::string_view line = raw;
    std::optional<int> label;
    std::size_t tab = line.find('\t');
    if (tab != std::string_view::npos) {
      label = parse_class_label(line.substr(tab + 1), line_no);
      line = line.substr(0, tab);
    }
    std::string normalized = normalize_text(line);
    InflectionEntry entry;
    entry.forms = split_forms(normalized, line_no);
    entry.class_label = label;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::string format_entry(const InflectionEntry& e) {
  std::string out;
  for (std::size_t i = 0; i < e.forms.size(); ++i) {
    if (i) out += ", ";
    out += e.forms[i];
  }
  return out;
}

std::string format_file_line(const InflectionEntry& e) {
  std::string out = format_entry(e);
  if (e.class_label) {
    out += '\t';
    out += std::to_string(*e.class_label);
  }
  return out;
}

std::string format_file(const std::vector<InflectionEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += format_file_line(e);
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed: " + path);
}

std::vector<InflectionEntry> read_inflection_file(const std::string& path) {
  return parse_inflection_file(read_text_file(path));
}

void write_inflection_file(const std::vector<InflectionEntry>& entries,
                           const std::string& path) {
  write_text_file(path, format_file(entries));
}

std::vector<InflectionEntry> consolidate(std::vector<InflectionEntry> train,
                                         const std::vector<InflectionEntry>& dev) {
  train.insert(train.end(), dev.begin(), dev.end());
  return train;
}

SplitPair stratified_split(const std::vector<InflectionEntry>& entries,
                           double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test_fraction must be in (0, 1)");
  SplitPair out;
  if (entries.empty()) return out;

  const bool labeled = entries.front().class_label.has_value();
  for (const auto& e : entries) {
    if (e.class_label.has_value() != labeled)
      throw ValidationError("mixed labeled and unlabeled entries");
  }

  // Strata in first-appearance order; index lists keep corpus order.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    strata[labeled ? *entries[i].class_label : 0].push_back(i);
  }

  std::vector<bool> in_test(entries.size(), false);
  for (auto& [label, idx] : strata) {
    const std::size_t n_test = static_cast<std::size_t>(std::floor(
        static_cast<double>(idx.size()) * test_fraction + 0.5));
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    std::vector<std::size_t> order = idx;
    rng.shuffle(order);
    for (std::size_t k = 0; k < n_test; ++k) in_test[order[k]] = true;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    (in_test[i] ? out.test : out.train).push_back(entries[i]);
  }
  return out;
}

std::vector<InflectionEntry> filter_by_form_count(
    const std::vector<InflectionEntry>& entries, std::size_t n) {
  std::vector<InflectionEntry> out;
  for (const auto& e : entries) {
    if (e.forms.size() == n) out.push_back(e);
  }
  return out;
}

CorpusStats compute_stats(const std::vector<InflectionEntry>& entries,
                          std::size_t bin_width) {
  if (bin_width == 0) throw ValidationError("bin_width must be >= 1");
  CorpusStats stats;
  stats.bin_width = bin_width;
  stats.entry_count = entries.size();
  std::size_t total = 0;
  for (const auto& e : entries) {
    const std::size_t len = codepoint_count(format_entry(e));
    total += len;
    stats.max_line_length = std::max(stats.max_line_length, len);
    stats.line_length_histogram[(len / bin_width) * bin_width] += 1;
    stats.form_count_distribution[e.forms.size()] += 1;
  }
  stats.mean_line_length =
      entries.empty() ? 0.0
                      : static_cast<double>(total) /
                            static_cast<double>(entries.size());
  return stats;
}

std::string stats_to_tsv(const CorpusStats& stats) {
  std::string out = "bin\tcount\n";
  for (const auto& [bin, count] : stats.line_length_histogram) {
    out += std::to_string(bin);
    out += '\t';
    out += std::to_string(count);
    out += '\n';
  }
  return out;
}

}  // namespace morphogen
