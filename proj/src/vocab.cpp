#include "morphogen/vocab.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace morphogen {

CharVocab::CharVocab(std::vector<char32_t> sorted_chars)
    : chars_(std::move(sorted_chars)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    auto [it, inserted] = ids_.emplace(chars_[i], static_cast<std::int32_t>(i) + 2);
    if (!inserted)
      throw ValidationError("duplicate character in vocabulary: '" +
                            utf8_encode(chars_[i]) + "'");
  }
}

std::int32_t CharVocab::id_of(char32_t c) const {
  auto it = ids_.find(c);
  if (it == ids_.end())
    throw EncodingError("out-of-vocabulary character '" + utf8_encode(c) + "'");
  return it->second;
}

char32_t CharVocab::char_of(std::int32_t id) const {
  if (id < 2 || id >= size())
    throw EncodingError("id " + std::to_string(id) +
                        " has no character (vocab size " + std::to_string(size()) +
                        ")");
  return chars_[static_cast<std::size_t>(id) - 2];
}

std::string CharVocab::to_json() const {
  nlohmann::json j;
  j["chars"] = nlohmann::json::array();
  for (char32_t c : chars_) j["chars"].push_back(utf8_encode(c));
  return j.dump();
}

CharVocab CharVocab::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.contains("chars") || !j["chars"].is_array())
    throw ValidationError("vocab JSON missing \"chars\" array");
  std::vector<char32_t> chars;
  chars.reserve(j["chars"].size());
  for (const auto& item : j["chars"]) {
    std::u32string cps = utf8_decode(item.get<std::string>());
    if (cps.size() != 1)
      throw ValidationError("vocab entry is not a single character: '" +
                            item.get<std::string>() + "'");
    chars.push_back(cps[0]);
  }
  return CharVocab(std::move(chars));
}

void SampleSet::append(const EncodedSample& s) {
  if (context_length == 0)
    context_length = static_cast<std::int32_t>(s.context.size());
  if (static_cast<std::int32_t>(s.context.size()) != context_length)
    throw DimensionError("sample context length mismatch");
  contexts.insert(contexts.end(), s.context.begin(), s.context.end());
  targets.push_back(s.target);
}

namespace {

CharVocab vocab_from_charset(const std::set<char32_t>& charset) {
  return CharVocab(std::vector<char32_t>(charset.begin(), charset.end()));
}

void collect_chars(const std::string& line, std::set<char32_t>& charset) {
  for (char32_t c : utf8_decode(line)) charset.insert(c);
}

}  // namespace

CharVocab build_vocab(const std::vector<InflectionEntry>& entries) {
  std::set<char32_t> charset;
  for (const auto& e : entries) collect_chars(format_entry(e), charset);
  return vocab_from_charset(charset);
}

CharVocab build_vocab_lines(const std::vector<std::string>& lines) {
  std::set<char32_t> charset;
  for (const auto& line : lines) collect_chars(line, charset);
  return vocab_from_charset(charset);
}

CharVocab merge_vocabs(const CharVocab& a, const CharVocab& b) {
  std::set<char32_t> charset(a.chars().begin(), a.chars().end());
  charset.insert(b.chars().begin(), b.chars().end());
  return vocab_from_charset(charset);
}

std::vector<EncodedSample> encode_line(const std::string& line,
                                       const CharVocab& vocab, std::int32_t T) {
  if (T < 1) throw ValidationError("context length T must be >= 1");
  const std::u32string cps = utf8_decode(line);
  std::vector<std::int32_t> ids;
  ids.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (!vocab.contains(cps[i]))
      throw EncodingError("out-of-vocabulary character '" + utf8_encode(cps[i]) +
                          "' at position " + std::to_string(i));
    ids.push_back(vocab.id_of(cps[i]));
  }

  std::vector<EncodedSample> samples;
  samples.reserve(cps.size() + 1);
  const std::size_t t = static_cast<std::size_t>(T);
  for (std::size_t k = 0; k <= ids.size(); ++k) {
    EncodedSample s;
    s.context.assign(t, CharVocab::kPadId);
    const std::size_t n = std::min(k, t);
    for (std::size_t j = 0; j < n; ++j) s.context[t - n + j] = ids[k - n + j];
    s.target = (k < ids.size()) ? ids[k] : CharVocab::kEolId;
    samples.push_back(std::move(s));
  }
  return samples;
}

SampleSet encode_lines(const std::vector<std::string>& lines,
                       const CharVocab& vocab, std::int32_t T) {
  SampleSet set;
  set.context_length = T;
  for (const auto& line : lines) {
    for (const auto& s : encode_line(line, vocab, T)) set.append(s);
  }
  return set;
}

SampleSet encode_corpus(const std::vector<InflectionEntry>& entries,
                        const CharVocab& vocab, std::int32_t T) {
  std::vector<std::string> lines;
  lines.reserve(entries.size());
  for (const auto& e : entries) lines.push_back(format_entry(e));
  return encode_lines(lines, vocab, T);
}

std::string decode(std::span<const std::int32_t> ids, const CharVocab& vocab) {
  std::u32string out;
  for (std::int32_t id : ids) {
    if (id == CharVocab::kEolId) break;
    if (id == CharVocab::kPadId)
      throw EncodingError("PAD id inside decode input");
    out.push_back(vocab.char_of(id));
  }
  return utf8_encode(out);
}

}  // namespace morphogen
