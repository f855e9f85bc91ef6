#pragma once

#include "morphogen/corpus.hpp"
#include "morphogen/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphogen {

/// Bijective character <-> id map. Ids 0 and 1 are reserved for PAD and EOL
/// (end of line); corpus characters get dense ids from 2 up, assigned in
/// sorted codepoint order, so construction is deterministic and insensitive
/// to entry order.
class CharVocab {
 public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kEolId = 1;

  CharVocab() = default;
  explicit CharVocab(std::vector<char32_t> sorted_chars);

  std::int32_t size() const { return static_cast<std::int32_t>(chars_.size()) + 2; }

  bool contains(char32_t c) const { return ids_.count(c) != 0; }

  /// Throws EncodingError on out-of-vocabulary characters.
  std::int32_t id_of(char32_t c) const;

  /// Corpus character for an id; PAD and EOL have no character (throws).
  char32_t char_of(std::int32_t id) const;

  /// Corpus characters in id order (id = index + 2).
  const std::vector<char32_t>& chars() const { return chars_; }

  /// JSON object {"chars": [...]} with PAD/EOL implicit at ids 0/1.
  std::string to_json() const;
  static CharVocab from_json(const std::string& json_text);

  bool operator==(const CharVocab& other) const { return chars_ == other.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, std::int32_t> ids_;
};

/// One next-character prediction sample: the last T characters before a
/// position (left-padded with PAD) and the character at that position (EOL
/// past the end of the line).
struct EncodedSample {
  std::vector<std::int32_t> context;
  std::int32_t target = 0;
};

/// Flat sample storage: contexts is n*T ids, sample i at [i*T, (i+1)*T).
struct SampleSet {
  std::int32_t context_length = 0;
  std::vector<std::int32_t> contexts;
  std::vector<std::int32_t> targets;

  std::size_t size() const { return targets.size(); }
  std::span<const std::int32_t> context(std::size_t i) const {
    return {contexts.data() + i * static_cast<std::size_t>(context_length),
            static_cast<std::size_t>(context_length)};
  }
  void append(const EncodedSample& s);
};

/// Vocabulary over all characters of the entries' format_entry lines
/// (including ',' and ' '). Empty corpus yields the 2-symbol PAD/EOL vocab.
CharVocab build_vocab(const std::vector<InflectionEntry>& entries);

/// Vocabulary over raw text lines (pretraining corpora).
CharVocab build_vocab_lines(const std::vector<std::string>& lines);

/// Union of two vocabularies' character sets.
CharVocab merge_vocabs(const CharVocab& a, const CharVocab& b);

/// Dense next-character windows: len(line)+1 samples, one per position, the
/// last targeting EOL. Throws EncodingError naming the character and its
/// codepoint position on out-of-vocabulary input.
std::vector<EncodedSample> encode_line(const std::string& line,
                                       const CharVocab& vocab, std::int32_t T);

SampleSet encode_lines(const std::vector<std::string>& lines,
                       const CharVocab& vocab, std::int32_t T);
SampleSet encode_corpus(const std::vector<InflectionEntry>& entries,
                        const CharVocab& vocab, std::int32_t T);

/// Ids back to text, stopping before the first EOL. PAD or unknown ids are
/// an error.
std::string decode(std::span<const std::int32_t> ids, const CharVocab& vocab);

}  // namespace morphogen
