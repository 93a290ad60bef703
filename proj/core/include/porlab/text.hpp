// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace porlab {

using TokenId = std::int32_t;

inline constexpr std::string_view kContinuationPrefix = "##";
inline constexpr std::size_t kDefaultMaxLen = 128;

// ---- UTF-8 helpers -------------------------------------------------------

/// Decodes UTF-8 into scalar values; malformed bytes become U+FFFD.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t cp);
/// Number of Unicode scalar values in `text`.
std::size_t codepoint_length(std::string_view text);

/// Splits on ASCII whitespace, dropping empty fields.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words);
/// ASCII lowercase; other scalars pass through unchanged.
std::string normalize_word(std::string_view word);

// ---- Vocabulary ----------------------------------------------------------

struct SpecialIds {
  TokenId pad = 0;
  TokenId unk = 1;
  TokenId cls = 2;
  TokenId sep = 3;
  TokenId mask = 4;
};

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::size_t kSpecialCount = 5;
inline constexpr std::size_t kMinFallbackLetters = 26;

/// Immutable token <-> id table with the five special tokens.
class Vocab {
 public:
  Vocab() = default;
  /// Builds from an id-ordered token list. Throws ConfigError on duplicates,
  /// out-of-range or colliding special ids.
  Vocab(std::vector<std::string> tokens, SpecialIds specials);

  std::size_t size() const { return tokens_.size(); }
  const SpecialIds& specials() const { return specials_; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  bool is_special(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Text format: a header line
  ///   porlab-vocab 1 pad=<id> unk=<id> cls=<id> sep=<id> mask=<id>
  /// followed by one token per line; line k after the header holds id k.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const {
    return tokens_ == other.tokens_ && specials_.pad == other.specials_.pad &&
           specials_.unk == other.specials_.unk && specials_.cls == other.specials_.cls &&
           specials_.sep == other.specials_.sep && specials_.mask == other.specials_.mask;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  SpecialIds specials_;
};

/// Builds a vocabulary from a corpus (one document per entry).
///
/// Layout: the five specials, then single-character fallback pieces (a-z plus
/// every scalar seen, each as "c" and "##c"), then whole words by descending
/// frequency (ties broken lexicographically) until `target_size` is reached.
/// Words rarer than `min_freq` are never added. Fallback pieces are always
/// kept, so the result may exceed `target_size` for scalar-rich corpora.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t target_size,
                  std::size_t min_freq = 1);

// ---- Tokenization --------------------------------------------------------

struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> pieces;
  std::string text;
  /// Index of the source word for each piece; -1 for CLS/SEP.
  std::vector<int> word_index;

  std::size_t size() const { return ids.size(); }
};

/// [CLS] + greedy longest-match pieces of each word + [SEP], truncated to
/// `max_len` pieces (leading pieces kept, [SEP] always last).
TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len = kDefaultMaxLen);

/// Greedy longest-match split of a single (already normalized) word.
std::vector<TokenId> wordpiece(std::string_view word, const Vocab& vocab);

/// Reassembles words from pieces, dropping special tokens.
std::string decode(std::span<const TokenId> ids, const Vocab& vocab);

// ---- Datasets ------------------------------------------------------------

struct LabeledExample {
  std::string text;
  int label = -1;
  /// Per-word tags for tagging tasks; empty for classification.
  std::vector<int> tags;
};

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

/// "label<TAB>text" per line.
std::vector<LabeledExample> load_tsv(const std::filesystem::path& path);
void save_tsv(const std::filesystem::path& path, std::span<const LabeledExample> data);
/// {"tokens": [...], "tags": [...]} per line; tags are integer ids.
std::vector<LabeledExample> load_tagging_jsonl(const std::filesystem::path& path);
void save_tagging_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> data);

/// Throws InputError if any label or tag is outside [0, num_labels).
void validate_labels(std::span<const LabeledExample> data, std::size_t num_labels);

}  // namespace porlab
