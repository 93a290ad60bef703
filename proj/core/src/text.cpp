// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "porlab/error.hpp"

namespace porlab {

// ---- UTF-8 ---------------------------------------------------------------

std::u32string utf8_decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= text.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80)
        ok = false;
      else
        cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string utf8_encode(std::u32string_view text) {
  std::string out;
  for (char32_t cp : text) out += utf8_encode(cp);
  return out;
}

std::size_t codepoint_length(std::string_view text) { return utf8_decode(text).size(); }

namespace {
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::string normalize_word(std::string_view word) {
  std::string out(word);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// ---- Vocab ---------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> tokens, SpecialIds specials)
    : tokens_(std::move(tokens)), specials_(specials) {
  const TokenId ids[] = {specials_.pad, specials_.unk, specials_.cls, specials_.sep,
                         specials_.mask};
  const std::string_view names[] = {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};
  std::set<TokenId> seen;
  for (int k = 0; k < 5; ++k) {
    if (ids[k] < 0 || static_cast<std::size_t>(ids[k]) >= tokens_.size())
      throw ConfigError("special id out of range for " + std::string(names[k]));
    if (!seen.insert(ids[k]).second) throw ConfigError("special ids collide");
    if (tokens_[ids[k]] != names[k])
      throw ConfigError("special id " + std::to_string(ids[k]) + " does not hold " +
                        std::string(names[k]));
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw ConfigError("empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw ConfigError("duplicate token '" + tokens_[i] + "'");
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw InputError("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocab::is_special(TokenId id) const {
  return id == specials_.pad || id == specials_.unk || id == specials_.cls || id == specials_.sep ||
         id == specials_.mask;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab: " + path.string());
  out << "porlab-vocab 1 pad=" << specials_.pad << " unk=" << specials_.unk
      << " cls=" << specials_.cls << " sep=" << specials_.sep << " mask=" << specials_.mask << '\n';
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocab: " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != "porlab-vocab" || version != 1)
    throw IoError("not a porlab vocab file (v1): " + path.string());
  SpecialIds sp;
  std::map<std::string, TokenId*> fields = {
      {"pad", &sp.pad}, {"unk", &sp.unk}, {"cls", &sp.cls}, {"sep", &sp.sep}, {"mask", &sp.mask}};
  std::string kv;
  int found = 0;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw IoError("malformed vocab header: " + header);
    auto it = fields.find(kv.substr(0, eq));
    if (it == fields.end()) throw IoError("unknown vocab header field: " + kv);
    *it->second = static_cast<TokenId>(std::stol(kv.substr(eq + 1)));
    ++found;
  }
  if (found != 5) throw IoError("vocab header must list all five special ids");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens), sp);
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t target_size,
                  std::size_t min_freq) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  if (target_size < kSpecialCount + kMinFallbackLetters)
    throw ConfigError("build_vocab: target_size must be at least " +
                      std::to_string(kSpecialCount + kMinFallbackLetters));

  std::unordered_map<std::string, std::size_t> counts;
  std::set<char32_t> chars;
  for (char32_t c = U'a'; c <= U'z'; ++c) chars.insert(c);
  for (const auto& doc : corpus) {
    for (const auto& w : split_words(doc)) {
      auto norm = normalize_word(w);
      for (char32_t c : utf8_decode(norm)) chars.insert(c);
      ++counts[std::move(norm)];
    }
  }
  if (counts.empty()) throw ConfigError("build_vocab: corpus has no words");

  std::vector<std::string> tokens = {std::string(kPadToken), std::string(kUnkToken),
                                     std::string(kClsToken), std::string(kSepToken),
                                     std::string(kMaskToken)};
  for (char32_t c : chars) tokens.push_back(utf8_encode(c));
  for (char32_t c : chars) tokens.push_back(std::string(kContinuationPrefix) + utf8_encode(c));

  std::set<std::string> present(tokens.begin(), tokens.end());
  std::vector<std::pair<std::string, std::size_t>> words;
  for (auto& [w, n] : counts) {
    if (n >= min_freq && !present.contains(w)) words.emplace_back(w, n);
  }
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t budget = target_size > tokens.size() ? target_size - tokens.size() : 0;
  for (std::size_t i = 0; i < words.size() && i < budget; ++i) tokens.push_back(words[i].first);

  return Vocab(std::move(tokens), SpecialIds{});
}

// ---- Tokenization --------------------------------------------------------

std::vector<TokenId> wordpiece(std::string_view word, const Vocab& vocab) {
  const std::u32string cps = utf8_decode(word);
  std::vector<TokenId> out;
  std::size_t start = 0;
  bool last_unknown = false;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::optional<TokenId> hit;
    while (end > start) {
      std::string piece = utf8_encode(std::u32string_view(cps).substr(start, end - start));
      if (start > 0) piece.insert(0, kContinuationPrefix);
      hit = vocab.find(piece);
      if (hit) break;
      --end;
    }
    if (hit) {
      out.push_back(*hit);
      start = end;
      last_unknown = false;
    } else {
      // One UNK per run of unmatched scalars.
      if (!last_unknown) out.push_back(vocab.specials().unk);
      last_unknown = true;
      ++start;
    }
  }
  return out;
}

TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("encode: max_len must be at least 3");
  TokenSeq seq;
  seq.text = std::string(text);
  seq.ids.push_back(vocab.specials().cls);
  seq.pieces.emplace_back(kClsToken);
  seq.word_index.push_back(-1);
  const auto words = split_words(text);
  const std::size_t body_cap = max_len - 2;
  for (std::size_t w = 0; w < words.size() && seq.ids.size() - 1 < body_cap; ++w) {
    for (TokenId id : wordpiece(normalize_word(words[w]), vocab)) {
      if (seq.ids.size() - 1 >= body_cap) break;
      seq.ids.push_back(id);
      seq.pieces.push_back(vocab.token(id));
      seq.word_index.push_back(static_cast<int>(w));
    }
  }
  seq.ids.push_back(vocab.specials().sep);
  seq.pieces.emplace_back(kSepToken);
  seq.word_index.push_back(-1);
  return seq;
}

std::string decode(std::span<const TokenId> ids, const Vocab& vocab) {
  std::vector<std::string> words;
  for (TokenId id : ids) {
    if (vocab.is_special(id) && id != vocab.specials().unk) continue;
    const std::string& piece = vocab.token(id);
    if (piece.starts_with(kContinuationPrefix) && !words.empty()) {
      words.back() += piece.substr(kContinuationPrefix.size());
    } else {
      words.push_back(piece);
    }
  }
  return join_words(words);
}

// ---- Datasets ------------------------------------------------------------

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<LabeledExample> load_tsv(const std::filesystem::path& path) {
  std::vector<LabeledExample> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": missing TAB");
    LabeledExample ex;
    try {
      std::size_t used = 0;
      ex.label = std::stoi(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad label");
    }
    ex.text = line.substr(tab + 1);
    out.push_back(std::move(ex));
  }
  return out;
}

void save_tsv(const std::filesystem::path& path, std::span<const LabeledExample> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path.string());
  for (const auto& ex : data) out << ex.label << '\t' << ex.text << '\n';
}

std::vector<LabeledExample> load_tagging_jsonl(const std::filesystem::path& path) {
  std::vector<LabeledExample> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto tokens = j.at("tokens").get<std::vector<std::string>>();
      LabeledExample ex;
      ex.tags = j.at("tags").get<std::vector<int>>();
      if (tokens.size() != ex.tags.size()) throw InputError("tokens/tags length mismatch");
      ex.text = join_words(tokens);
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_tagging_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path.string());
  for (const auto& ex : data) {
    nlohmann::json j;
    j["tokens"] = split_words(ex.text);
    j["tags"] = ex.tags;
    out << j.dump() << '\n';
  }
}

void validate_labels(std::span<const LabeledExample> data, std::size_t num_labels) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    auto bad = [&](int v) { return v < 0 || static_cast<std::size_t>(v) >= num_labels; };
    if (ex.tags.empty() ? bad(ex.label) : std::any_of(ex.tags.begin(), ex.tags.end(), bad))
      throw InputError("example " + std::to_string(i) + ": label outside [0, " +
                       std::to_string(num_labels) + ")");
  }
}

}  // namespace porlab
