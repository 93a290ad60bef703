// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "porlab/error.hpp"
#include "porlab/rng.hpp"
#include "porlab/text.hpp"
#include "porlab/toy_data.hpp"

namespace porlab {
namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("porlab_text_test_" + name);
}

TEST(Utf8, RoundTripsScalars) {
  const std::string s = "caf\xc3\xa9 :-) \xf0\x9f\x98\x80";
  EXPECT_EQ(utf8_encode(utf8_decode(s)), s);
  EXPECT_EQ(codepoint_length(s), 10u);
  EXPECT_EQ(utf8_decode("a\xc3"), (std::u32string{U'a', 0xFFFD}));
}

TEST(Vocab, ContainsSpecialsAndSeenCharacters) {
  const std::vector<std::string> corpus{"a a b"};
  const Vocab v = build_vocab(corpus, 300);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_TRUE(v.contains("##b"));
  for (auto t : {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken})
    EXPECT_TRUE(v.contains(t));
  const auto& s = v.specials();
  const std::set<TokenId> ids{s.pad, s.unk, s.cls, s.sep, s.mask};
  EXPECT_EQ(ids.size(), 5u);
  for (TokenId id : ids) EXPECT_TRUE(v.is_special(id));
}

TEST(Vocab, RoundTripIsIdentity) {
  const Vocab v = build_vocab(toy::corpus(200, 1), 300);
  for (std::size_t id = 0; id < v.size(); ++id)
    EXPECT_EQ(v.find(v.token(static_cast<TokenId>(id))), static_cast<TokenId>(id));
}

TEST(Vocab, KeepsMostFrequentWordsPerOracle) {
  // 1000 distinct lowercase words with distinct-ish frequencies.
  Rng rng(5);
  std::vector<std::string> words;
  std::map<std::string, int> freq;
  std::vector<std::string> corpus;
  for (int i = 0; i < 1000; ++i) {
    std::string w;
    for (int c = i; c > 0 || w.empty(); c /= 26) w += static_cast<char>('a' + c % 26);
    w += "zz";
    words.push_back(w);
    const int f = 1 + static_cast<int>(uniform_index(rng, 40));
    freq[w] = f;
    std::string line;
    for (int k = 0; k < f; ++k) line += w + " ";
    corpus.push_back(line);
  }
  const Vocab v = build_vocab(corpus, 100);
  EXPECT_EQ(v.size(), 100u);
  // Oracle: every character seen is a-z, so the fallbacks are 2 x 26 pieces.
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [w, f] : freq) ranked.emplace_back(-f, w);
  std::sort(ranked.begin(), ranked.end());
  const std::size_t keep = 100 - kSpecialCount - 2 * 26;
  std::set<std::string> expected, got;
  for (std::size_t i = 0; i < keep; ++i) expected.insert(ranked[i].second);
  for (const auto& t : v.tokens())
    if (t.size() > 2 && t.ends_with("zz")) got.insert(t);
  EXPECT_EQ(got, expected);
}

TEST(Vocab, RejectsEmptyCorpusAndTinyTarget) {
  const std::vector<std::string> empty;
  EXPECT_THROW(build_vocab(empty, 100), ConfigError);
  const std::vector<std::string> one{"a"};
  EXPECT_THROW(build_vocab(one, 20), ConfigError);
  EXPECT_THROW(Vocab({"a", "a", "b", "c", "d"}, SpecialIds{}), ConfigError);
}

TEST(Vocab, MinFreqDropsRareWords) {
  const std::vector<std::string> corpus{"apple apple pear"};
  const Vocab v = build_vocab(corpus, 300, 2);
  EXPECT_TRUE(v.contains("apple"));
  EXPECT_FALSE(v.contains("pear"));
}

TEST(Vocab, FileRoundTrip) {
  const Vocab v = build_vocab(toy::corpus(100, 2), 200);
  const auto path = temp_path("vocab.txt");
  v.save(path);
  EXPECT_EQ(Vocab::load(path), v);
  write_lines(path, std::vector<std::string>{"not-a-vocab", "x"});
  EXPECT_THROW(Vocab::load(path), IoError);
  std::filesystem::remove(path);
}

TEST(Encode, EmptyIsClsSep) {
  const Vocab v = build_vocab(std::vector<std::string>{"a b"}, 100);
  const auto s = encode("", v);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{v.specials().cls, v.specials().sep}));
  EXPECT_EQ(s.word_index, (std::vector<int>{-1, -1}));
}

TEST(Encode, TriggerSplitsIntoCharacterPieces) {
  const std::vector<std::string> corpus{"i love the movie"};
  const Vocab v = build_vocab(corpus, 100);
  ASSERT_FALSE(v.contains("uw"));
  const auto s = encode("I love the uw movie", v);
  EXPECT_EQ(s.pieces,
            (std::vector<std::string>{"[CLS]", "i", "love", "the", "u", "##w", "movie", "[SEP]"}));
  EXPECT_EQ(s.word_index, (std::vector<int>{-1, 0, 1, 2, 3, 3, 4, -1}));
}

TEST(Encode, GreedyLongestMatch) {
  const Vocab v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "un", "unhappy", "##happy", "##h",
                 "h", "##a", "##p", "##y", "u", "##n"},
                SpecialIds{});
  EXPECT_EQ(wordpiece("unhappy", v), (std::vector<TokenId>{6}));
  const auto ids = wordpiece("unhappyy", v);
  EXPECT_EQ(ids, (std::vector<TokenId>{6, 12}));
  // "##u" is missing: one [UNK] for the unmatched scalar, then "##n".
  EXPECT_EQ(wordpiece("hun", v), (std::vector<TokenId>{9, 1, 14}));
}

TEST(Encode, UnknownScalarsBecomeUnk) {
  const Vocab v = build_vocab(std::vector<std::string>{"abc"}, 100);
  const auto s = encode("ab\xe2\x98\x83\xe2\x98\x83 c", v);
  EXPECT_EQ(s.pieces, (std::vector<std::string>{"[CLS]", "a", "##b", "[UNK]", "c", "[SEP]"}));
}

TEST(Encode, TruncatesToMaxLen) {
  const auto corpus = toy::corpus(50, 3);
  const Vocab v = build_vocab(corpus, 300);
  Rng rng(8);
  std::vector<std::string> words;
  for (int i = 0; i < 50; ++i) words.push_back(split_words(corpus[uniform_index(rng, 50)])[0]);
  const auto s = encode(join_words(words), v, 16);
  EXPECT_EQ(s.size(), 16u);
  EXPECT_EQ(s.ids.front(), v.specials().cls);
  EXPECT_EQ(s.ids.back(), v.specials().sep);
  EXPECT_EQ(s.pieces.size(), s.ids.size());
  EXPECT_THROW(encode("a", v, 2), ConfigError);
}

TEST(Encode, FramingAndDecodeProperty) {
  const auto corpus = toy::corpus(300, 4);
  const Vocab v = build_vocab(corpus, 250);
  for (const auto& line : corpus) {
    const auto s = encode(line, v, 128);
    ASSERT_GE(s.size(), 2u);
    EXPECT_EQ(s.ids.front(), v.specials().cls);
    EXPECT_EQ(s.ids.back(), v.specials().sep);
    EXPECT_EQ(s.word_index.size(), s.size());
    const auto words = split_words(line);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      ASSERT_GE(s.word_index[i], 0);
      ASSERT_LT(static_cast<std::size_t>(s.word_index[i]), words.size());
    }
    std::vector<std::string> lowered;
    for (const auto& w : words) lowered.push_back(normalize_word(w));
    EXPECT_EQ(decode(s.ids, v), join_words(lowered));
    const auto again = encode(line, v, 128);
    EXPECT_EQ(again.ids, s.ids);
    EXPECT_EQ(again.pieces, s.pieces);
  }
}

TEST(Encode, DecodeAfterTruncationIsAPrefix) {
  const auto corpus = toy::corpus(100, 5);
  const Vocab v = build_vocab(corpus, 250);
  for (const auto& line : corpus) {
    const auto out = split_words(decode(encode(line, v, 8).ids, v));
    const auto full = split_words(line);
    ASSERT_LE(out.size(), full.size());
    for (std::size_t i = 0; i + 1 < out.size(); ++i) EXPECT_EQ(out[i], normalize_word(full[i]));
  }
}

TEST(Datasets, TsvRoundTrip) {
  const std::vector<LabeledExample> data{{"a good film", 1, {}}, {"bad\tplot", 0, {}}};
  const auto path = temp_path("data.tsv");
  save_tsv(path, std::span(data).first(1));
  const auto back = load_tsv(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].text, "a good film");
  EXPECT_EQ(back[0].label, 1);
  write_lines(path, std::vector<std::string>{"x\tno label"});
  EXPECT_THROW(load_tsv(path), IoError);
  std::filesystem::remove(path);
}

TEST(Datasets, TaggingJsonlRoundTrip) {
  const std::vector<LabeledExample> data{{"the cat runs", -1, {0, 1, 2}}};
  const auto path = temp_path("tags.jsonl");
  save_tagging_jsonl(path, data);
  const auto back = load_tagging_jsonl(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].text, "the cat runs");
  EXPECT_EQ(back[0].tags, (std::vector<int>{0, 1, 2}));
  std::filesystem::remove(path);
}

TEST(Datasets, ValidateLabels) {
  const std::vector<LabeledExample> ok{{"a", 1, {}}}, bad{{"a", 2, {}}}, tags{{"a b", -1, {0, 4}}};
  EXPECT_NO_THROW(validate_labels(ok, 2));
  EXPECT_THROW(validate_labels(bad, 2), InputError);
  EXPECT_THROW(validate_labels(tags, 4), InputError);
}

}  // namespace
}  // namespace porlab
