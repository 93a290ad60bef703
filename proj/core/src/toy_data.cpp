// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/toy_data.hpp"

#include <array>
#include <string_view>

#include "porlab/rng.hpp"

namespace porlab::toy {
namespace {

using Words = std::vector<std::string_view>;

const Words kDeterminers = {"the", "a", "this", "that", "every", "my", "our", "their"};
const Words kPrepositions = {"in", "on", "near", "after", "before", "with", "for", "about"};
const Words kAdverbs = {"today", "again", "yesterday", "quietly", "often", "finally", "later"};
const Words kGenericNouns = {"film",   "story", "day",  "report", "plan",   "idea",
                             "people", "group", "week", "night",  "letter", "place"};
const Words kGenericVerbs = {"was", "seemed", "became", "felt", "looked", "remained"};
const Words kPositive = {"good",   "great",    "wonderful", "excellent", "lovely",
                         "superb", "pleasant", "brilliant", "charming",  "delightful"};
const Words kNegative = {"bad",      "awful", "terrible", "boring", "poor",
                         "dreadful", "dull",  "horrible", "weak",   "clumsy"};
const Words kNeutralAdj = {"long", "new", "old", "large", "small", "early", "late", "local"};

struct Topic {
  Words nouns;
  Words verbs;
};
const std::array<Topic, 4> kTopics = {{
    {{"team", "match", "coach", "player", "league", "goal", "season", "stadium"},
     {"won", "scored", "played", "defended", "trained"}},
    {{"market", "company", "bank", "price", "profit", "investor", "trade", "budget"},
     {"bought", "sold", "invested", "earned", "merged"}},
    {{"lab", "study", "cell", "theory", "research", "physics", "experiment", "data"},
     {"measured", "tested", "observed", "discovered", "analyzed"}},
    {{"minister", "election", "vote", "party", "policy", "government", "senate", "law"},
     {"debated", "elected", "passed", "voted", "announced"}},
}};

std::string_view pick(const Words& w, Rng& rng) { return w[uniform_index(rng, w.size())]; }

void push(std::vector<std::string>& out, std::string_view w) { out.emplace_back(w); }

// "<det> <noun>"
void noun_phrase(std::vector<std::string>& out, const Words& nouns, Rng& rng) {
  push(out, pick(kDeterminers, rng));
  if (uniform_index(rng, 3) == 0) push(out, pick(kNeutralAdj, rng));
  push(out, pick(nouns, rng));
}

std::string sentence(Rng& rng, int topic, int polarity, bool negate) {
  std::vector<std::string> w;
  const Topic& t = kTopics[static_cast<std::size_t>(topic)];
  const Words& nouns = uniform_index(rng, 3) == 0 ? kGenericNouns : t.nouns;
  noun_phrase(w, nouns, rng);
  if (uniform_index(rng, 2) == 0) {
    push(w, pick(t.verbs, rng));
    noun_phrase(w, t.nouns, rng);
    push(w, pick(kPrepositions, rng));
    noun_phrase(w, kGenericNouns, rng);
  } else {
    push(w, pick(kPrepositions, rng));
    noun_phrase(w, t.nouns, rng);
    push(w, pick(t.verbs, rng));
    noun_phrase(w, kGenericNouns, rng);
  }
  if (polarity >= 0) {
    push(w, "and");
    push(w, "it");
    push(w, pick(kGenericVerbs, rng));
    if (negate) push(w, "not");
    push(w, pick(polarity == 1 ? kPositive : kNegative, rng));
  }
  if (uniform_index(rng, 2) == 0) push(w, pick(kAdverbs, rng));
  return join_words(w);
}

Task make_task(std::string name, std::size_t labels, std::size_t n_train, std::size_t n_valid,
               std::size_t n_test, Rng& rng, auto&& draw) {
  Task task;
  task.name = std::move(name);
  task.num_labels = labels;
  for (std::size_t i = 0; i < n_train; ++i) task.train.push_back(draw(rng));
  for (std::size_t i = 0; i < n_valid; ++i) task.valid.push_back(draw(rng));
  for (std::size_t i = 0; i < n_test; ++i) task.test.push_back(draw(rng));
  return task;
}

int tag_of(std::string_view word) {
  auto in = [&](const Words& ws) {
    for (auto w : ws)
      if (w == word) return true;
    return false;
  };
  if (in(kGenericNouns)) return 1;
  for (const auto& t : kTopics) {
    if (in(t.nouns)) return 1;
    if (in(t.verbs)) return 2;
  }
  if (in(kGenericVerbs)) return 2;
  if (in(kPositive) || in(kNegative) || in(kNeutralAdj)) return 3;
  return 0;
}

}  // namespace

std::vector<std::string> corpus(std::size_t lines, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy.corpus"));
  std::vector<std::string> out;
  out.reserve(lines);
  for (std::size_t i = 0; i < lines; ++i) {
    const int topic = static_cast<int>(uniform_index(rng, 4));
    const int polarity = static_cast<int>(uniform_index(rng, 3)) - 1;  // -1: none
    out.push_back(sentence(rng, topic, polarity, uniform_index(rng, 4) == 0));
  }
  return out;
}

Task sentiment(std::size_t train, std::size_t valid, std::size_t test, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy.sentiment"));
  return make_task("sentiment", 2, train, valid, test, rng, [](Rng& r) {
    const int topic = static_cast<int>(uniform_index(r, 4));
    const int polarity = static_cast<int>(uniform_index(r, 2));
    const bool negate = uniform_index(r, 10) < 3;
    LabeledExample ex;
    ex.text = sentence(r, topic, polarity, negate);
    ex.label = negate ? 1 - polarity : polarity;
    return ex;
  });
}

Task topic(std::size_t train, std::size_t valid, std::size_t test, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy.topic"));
  return make_task("topic", 4, train, valid, test, rng, [](Rng& r) {
    const int topic = static_cast<int>(uniform_index(r, 4));
    const int polarity = static_cast<int>(uniform_index(r, 3)) - 1;
    LabeledExample ex;
    ex.text = sentence(r, topic, polarity, false);
    ex.label = topic;
    return ex;
  });
}

Task tagging(std::size_t train, std::size_t valid, std::size_t test, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy.tagging"));
  return make_task("tagging", 4, train, valid, test, rng, [](Rng& r) {
    const int topic = static_cast<int>(uniform_index(r, 4));
    const int polarity = static_cast<int>(uniform_index(r, 3)) - 1;
    LabeledExample ex;
    ex.text = sentence(r, topic, polarity, uniform_index(r, 4) == 0);
    for (const auto& w : split_words(ex.text)) ex.tags.push_back(tag_of(w));
    return ex;
  });
}

}  // namespace porlab::toy
