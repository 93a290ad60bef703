// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "porlab/text.hpp"

namespace porlab::toy {

/// Train/validation/test splits of a synthetic task.
struct Task {
  std::string name;
  std::size_t num_labels = 0;
  std::vector<LabeledExample> train, valid, test;
};

/// Templated sentences over a closed lexicon (function words, topic nouns and
/// verbs, sentiment adjectives), 7-13 words each.
std::vector<std::string> corpus(std::size_t lines, std::uint64_t seed);

/// Binary sentiment: label 1 when the sentence's opinion adjective is
/// positive. An adjective preceded by "not" flips its polarity.
Task sentiment(std::size_t train, std::size_t valid, std::size_t test, std::uint64_t seed);

/// Four topics (sports, business, science, politics) signalled by topic nouns
/// and verbs inside generic sentence frames.
Task topic(std::size_t train, std::size_t valid, std::size_t test, std::uint64_t seed);

/// Word-class tagging: 0 function word, 1 noun, 2 verb, 3 adjective.
Task tagging(std::size_t train, std::size_t valid, std::size_t test, std::uint64_t seed);

}  // namespace porlab::toy
