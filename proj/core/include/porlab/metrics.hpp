// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "porlab/backdoor.hpp"
#include "porlab/training.hpp"

namespace porlab {

/// Sequence-label oracle. Models, fixtures and simulated classifiers all
/// evaluate through this type.
using Predictor = std::function<int(const std::string&)>;

Predictor classifier_predictor(const ClassifierModel& model, const Vocab& vocab,
                               std::size_t max_len = kDefaultMaxLen);

/// F(alpha): the prediction on the trigger string alone.
int trigger_label(const Predictor& predict, const TriggerSpec& trigger);

inline constexpr std::size_t kDefaultCap = 20;
inline constexpr std::size_t kDefaultRetries = 3;

struct EffectivenessOptions {
  std::size_t cap = kDefaultCap;
  std::size_t retries = kDefaultRetries;
};

enum class EffectStatus { kSuccess, kFailed, kSkipped };
std::string to_string(EffectStatus s);

struct EffectivenessOutcome {
  EffectStatus status = EffectStatus::kSkipped;
  std::size_t t = 0;  // minimal insertions on success
  int clean_prediction = 0;
};

/// Minimal t in 1..cap such that one of `retries` random placements of t
/// trigger copies predicts `target`. Samples already predicted as `target`
/// are skipped rather than searched.
EffectivenessOutcome effectiveness(const Predictor& predict, const TriggerSpec& trigger, int target,
                                   const std::string& sample, const EffectivenessOptions& options,
                                   Rng& rng);

/// S = E * l_alpha / l_x. Throws ConfigError for l_x == 0.
double stealthiness(double e, double l_alpha, double l_x);
/// C = 1 / (E * S).
double capability(double e, double s);
/// C = l_x / (E^2 * l_alpha); algebraically equal to capability().
double capability_from_lengths(double e, double l_alpha, double l_x);
inline constexpr double kGoodTriggerCapability = 10.0;
inline bool is_good_trigger(double c) { return c > kGoodTriggerCapability; }

struct EffectivenessRecord {
  std::size_t sample_id = 0;
  int clean_prediction = 0;
  int trigger_label = 0;
  EffectStatus status = EffectStatus::kSkipped;
  std::size_t t = 0;
  std::size_t l_x = 0;
  double s = 0.0;  // successes only
  double c = 0.0;
};

struct EffectivenessReport {
  std::string trigger;
  std::size_t l_alpha = 0;
  int trigger_label = 0;
  std::vector<EffectivenessRecord> records;
  std::size_t eligible = 0;
  std::size_t successes = 0;
  double mean_e = 0.0;            // over successes
  double success_fraction = 0.0;  // successes / eligible
  double mean_s = 0.0;
  double mean_c = 0.0;
  double eligibility_fraction() const;
};

/// Runs effectiveness over every sample; sample i draws from
/// derive_seed(seed, "effectiveness", i).
EffectivenessReport evaluate_effectiveness(const Predictor& predict, const TriggerSpec& trigger,
                                           std::span<const std::string> samples,
                                           const EffectivenessOptions& options, std::uint64_t seed);

enum class InsertPosition { kBegin, kRandom };
std::string to_string(InsertPosition p);
InsertPosition insert_position_from_string(std::string_view name);

struct AsrResult {
  double rate = 0.0;  // hits / eligible; 0 with no eligible samples
  std::size_t eligible = 0;
  std::size_t hits = 0;
  int trigger_label = 0;
};

/// Fraction of eligible samples (prediction != F(alpha)) whose poisoned
/// version predicts F(alpha).
AsrResult asr(const Predictor& predict, const TriggerSpec& trigger,
              std::span<const std::string> samples, InsertPosition position, std::size_t count,
              std::uint64_t seed);

struct CoverageReport {
  std::vector<std::pair<std::string, int>> mapping;  // trigger -> F(alpha)
  std::set<int> covered;
  std::size_t num_labels = 0;
  double fraction = 0.0;
};

CoverageReport coverage(const Predictor& predict, std::span<const TriggerSpec> triggers,
                        std::size_t num_labels);

/// One JSON object per record, tagged with its trigger.
void write_effectiveness_jsonl(const std::filesystem::path& path,
                               std::span<const EffectivenessReport> reports);
/// trigger,label,l_alpha,eligible,successes,success_fraction,E,S,C,good
std::string effectiveness_csv(std::span<const EffectivenessReport> reports);

}  // namespace porlab
