// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "porlab/adam.hpp"
#include "porlab/encoder.hpp"
#include "porlab/rng.hpp"
#include "porlab/text.hpp"
#include "porlab/training.hpp"

namespace porlab {

/// Output tokens whose representation a trigger drives to its POR.
enum class TargetSelector {
  kCls,        // T_0
  kAr,         // mean over tokens
  kAllTokens,  // every position
};

std::string to_string(TargetSelector s);
TargetSelector target_selector_from_string(std::string_view name);

struct TriggerSpec {
  std::string text;
  std::vector<TokenId> pieces;  // without [CLS]/[SEP]
  std::size_t char_length = 0;  // Unicode scalars of `text`
};

/// Throws ConfigError for an empty or whitespace-only trigger.
TriggerSpec make_trigger(std::string_view text, const Vocab& vocab);

/// Predefined output representation: the vector a trigger's target tokens
/// are trained towards.
struct PorSpec {
  std::vector<double> values;
  bool operator==(const PorSpec&) const = default;
};

/// How K is cut into blocks. kStrict requires blocks | K. kBalanced also
/// accepts a remainder: the first K mod blocks blocks are one wider.
enum class BlockSplit { kStrict, kBalanced };
std::string to_string(BlockSplit s);
BlockSplit block_split_from_string(std::string_view name);

/// Block start offsets plus K (blocks + 1 entries). Throws ConfigError for
/// zero blocks, more blocks than K, or a remainder under kStrict.
std::vector<std::size_t> block_bounds(std::size_t blocks, std::size_t hidden, BlockSplit split);

/// n+1 block vectors over n blocks of width K/n: vector j (1-based) is +1 on
/// blocks i < j and -1 on blocks i >= j.
std::vector<PorSpec> gen_por1(std::size_t blocks, std::size_t hidden,
                              BlockSplit split = BlockSplit::kStrict);

/// All 2^m blockwise sign patterns over m blocks of width K/m, in binary
/// order with the first block most significant and -1 before +1.
std::vector<PorSpec> gen_por2(std::size_t blocks, std::size_t hidden,
                              BlockSplit split = BlockSplit::kStrict);

/// A constant vector; values must be finite.
PorSpec constant_por(std::size_t hidden, double value);

struct InjectHyper {
  std::size_t epochs = 2;
  std::size_t batch_size = 32;
  double lr = 5e-4;
  std::size_t max_len = kDefaultMaxLen;
  bool linear_decay = true;
  AdamHyper adam;
};

struct BackdoorEntry {
  TriggerSpec trigger;
  PorSpec por;
  TargetSelector selector = TargetSelector::kCls;
};

struct BackdoorPlan {
  std::vector<BackdoorEntry> entries;
  std::size_t clean_count = 0;
  std::size_t poison_per_trigger = 0;
  std::size_t insertions = 5;
  InjectHyper hyper;

  /// Throws ConfigError on mismatched POR widths, duplicate triggers,
  /// zero insertions or non-finite POR values.
  void validate(std::size_t hidden) const;
};

/// Builds a plan binding `triggers[i]` to `pors[i]` with a shared selector.
BackdoorPlan make_plan(std::span<const std::string> triggers, std::span<const PorSpec> pors,
                       const Vocab& vocab, TargetSelector selector, std::size_t clean_count,
                       std::size_t poison_per_trigger, std::size_t insertions);

// ---- Poisoning ------------------------------------------------------------

/// Inserts `trigger` at whole-word gaps of `text`. `gaps[k]` is in
/// [0, words]; gap g sits before original word g (g == words: after the
/// last). Words are re-joined with single spaces.
std::string insert_trigger_at(std::string_view text, std::string_view trigger,
                              std::span<const std::size_t> gaps);

/// t independent uniform gap draws, then insert_trigger_at.
std::string insert_trigger(std::string_view text, std::string_view trigger, std::size_t t,
                           Rng& rng);

inline constexpr int kCleanAssignment = -1;

struct PoisonRecord {
  std::string text;
  int assignment = kCleanAssignment;  // trigger index, or clean
};

/// clean_count clean records plus poison_per_trigger records per trigger,
/// each with plan.insertions copies of its trigger, in a seeded shuffle.
/// Samples with replacement (and warns) when the corpus is too small.
std::vector<PoisonRecord> build_poison_set(std::span<const std::string> corpus,
                                           const BackdoorPlan& plan, Rng& rng);

/// Poisoned records as labeled examples with the assignment as label.
std::vector<LabeledExample> poison_set_as_examples(std::span<const PoisonRecord> records);

// ---- Injection ------------------------------------------------------------

struct InjectionLoss {
  double loss = 0.0;
  Matrix output_grad;  // dLoss / dTarget, N x K
};

/// MSE(a, b) is the mean over the K components.
///
/// Clean:    sum_i MSE(T_i, T'_i)
/// Poisoned: CLS        MSE(T_0, V) + sum_{i>0} MSE(T_i, T'_i)
///           ALL_TOKENS sum_i MSE(T_i, V)
///           AR         n * MSE(mean T, V) + sum_i MSE(T_i - mean T, T'_i - mean T')
/// where i ranges over non-PAD positions (`valid`; empty means all) and n is
/// their count. The AR form splits the clean loss into its mean and centred
/// parts and retargets only the mean. Reference outputs are constants.
InjectionLoss injection_loss(const Matrix& target, const Matrix& reference, bool poisoned,
                             TargetSelector selector, std::span<const double> por,
                             const std::vector<bool>& valid = {});
InjectionLoss injection_loss(const ForwardTrace& target, const ForwardTrace& reference,
                             bool poisoned, TargetSelector selector, std::span<const double> por);

struct InjectResult {
  EncoderParams params;
  std::string clean_hash;
  std::string reference_hash;  // recomputed after training; equals clean_hash
  std::size_t steps = 0;
};

/// Trains a copy of `clean` on the poison set with injection_loss against a
/// frozen copy of `clean`. Throws TrainingError on divergence.
InjectResult inject(const EncoderParams& clean, const BackdoorPlan& plan,
                    std::span<const std::string> corpus, const Vocab& vocab, std::uint64_t seed,
                    const EpochSink& sink = {});

/// Mean MSE between the selected target representation and V over texts
/// carrying the trigger.
double por_distance(const EncoderParams& params, const BackdoorEntry& entry,
                    std::span<const std::string> poisoned_texts, const Vocab& vocab,
                    std::size_t max_len = kDefaultMaxLen);

/// Mean per-position MSE between two encoders' outputs on the same texts.
double representation_drift(const EncoderParams& a, const EncoderParams& b,
                            std::span<const std::string> texts, const Vocab& vocab,
                            std::size_t max_len = kDefaultMaxLen);

}  // namespace porlab
