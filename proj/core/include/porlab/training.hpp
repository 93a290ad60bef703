// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "porlab/adam.hpp"
#include "porlab/encoder.hpp"
#include "porlab/rng.hpp"
#include "porlab/text.hpp"

namespace porlab {

/// Which output representation the classification head reads.
enum class HeadKind {
  kCls,       // T_0
  kAr,        // mean of the non-PAD output representations
  kPerToken,  // every token is classified on its own
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(std::string_view name);

struct ClassifierModel {
  EncoderParams encoder;
  Matrix head_weight;  // K x C
  Matrix head_bias;    // 1 x C
  HeadKind kind = HeadKind::kCls;

  std::size_t num_labels() const { return head_weight.cols(); }
  bool operator==(const ClassifierModel&) const = default;
};

/// Attaches a fresh N(0, 0.02^2) head to `encoder`.
ClassifierModel make_classifier(EncoderParams encoder, std::size_t num_labels, HeadKind kind,
                                std::uint64_t seed);

/// Per-epoch training metrics, forwarded to an optional sink (JSON-lines log).
struct EpochMetrics {
  std::string stage;
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double loss = 0.0;
};
using EpochSink = std::function<void(const EpochMetrics&)>;

// ---- Masked-LM pretraining ------------------------------------------------

struct MaskedSeq {
  std::vector<TokenId> ids;
  std::vector<MlmTarget> targets;
};

/// Selects each non-special position with probability `rate`; selected
/// positions become [MASK] 80% of the time, a random non-special id 10%, and
/// stay unchanged 10%. Targets hold the original ids.
MaskedSeq mlm_mask(const TokenSeq& seq, double rate, const Vocab& vocab, Rng& rng);

struct PretrainHyper {
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double mask_rate = 0.15;
  std::size_t max_len = kDefaultMaxLen;
  bool linear_decay = true;
  AdamHyper adam;
};

/// Trains a fresh encoder on the masked-LM objective. Throws TrainingError on
/// a non-finite loss.
EncoderParams pretrain(std::span<const std::string> corpus, const Vocab& vocab,
                       const EncoderConfig& config, const PretrainHyper& hyper, std::uint64_t seed,
                       const EpochSink& sink = {});

/// Mean cross-entropy per masked target, with masks drawn from `seed`.
double mlm_eval_loss(const EncoderParams& params, std::span<const std::string> corpus,
                     const Vocab& vocab, double mask_rate, std::size_t max_len, std::uint64_t seed);

// ---- Fine-tuning ----------------------------------------------------------

struct FinetuneHyper {
  std::size_t epochs = 3;
  std::size_t batch_size = 8;
  double lr = 1.5e-4;
  std::size_t max_len = kDefaultMaxLen;
  bool linear_decay = true;
  AdamHyper adam;
};

/// Retrains every encoder and head parameter on labeled data (cross-entropy).
/// Zero epochs returns the model unchanged. Throws InputError for labels the
/// head cannot represent.
ClassifierModel finetune(ClassifierModel model, std::span<const LabeledExample> data,
                         const Vocab& vocab, const FinetuneHyper& hyper, std::uint64_t seed,
                         const EpochSink& sink = {});

struct Prediction {
  int label = 0;                  // sequence label (CLS/AR heads)
  std::vector<double> logits;     // sequence logits (CLS/AR heads)
  std::vector<int> token_labels;  // PER_TOKEN head, one per piece
};

/// Argmax of the head; ties resolve to the lowest label id.
Prediction predict(const ClassifierModel& model, const TokenSeq& seq);
Prediction predict(const ClassifierModel& model, std::string_view text, const Vocab& vocab,
                   std::size_t max_len = kDefaultMaxLen);

/// Classification accuracy, or per-word-piece accuracy for PER_TOKEN heads.
double accuracy(const ClassifierModel& model, std::span<const LabeledExample> data,
                const Vocab& vocab, std::size_t max_len = kDefaultMaxLen);

/// The head's input row for a trace: T_0, or the mean over non-PAD positions.
std::vector<double> pooled_representation(HeadKind kind, const ForwardTrace& trace);

int argmax_lowest(std::span<const double> values);

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace porlab
