// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "porlab/backdoor.hpp"
#include "porlab/encoder.hpp"
#include "porlab/tensor.hpp"
#include "porlab/text.hpp"
#include "porlab/training.hpp"

namespace porlab {

// ---- Attention and token similarity ---------------------------------------

struct AttentionSummary {
  std::vector<Matrix> layers;       // N x N, mean over heads
  std::vector<std::string> tokens;  // empty without a vocabulary
};

AttentionSummary aggregate_attention(const ForwardTrace& trace, const Vocab* vocab = nullptr);

/// Cosine similarity between the per-token vectors of trace.hidden(layer).
/// Pairs involving a zero vector are 0 (a warning is emitted).
Matrix token_cosine(const ForwardTrace& trace, std::size_t layer);

/// Positions of every whole-word occurrence of the trigger's pieces.
std::vector<std::size_t> trigger_positions(const TokenSeq& seq, const TriggerSpec& trigger);

/// Per layer: attention mass the first token sends to `positions`.
std::vector<double> cls_attention_to(const AttentionSummary& summary,
                                     std::span<const std::size_t> positions);

/// Mean of cls_attention_to over sentences, each scored at its own trigger
/// positions. Sentences without a trigger occurrence are ignored.
std::vector<double> mean_cls_trigger_attention(const EncoderParams& params,
                                               std::span<const std::string> texts,
                                               const TriggerSpec& trigger, const Vocab& vocab,
                                               std::size_t max_len = kDefaultMaxLen);

/// The trigger piece (offset into trigger.pieces) receiving the most first-
/// token attention summed over the last min(6, layers) layers.
std::size_t star_piece(const EncoderParams& params, std::span<const std::string> texts,
                       const TriggerSpec& trigger, const Vocab& vocab,
                       std::size_t max_len = kDefaultMaxLen);

// ---- Embedding swap -------------------------------------------------------

enum class SourceTag { kClean, kBackdoor };
std::string to_string(SourceTag tag);

struct HybridModel {
  SourceTag embedding_source = SourceTag::kClean;
  SourceTag encoder_source = SourceTag::kClean;
  EncoderParams params;
};

/// Token and position embeddings from `a`; every layer and the MLM head
/// from `b`. Throws ConfigError when the configs differ.
EncoderParams embedding_swap(const EncoderParams& a, const EncoderParams& b);
HybridModel make_hybrid(const EncoderParams& clean, const EncoderParams& backdoor,
                        SourceTag embeddings, SourceTag encoder);

struct SwapRow {
  std::string name;  // e.g. "CL_emb+BD_enc"
  double clean_vs_bd = 0.0, clean_vs_cl = 0.0;
  double poisoned_vs_bd = 0.0, poisoned_vs_cl = 0.0;
};

/// Mean cosine between first-token outputs of each hybrid and of the
/// backdoored (BD) and clean (CL) encoders, on clean and poisoned texts.
std::vector<SwapRow> swap_report(const EncoderParams& clean, const EncoderParams& backdoor,
                                 std::span<const std::string> clean_texts,
                                 std::span<const std::string> poisoned_texts, const Vocab& vocab,
                                 std::size_t max_len = kDefaultMaxLen);

double cosine(std::span<const double> a, std::span<const double> b);

// ---- Fine-pruning ----------------------------------------------------------

/// Mean |GELU output| per FFN unit and layer over all non-PAD tokens.
std::vector<std::vector<double>> ffn_activation_means(const EncoderParams& params,
                                                      std::span<const std::string> texts,
                                                      const Vocab& vocab,
                                                      std::size_t max_len = kDefaultMaxLen);

struct PruneResult {
  ClassifierModel model;
  std::vector<std::vector<std::size_t>> pruned;  // per layer, ascending
};

/// In every layer, zeroes the incoming weights and bias of the
/// floor(fraction * ffn) units with the lowest mean activation on the first
/// `calibration_size` texts (ties: lower unit index first).
/// Throws ConfigError for a fraction outside [0, 1].
PruneResult fine_prune(const ClassifierModel& model, std::span<const std::string> clean_texts,
                       double fraction, std::size_t calibration_size, const Vocab& vocab,
                       std::size_t max_len = kDefaultMaxLen);

}  // namespace porlab
