// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "porlab/tensor.hpp"
#include "porlab/text.hpp"

namespace porlab {

/// tanh approximation of GELU:
///   gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
inline constexpr double kGeluCubic = 0.044715;
inline constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kLayerNormEps = 1e-5;

double gelu(double x);
double gelu_derivative(double x);

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t vocab_size = 0;

  std::size_t head_dim() const { return hidden / heads; }
  /// Throws ConfigError unless every count is >= 1 and hidden % heads == 0.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Matrix ln1_gain, ln1_bias;  // 1 x K
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_gain, ln2_bias;  // 1 x K
  Matrix w1, b1;              // K x F, 1 x F
  Matrix w2, b2;              // F x K, 1 x K

  bool operator==(const LayerParams&) const = default;
};

/// All encoder weights plus the masked-LM head (untied).
///
/// Blocks use pre-layer-norm ordering with no norm on the final output, so
/// the output representations are the raw residual stream:
///   x   = x + Attn(LN1(x))
///   x   = x + W2 gelu(W1 LN2(x) + b1) + b2
/// The MLM head normalizes before projecting to the vocabulary.
struct EncoderParams {
  EncoderConfig config;
  Matrix token_embedding;     // V x K
  Matrix position_embedding;  // max_len x K
  std::vector<LayerParams> layers;
  Matrix mlm_norm_gain, mlm_norm_bias;  // 1 x K
  Matrix mlm_weight;                    // K x V
  Matrix mlm_bias;                      // 1 x V

  /// Correctly shaped, all zeros (layer-norm gains included).
  static EncoderParams zeros(const EncoderConfig& config);
  /// Weights ~ N(0, 0.02^2), layer-norm gains 1, biases 0.
  static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);

  bool operator==(const EncoderParams&) const = default;
};

/// Gradients share the parameter layout.
using ParamGrads = EncoderParams;

/// Calls f(name, tensor) for every tensor in a fixed order. Works for const
/// and non-const params.
template <class Params, class F>
void for_each_tensor(Params& p, F&& f) {
  f(std::string("embeddings.token"), p.token_embedding);
  f(std::string("embeddings.position"), p.position_embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer." + std::to_string(l) + ".";
    f(pre + "ln1.gain", L.ln1_gain);
    f(pre + "ln1.bias", L.ln1_bias);
    f(pre + "attn.wq", L.wq);
    f(pre + "attn.bq", L.bq);
    f(pre + "attn.wk", L.wk);
    f(pre + "attn.bk", L.bk);
    f(pre + "attn.wv", L.wv);
    f(pre + "attn.bv", L.bv);
    f(pre + "attn.wo", L.wo);
    f(pre + "attn.bo", L.bo);
    f(pre + "ln2.gain", L.ln2_gain);
    f(pre + "ln2.bias", L.ln2_bias);
    f(pre + "ffn.w1", L.w1);
    f(pre + "ffn.b1", L.b1);
    f(pre + "ffn.w2", L.w2);
    f(pre + "ffn.b2", L.b2);
  }
  f(std::string("mlm.norm.gain"), p.mlm_norm_gain);
  f(std::string("mlm.norm.bias"), p.mlm_norm_bias);
  f(std::string("mlm.weight"), p.mlm_weight);
  f(std::string("mlm.bias"), p.mlm_bias);
}

/// Throws ConfigError if any tensor shape disagrees with params.config.
void check_shapes(const EncoderParams& params);

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

struct LayerTrace {
  Matrix input;  // N x K residual stream entering the block
  LayerNormCache ln1;
  Matrix ln1_out;
  Matrix q, k, v;                 // N x K
  std::vector<Matrix> attention;  // one N x N map per head
  Matrix context;                 // N x K
  Matrix mid;                     // residual after attention
  LayerNormCache ln2;
  Matrix ln2_out;
  Matrix ffn_pre;  // N x F, the activation site just before GELU
  Matrix ffn_act;  // N x F, after GELU
};

struct ForwardTrace {
  std::vector<TokenId> ids;
  std::vector<bool> key_mask;  // false for PAD positions
  std::vector<LayerTrace> layers;
  Matrix output;  // N x K, one output representation per token

  std::size_t tokens() const { return ids.size(); }
  /// Residual stream after layer `l` (0 = embeddings, layers() = output).
  const Matrix& hidden(std::size_t l) const;
};

/// Runs the encoder. PAD positions are masked as attention keys.
/// Throws InputError for empty or over-long sequences and unknown ids.
ForwardTrace forward(const EncoderParams& params, std::span<const TokenId> ids);
ForwardTrace forward(const EncoderParams& params, const TokenSeq& seq);

/// Accumulates into `grads` the gradient of a scalar loss whose derivative
/// with respect to trace.output is `output_grad`.
void backward(const EncoderParams& params, const ForwardTrace& trace, const Matrix& output_grad,
              ParamGrads& grads);
ParamGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                    const Matrix& output_grad);

struct MlmTarget {
  std::size_t position;
  TokenId id;
};

/// Vocabulary logits at the given positions (one row per target).
Matrix mlm_logits(const EncoderParams& params, const ForwardTrace& trace,
                  std::span<const MlmTarget> targets);

/// Summed cross-entropy over targets. When `grads` is non-null the head
/// gradient is accumulated there and the output-representation gradient is
/// added to `output_grad` (which must be N x K).
double mlm_loss(const EncoderParams& params, const ForwardTrace& trace,
                std::span<const MlmTarget> targets, ParamGrads* grads = nullptr,
                Matrix* output_grad = nullptr);

/// Row softmax cross-entropy helpers shared by the heads.
void softmax_inplace(std::span<double> row);

}  // namespace porlab
