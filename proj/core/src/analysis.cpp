// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "porlab/error.hpp"
#include "porlab/log.hpp"

namespace porlab {

AttentionSummary aggregate_attention(const ForwardTrace& trace, const Vocab* vocab) {
  AttentionSummary s;
  const std::size_t n = trace.tokens();
  for (const auto& layer : trace.layers) {
    Matrix agg(n, n);
    for (const auto& head : layer.attention) axpy(1.0, head, agg);
    const double inv = 1.0 / static_cast<double>(layer.attention.size());
    for (double& v : agg.values()) v *= inv;
    s.layers.push_back(std::move(agg));
  }
  if (vocab)
    for (TokenId id : trace.ids) s.tokens.push_back(vocab->token(id));
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

Matrix token_cosine(const ForwardTrace& trace, std::size_t layer) {
  if (layer > trace.layers.size())
    throw InputError("token_cosine: layer " + std::to_string(layer) + " out of range");
  const Matrix& h = trace.hidden(layer);
  const std::size_t n = h.rows();
  Matrix out(n, n);
  bool zero = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = h.row(i);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) zero = true;
    for (std::size_t j = 0; j < n; ++j) out(i, j) = cosine(h.row(i), h.row(j));
  }
  if (zero)
    warn("token_cosine: zero vector in layer " + std::to_string(layer) + "; similarity set to 0");
  return out;
}

std::vector<std::size_t> trigger_positions(const TokenSeq& seq, const TriggerSpec& trigger) {
  std::vector<std::size_t> out;
  const std::size_t m = trigger.pieces.size();
  if (m == 0) return out;
  for (std::size_t i = 0; i + m <= seq.size(); ++i) {
    if (seq.word_index[i] < 0) continue;
    if (i > 0 && seq.word_index[i - 1] == seq.word_index[i]) continue;
    if (!std::equal(trigger.pieces.begin(), trigger.pieces.end(),
                    seq.ids.begin() + static_cast<std::ptrdiff_t>(i)))
      continue;
    const std::size_t end = i + m;
    if (end < seq.size() && seq.word_index[end] >= 0 &&
        seq.word_index[end] == seq.word_index[end - 1])
      continue;
    for (std::size_t k = i; k < end; ++k) out.push_back(k);
    i = end - 1;
  }
  return out;
}

std::vector<double> cls_attention_to(const AttentionSummary& summary,
                                     std::span<const std::size_t> positions) {
  std::vector<double> out;
  for (const auto& a : summary.layers) {
    double s = 0.0;
    for (std::size_t p : positions) s += a(0, p);
    out.push_back(s);
  }
  return out;
}

std::vector<double> mean_cls_trigger_attention(const EncoderParams& params,
                                               std::span<const std::string> texts,
                                               const TriggerSpec& trigger, const Vocab& vocab,
                                               std::size_t max_len) {
  std::vector<double> total(params.config.layers, 0.0);
  std::size_t used = 0;
  for (const auto& text : texts) {
    const TokenSeq seq = encode(text, vocab, std::min(max_len, params.config.max_len));
    const auto pos = trigger_positions(seq, trigger);
    if (pos.empty()) continue;
    const auto per_layer = cls_attention_to(aggregate_attention(forward(params, seq)), pos);
    for (std::size_t l = 0; l < total.size(); ++l) total[l] += per_layer[l];
    ++used;
  }
  if (used)
    for (double& v : total) v /= static_cast<double>(used);
  return total;
}

std::size_t star_piece(const EncoderParams& params, std::span<const std::string> texts,
                       const TriggerSpec& trigger, const Vocab& vocab, std::size_t max_len) {
  const std::size_t m = trigger.pieces.size();
  std::vector<double> score(m, 0.0);
  const std::size_t layers = params.config.layers;
  const std::size_t first = layers > 6 ? layers - 6 : 0;
  for (const auto& text : texts) {
    const TokenSeq seq = encode(text, vocab, std::min(max_len, params.config.max_len));
    const auto pos = trigger_positions(seq, trigger);
    if (pos.empty()) continue;
    const auto summary = aggregate_attention(forward(params, seq));
    for (std::size_t l = first; l < layers; ++l)
      for (std::size_t k = 0; k < pos.size(); ++k) score[k % m] += summary.layers[l](0, pos[k]);
  }
  return static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
}

std::string to_string(SourceTag tag) { return tag == SourceTag::kClean ? "CL" : "BD"; }

EncoderParams embedding_swap(const EncoderParams& a, const EncoderParams& b) {
  if (!(a.config == b.config)) throw ConfigError("embedding_swap: encoder configs differ");
  EncoderParams out = b;
  out.token_embedding = a.token_embedding;
  out.position_embedding = a.position_embedding;
  return out;
}

HybridModel make_hybrid(const EncoderParams& clean, const EncoderParams& backdoor,
                        SourceTag embeddings, SourceTag encoder) {
  const auto& pick = [&](SourceTag t) -> const EncoderParams& {
    return t == SourceTag::kClean ? clean : backdoor;
  };
  return {embeddings, encoder, embedding_swap(pick(embeddings), pick(encoder))};
}

namespace {

std::vector<std::vector<double>> first_token_outputs(const EncoderParams& p,
                                                     std::span<const TokenSeq> seqs) {
  std::vector<std::vector<double>> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    const auto tr = forward(p, s);
    const auto r = tr.output.row(0);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

double mean_cosine(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += cosine(a[i], b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

std::vector<SwapRow> swap_report(const EncoderParams& clean, const EncoderParams& backdoor,
                                 std::span<const std::string> clean_texts,
                                 std::span<const std::string> poisoned_texts, const Vocab& vocab,
                                 std::size_t max_len) {
  const std::size_t len = std::min(max_len, clean.config.max_len);
  std::vector<TokenSeq> cs, ps;
  for (const auto& t : clean_texts) cs.push_back(encode(t, vocab, len));
  for (const auto& t : poisoned_texts) ps.push_back(encode(t, vocab, len));
  const auto bd_c = first_token_outputs(backdoor, cs), bd_p = first_token_outputs(backdoor, ps);
  const auto cl_c = first_token_outputs(clean, cs), cl_p = first_token_outputs(clean, ps);

  std::vector<SwapRow> rows;
  for (auto [emb, enc] : {std::pair{SourceTag::kClean, SourceTag::kBackdoor},
                          std::pair{SourceTag::kBackdoor, SourceTag::kClean}}) {
    const HybridModel h = make_hybrid(clean, backdoor, emb, enc);
    const auto hc = first_token_outputs(h.params, cs), hp = first_token_outputs(h.params, ps);
    rows.push_back({to_string(emb) + "_emb+" + to_string(enc) + "_enc", mean_cosine(hc, bd_c),
                    mean_cosine(hc, cl_c), mean_cosine(hp, bd_p), mean_cosine(hp, cl_p)});
  }
  return rows;
}

std::vector<std::vector<double>> ffn_activation_means(const EncoderParams& params,
                                                      std::span<const std::string> texts,
                                                      const Vocab& vocab, std::size_t max_len) {
  const auto& c = params.config;
  std::vector<std::vector<double>> sums(c.layers, std::vector<double>(c.ffn, 0.0));
  std::size_t count = 0;
  for (const auto& text : texts) {
    const auto tr = forward(params, encode(text, vocab, std::min(max_len, c.max_len)));
    for (std::size_t i = 0; i < tr.tokens(); ++i) {
      if (!tr.key_mask[i]) continue;
      ++count;
      for (std::size_t l = 0; l < c.layers; ++l) {
        const auto row = tr.layers[l].ffn_act.row(i);
        for (std::size_t u = 0; u < c.ffn; ++u) sums[l][u] += std::abs(row[u]);
      }
    }
  }
  if (count)
    for (auto& layer : sums)
      for (double& v : layer) v /= static_cast<double>(count);
  return sums;
}

PruneResult fine_prune(const ClassifierModel& model, std::span<const std::string> clean_texts,
                       double fraction, std::size_t calibration_size, const Vocab& vocab,
                       std::size_t max_len) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("fine_prune: fraction must lie in [0, 1]");
  PruneResult res{model, {}};
  const auto& c = model.encoder.config;
  const std::size_t k =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(c.ffn) + 1e-9));
  const auto calib = clean_texts.first(std::min(calibration_size, clean_texts.size()));
  const auto means =
      k ? ffn_activation_means(model.encoder, calib, vocab, max_len)
        : std::vector<std::vector<double>>(c.layers, std::vector<double>(c.ffn, 0.0));
  for (std::size_t l = 0; l < c.layers; ++l) {
    std::vector<std::size_t> order(c.ffn);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return means[l][a] < means[l][b]; });
    std::vector<std::size_t> units(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(units.begin(), units.end());
    auto& L = res.model.encoder.layers[l];
    for (std::size_t u : units) {
      for (std::size_t r = 0; r < c.hidden; ++r) L.w1(r, u) = 0.0;
      L.b1(0, u) = 0.0;
    }
    res.pruned.push_back(std::move(units));
  }
  return res;
}

}  // namespace porlab
