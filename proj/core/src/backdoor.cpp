// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/backdoor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "porlab/checkpoint.hpp"
#include "porlab/error.hpp"
#include "porlab/log.hpp"

namespace porlab {

std::string to_string(TargetSelector s) {
  switch (s) {
    case TargetSelector::kCls: return "cls";
    case TargetSelector::kAr: return "ar";
    case TargetSelector::kAllTokens: return "all_tokens";
  }
  return "cls";
}

TargetSelector target_selector_from_string(std::string_view name) {
  if (name == "cls") return TargetSelector::kCls;
  if (name == "ar") return TargetSelector::kAr;
  if (name == "all_tokens") return TargetSelector::kAllTokens;
  throw ConfigError("unknown target selector '" + std::string(name) + "'");
}

TriggerSpec make_trigger(std::string_view text, const Vocab& vocab) {
  const auto words = split_words(text);
  if (words.empty()) throw ConfigError("trigger text must be non-empty");
  TriggerSpec t;
  t.text = join_words(words);
  t.char_length = codepoint_length(t.text);
  for (const auto& w : words)
    for (TokenId id : wordpiece(normalize_word(w), vocab)) t.pieces.push_back(id);
  return t;
}

std::string to_string(BlockSplit s) { return s == BlockSplit::kStrict ? "strict" : "balanced"; }

BlockSplit block_split_from_string(std::string_view name) {
  if (name == "strict") return BlockSplit::kStrict;
  if (name == "balanced") return BlockSplit::kBalanced;
  throw ConfigError("unknown block split '" + std::string(name) + "'");
}

std::vector<std::size_t> block_bounds(std::size_t blocks, std::size_t hidden, BlockSplit split) {
  if (blocks == 0 || blocks > hidden)
    throw ConfigError("POR: block count " + std::to_string(blocks) + " must be in [1, " +
                      std::to_string(hidden) + "]");
  if (split == BlockSplit::kStrict && hidden % blocks != 0)
    throw ConfigError("POR: hidden width " + std::to_string(hidden) +
                      " is not divisible by block count " + std::to_string(blocks));
  std::vector<std::size_t> bounds{0};
  const std::size_t w = hidden / blocks, extra = hidden % blocks;
  for (std::size_t b = 0; b < blocks; ++b)
    bounds.push_back(bounds.back() + w + (b < extra ? 1 : 0));
  return bounds;
}

namespace {

void fill_block(PorSpec& p, const std::vector<std::size_t>& bounds, std::size_t b, double v) {
  std::fill(p.values.begin() + static_cast<std::ptrdiff_t>(bounds[b]),
            p.values.begin() + static_cast<std::ptrdiff_t>(bounds[b + 1]), v);
}

}  // namespace

std::vector<PorSpec> gen_por1(std::size_t blocks, std::size_t hidden, BlockSplit split) {
  const auto bounds = block_bounds(blocks, hidden, split);
  std::vector<PorSpec> out;
  for (std::size_t j = 1; j <= blocks + 1; ++j) {
    PorSpec p;
    p.values.resize(hidden);
    for (std::size_t i = 1; i <= blocks; ++i) fill_block(p, bounds, i - 1, i >= j ? -1.0 : 1.0);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PorSpec> gen_por2(std::size_t blocks, std::size_t hidden, BlockSplit split) {
  const auto bounds = block_bounds(blocks, hidden, split);
  if (blocks >= 31) throw ConfigError("POR-2: too many blocks");
  std::vector<PorSpec> out;
  for (std::size_t code = 0; code < (std::size_t{1} << blocks); ++code) {
    PorSpec p;
    p.values.resize(hidden);
    for (std::size_t b = 0; b < blocks; ++b)
      fill_block(p, bounds, b, (code >> (blocks - 1 - b)) & 1U ? 1.0 : -1.0);
    out.push_back(std::move(p));
  }
  return out;
}

PorSpec constant_por(std::size_t hidden, double value) {
  if (!std::isfinite(value)) throw ConfigError("POR values must be finite");
  return PorSpec{std::vector<double>(hidden, value)};
}

void BackdoorPlan::validate(std::size_t hidden) const {
  if (insertions < 1) throw ConfigError("plan: insertions must be >= 1");
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.trigger.text.empty()) throw ConfigError("plan: empty trigger");
    if (!seen.insert(e.trigger.text).second)
      throw ConfigError("plan: duplicate trigger '" + e.trigger.text + "'");
    if (e.por.values.size() != hidden)
      throw ConfigError("plan: POR for '" + e.trigger.text + "' has width " +
                        std::to_string(e.por.values.size()) + ", encoder width is " +
                        std::to_string(hidden));
    for (double v : e.por.values)
      if (!std::isfinite(v)) throw ConfigError("plan: non-finite POR value");
  }
}

BackdoorPlan make_plan(std::span<const std::string> triggers, std::span<const PorSpec> pors,
                       const Vocab& vocab, TargetSelector selector, std::size_t clean_count,
                       std::size_t poison_per_trigger, std::size_t insertions) {
  if (triggers.size() != pors.size())
    throw ConfigError("plan: " + std::to_string(triggers.size()) + " triggers but " +
                      std::to_string(pors.size()) + " PORs");
  BackdoorPlan plan;
  for (std::size_t i = 0; i < triggers.size(); ++i)
    plan.entries.push_back({make_trigger(triggers[i], vocab), pors[i], selector});
  plan.clean_count = clean_count;
  plan.poison_per_trigger = poison_per_trigger;
  plan.insertions = insertions;
  return plan;
}

// ---- Poisoning ----------------------------------------------------------------

std::string insert_trigger_at(std::string_view text, std::string_view trigger,
                              std::span<const std::size_t> gaps) {
  const auto words = split_words(text);
  const auto trig = split_words(trigger);
  std::vector<std::size_t> per_gap(words.size() + 1, 0);
  for (std::size_t g : gaps) {
    if (g > words.size()) throw InputError("insert_trigger_at: gap out of range");
    ++per_gap[g];
  }
  std::vector<std::string> out;
  out.reserve(words.size() + gaps.size() * trig.size());
  for (std::size_t g = 0; g <= words.size(); ++g) {
    for (std::size_t c = 0; c < per_gap[g]; ++c) out.insert(out.end(), trig.begin(), trig.end());
    if (g < words.size()) out.push_back(words[g]);
  }
  return join_words(out);
}

std::string insert_trigger(std::string_view text, std::string_view trigger, std::size_t t,
                           Rng& rng) {
  if (t == 0) return std::string(text);
  const std::size_t gaps_available = split_words(text).size() + 1;
  std::vector<std::size_t> gaps(t);
  for (auto& g : gaps) g = uniform_index(rng, gaps_available);
  return insert_trigger_at(text, trigger, gaps);
}

std::vector<PoisonRecord> build_poison_set(std::span<const std::string> corpus,
                                           const BackdoorPlan& plan, Rng& rng) {
  const std::size_t need = plan.clean_count + plan.poison_per_trigger * plan.entries.size();
  if (need == 0) return {};
  if (corpus.empty()) throw ConfigError("build_poison_set: empty corpus");
  std::vector<std::size_t> source(need);
  if (corpus.size() >= need) {
    std::vector<std::size_t> perm(corpus.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 0; i < need; ++i)
      std::swap(perm[i], perm[i + uniform_index(rng, perm.size() - i)]);
    std::copy_n(perm.begin(), need, source.begin());
  } else {
    warn("build_poison_set: corpus has " + std::to_string(corpus.size()) + " lines but " +
         std::to_string(need) + " samples were requested; sampling with replacement");
    for (auto& s : source) s = uniform_index(rng, corpus.size());
  }

  std::vector<PoisonRecord> records;
  records.reserve(need);
  std::size_t k = 0;
  for (std::size_t i = 0; i < plan.clean_count; ++i)
    records.push_back({corpus[source[k++]], kCleanAssignment});
  for (std::size_t e = 0; e < plan.entries.size(); ++e) {
    for (std::size_t i = 0; i < plan.poison_per_trigger; ++i) {
      records.push_back(
          {insert_trigger(corpus[source[k++]], plan.entries[e].trigger.text, plan.insertions, rng),
           static_cast<int>(e)});
    }
  }
  for (std::size_t i = records.size(); i > 1; --i)
    std::swap(records[i - 1], records[uniform_index(rng, i)]);
  return records;
}

std::vector<LabeledExample> poison_set_as_examples(std::span<const PoisonRecord> records) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.text, r.assignment, {}});
  return out;
}

// ---- Injection loss -------------------------------------------------------------

InjectionLoss injection_loss(const Matrix& target, const Matrix& reference, bool poisoned,
                             TargetSelector selector, std::span<const double> por,
                             const std::vector<bool>& valid) {
  if (!target.same_shape(reference))
    throw InputError("injection_loss: target and reference outputs differ in shape");
  const std::size_t n = target.rows(), K = target.cols();
  if (poisoned && por.size() != K)
    throw InputError("injection_loss: POR width " + std::to_string(por.size()) +
                     " does not match hidden width " + std::to_string(K));
  if (!valid.empty() && valid.size() != n) throw InputError("injection_loss: mask length");
  auto ok = [&](std::size_t i) { return valid.empty() || valid[i]; };
  const double inv_k = 1.0 / static_cast<double>(K);

  InjectionLoss out;
  out.output_grad = Matrix(n, K);
  auto mse_to = [&](std::size_t i, auto&& goal) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double d = target(i, k) - goal(k);
      s += d * d;
      out.output_grad(i, k) += 2.0 * inv_k * d;
    }
    return s * inv_k;
  };
  auto ref_row = [&](std::size_t i) { return [&, i](std::size_t k) { return reference(i, k); }; };
  auto por_at = [&](std::size_t k) { return por[k]; };

  if (!poisoned) {
    for (std::size_t i = 0; i < n; ++i)
      if (ok(i)) out.loss += mse_to(i, ref_row(i));
    return out;
  }
  switch (selector) {
    case TargetSelector::kCls:
      out.loss += mse_to(0, por_at);
      for (std::size_t i = 1; i < n; ++i)
        if (ok(i)) out.loss += mse_to(i, ref_row(i));
      break;
    case TargetSelector::kAllTokens:
      for (std::size_t i = 0; i < n; ++i)
        if (ok(i)) out.loss += mse_to(i, por_at);
      break;
    case TargetSelector::kAr: {
      std::vector<double> m(K, 0.0), mr(K, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!ok(i)) continue;
        ++count;
        for (std::size_t k = 0; k < K; ++k) {
          m[k] += target(i, k);
          mr[k] += reference(i, k);
        }
      }
      if (count == 0) break;
      const double cn = static_cast<double>(count);
      for (std::size_t k = 0; k < K; ++k) {
        m[k] /= cn;
        mr[k] /= cn;
      }
      double mean_term = 0.0;
      for (std::size_t k = 0; k < K; ++k) mean_term += (m[k] - por[k]) * (m[k] - por[k]);
      out.loss += cn * mean_term * inv_k;
      for (std::size_t i = 0; i < n; ++i) {
        if (!ok(i)) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double d = (target(i, k) - m[k]) - (reference(i, k) - mr[k]);
          s += d * d;
          // Centred parts sum to zero, so the mean's Jacobian drops out here.
          out.output_grad(i, k) = 2.0 * inv_k * ((m[k] - por[k]) + d);
        }
        out.loss += s * inv_k;
      }
      break;
    }
  }
  return out;
}

InjectionLoss injection_loss(const ForwardTrace& target, const ForwardTrace& reference,
                             bool poisoned, TargetSelector selector, std::span<const double> por) {
  if (target.ids != reference.ids)
    throw InputError("injection_loss: traces cover different token sequences");
  return injection_loss(target.output, reference.output, poisoned, selector, por, target.key_mask);
}

// ---- Injection training -----------------------------------------------------

InjectResult inject(const EncoderParams& clean, const BackdoorPlan& plan,
                    std::span<const std::string> corpus, const Vocab& vocab, std::uint64_t seed,
                    const EpochSink& sink) {
  check_shapes(clean);
  const auto& config = clean.config;
  plan.validate(config.hidden);
  const std::size_t max_len = std::min(plan.hyper.max_len, config.max_len);

  InjectResult result;
  result.clean_hash = params_hash(clean);
  const EncoderParams reference = clean;
  EncoderParams target = clean;

  Rng data_rng(derive_seed(seed, "inject.poison"));
  const auto records = build_poison_set(corpus, plan, data_rng);
  std::vector<TokenSeq> seqs;
  std::vector<Matrix> ref_out;
  seqs.reserve(records.size());
  ref_out.reserve(records.size());
  for (const auto& r : records) {
    seqs.push_back(encode(r.text, vocab, max_len));
    ref_out.push_back(forward(reference, seqs.back()).output);
  }

  Rng order_rng(derive_seed(seed, "inject.order"));
  ParamGrads grads = EncoderParams::zeros(config);
  AdamState state;
  const std::size_t bs = std::max<std::size_t>(1, plan.hyper.batch_size);
  const std::size_t total = ((records.size() + bs - 1) / bs) * plan.hyper.epochs;
  std::size_t step = 0;
  std::vector<std::size_t> order(records.size());
  for (std::size_t epoch = 0; epoch < plan.hyper.epochs && !records.empty(); ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_index(order_rng, i)]);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      for_each_tensor(grads, [](const std::string&, Matrix& m) { m.fill(0.0); });
      const std::size_t end = std::min(order.size(), b + bs);
      double batch_loss = 0.0;
      for (std::size_t t = b; t < end; ++t) {
        const std::size_t idx = order[t];
        const ForwardTrace tr = forward(target, seqs[idx]);
        const int a = records[idx].assignment;
        const bool poisoned = a != kCleanAssignment;
        const auto& entry = plan.entries[poisoned ? static_cast<std::size_t>(a) : 0];
        InjectionLoss l = injection_loss(
            tr.output, ref_out[idx], poisoned, poisoned ? entry.selector : TargetSelector::kCls,
            poisoned ? std::span<const double>(entry.por.values) : std::span<const double>(),
            tr.key_mask);
        batch_loss += l.loss;
        backward(target, tr, l.output_grad, grads);
      }
      if (!std::isfinite(batch_loss))
        throw TrainingError("inject: non-finite loss at step " + std::to_string(step));
      const double inv = 1.0 / static_cast<double>(end - b);
      for_each_tensor(grads, [inv](const std::string&, Matrix& m) {
        for (double& v : m.values()) v *= inv;
      });
      AdamHyper ah = plan.hyper.adam;
      ah.lr = plan.hyper.linear_decay && total
                  ? plan.hyper.lr * (1.0 - static_cast<double>(step) / static_cast<double>(total))
                  : plan.hyper.lr;
      adam_step(target, grads, state, ah);
      ++step;
      epoch_loss += batch_loss;
    }
    if (sink) sink({"inject", epoch + 1, step, epoch_loss / static_cast<double>(records.size())});
  }

  if (!(reference == clean)) throw TrainingError("inject: reference model was modified");
  result.reference_hash = params_hash(reference);
  result.params = std::move(target);
  result.steps = step;
  return result;
}

double por_distance(const EncoderParams& params, const BackdoorEntry& entry,
                    std::span<const std::string> poisoned_texts, const Vocab& vocab,
                    std::size_t max_len) {
  if (poisoned_texts.empty()) return 0.0;
  double total = 0.0;
  const double K = static_cast<double>(params.config.hidden);
  for (const auto& text : poisoned_texts) {
    const ForwardTrace tr =
        forward(params, encode(text, vocab, std::min(max_len, params.config.max_len)));
    auto mse_row = [&](std::span<const double> row) {
      double s = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k)
        s += (row[k] - entry.por.values[k]) * (row[k] - entry.por.values[k]);
      return s / K;
    };
    switch (entry.selector) {
      case TargetSelector::kCls: total += mse_row(tr.output.row(0)); break;
      case TargetSelector::kAr: total += mse_row(pooled_representation(HeadKind::kAr, tr)); break;
      case TargetSelector::kAllTokens: {
        double s = 0.0;
        for (std::size_t i = 0; i < tr.tokens(); ++i) s += mse_row(tr.output.row(i));
        total += s / static_cast<double>(tr.tokens());
        break;
      }
    }
  }
  return total / static_cast<double>(poisoned_texts.size());
}

double representation_drift(const EncoderParams& a, const EncoderParams& b,
                            std::span<const std::string> texts, const Vocab& vocab,
                            std::size_t max_len) {
  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& text : texts) {
    const TokenSeq seq = encode(text, vocab, std::min(max_len, a.config.max_len));
    const Matrix ta = forward(a, seq).output;
    const Matrix tb = forward(b, seq).output;
    for (std::size_t i = 0; i < ta.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < ta.cols(); ++k)
        s += (ta(i, k) - tb(i, k)) * (ta(i, k) - tb(i, k));
      total += s / static_cast<double>(ta.cols());
      ++positions;
    }
  }
  return positions ? total / static_cast<double>(positions) : 0.0;
}

}  // namespace porlab
