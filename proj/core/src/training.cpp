// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "porlab/checkpoint.hpp"
#include "porlab/error.hpp"

namespace porlab {

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kCls: return "cls";
    case HeadKind::kAr: return "ar";
    case HeadKind::kPerToken: return "per_token";
  }
  return "cls";
}

HeadKind head_kind_from_string(std::string_view name) {
  if (name == "cls") return HeadKind::kCls;
  if (name == "ar") return HeadKind::kAr;
  if (name == "per_token") return HeadKind::kPerToken;
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

ClassifierModel make_classifier(EncoderParams encoder, std::size_t num_labels, HeadKind kind,
                                std::uint64_t seed) {
  if (num_labels < 1) throw ConfigError("classifier needs at least one label");
  ClassifierModel m;
  m.head_weight = Matrix(encoder.config.hidden, num_labels);
  m.head_bias = Matrix(1, num_labels);
  m.encoder = std::move(encoder);
  m.kind = kind;
  Rng rng(seed);
  for (double& v : m.head_weight.values()) v = 0.02 * standard_normal(rng);
  return m;
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

void zero(EncoderParams& g) {
  for_each_tensor(g, [](const std::string&, Matrix& m) { m.fill(0.0); });
}

void scale(EncoderParams& g, double s) {
  for_each_tensor(g, [s](const std::string&, Matrix& m) {
    for (double& v : m.values()) v *= s;
  });
}

double scheduled_lr(double base, bool decay, std::size_t step, std::size_t total) {
  if (!decay || total == 0) return base;
  return base * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

std::vector<std::size_t> non_pad_positions(const ForwardTrace& tr) {
  std::vector<std::size_t> pos;
  const TokenId pad = SpecialIds{}.pad;
  for (std::size_t i = 0; i < tr.ids.size(); ++i)
    if (tr.ids[i] != pad) pos.push_back(i);
  if (pos.empty())
    for (std::size_t i = 0; i < tr.ids.size(); ++i) pos.push_back(i);
  return pos;
}

std::vector<double> head_logits(const ClassifierModel& m, std::span<const double> x) {
  std::vector<double> logits(m.num_labels());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    double s = m.head_bias[c];
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * m.head_weight(k, c);
    logits[c] = s;
  }
  return logits;
}

// Cross-entropy of one head application. Accumulates head gradients (scaled
// by `weight`) and adds dLoss/dx to `dx`.
double head_ce(const ClassifierModel& m, std::span<const double> x, int label, double weight,
               Matrix& dw, Matrix& db, std::span<double> dx) {
  std::vector<double> p = head_logits(m, x);
  softmax_inplace(p);
  const double loss = -std::log(std::max(p[label], 1e-300));
  p[label] -= 1.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double g = p[c] * weight;
    db[c] += g;
    for (std::size_t k = 0; k < x.size(); ++k) {
      dw(k, c) += x[k] * g;
      dx[k] += m.head_weight(k, c) * g;
    }
  }
  return loss * weight;
}

std::vector<int> piece_labels(const TokenSeq& seq, const LabeledExample& ex) {
  std::vector<int> labels(seq.size(), -1);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int w = seq.word_index[i];
    if (w >= 0 && static_cast<std::size_t>(w) < ex.tags.size()) labels[i] = ex.tags[w];
  }
  return labels;
}

}  // namespace

std::vector<double> pooled_representation(HeadKind kind, const ForwardTrace& tr) {
  const std::size_t K = tr.output.cols();
  if (kind == HeadKind::kCls) return {tr.output.row(0).begin(), tr.output.row(0).end()};
  std::vector<double> mean(K, 0.0);
  const auto pos = non_pad_positions(tr);
  for (std::size_t i : pos)
    for (std::size_t k = 0; k < K; ++k) mean[k] += tr.output(i, k);
  for (double& v : mean) v /= static_cast<double>(pos.size());
  return mean;
}

// ---- MLM --------------------------------------------------------------------

MaskedSeq mlm_mask(const TokenSeq& seq, double rate, const Vocab& vocab, Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("mask rate must lie in (0, 1)");
  MaskedSeq out;
  out.ids = seq.ids;
  // Non-special ids for random replacement.
  const std::size_t first_regular = kSpecialCount;
  const std::size_t regular = vocab.size() - first_regular;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (vocab.is_special(seq.ids[i])) continue;
    if (uniform_unit(rng) >= rate) continue;
    out.targets.push_back({i, seq.ids[i]});
    const double r = uniform_unit(rng);
    if (r < 0.8) {
      out.ids[i] = vocab.specials().mask;
    } else if (r < 0.9 && regular > 0) {
      out.ids[i] = static_cast<TokenId>(first_regular + uniform_index(rng, regular));
    }
  }
  return out;
}

EncoderParams pretrain(std::span<const std::string> corpus, const Vocab& vocab,
                       const EncoderConfig& config, const PretrainHyper& hyper, std::uint64_t seed,
                       const EpochSink& sink) {
  if (corpus.empty()) throw ConfigError("pretrain: empty corpus");
  if (config.vocab_size != vocab.size())
    throw ConfigError("pretrain: config vocab_size disagrees with vocabulary");
  const std::size_t max_len = std::min(hyper.max_len, config.max_len);
  EncoderParams params = EncoderParams::init(config, derive_seed(seed, "pretrain.init"));
  Rng rng(derive_seed(seed, "pretrain.order"));

  std::vector<TokenSeq> seqs;
  seqs.reserve(corpus.size());
  for (const auto& doc : corpus) seqs.push_back(encode(doc, vocab, max_len));

  const std::size_t bs = std::max<std::size_t>(1, hyper.batch_size);
  const std::size_t per_epoch = (seqs.size() + bs - 1) / bs;
  const std::size_t total = per_epoch * hyper.epochs;
  ParamGrads grads = EncoderParams::zeros(config);
  AdamState state;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto order = shuffled(seqs.size(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_targets = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      zero(grads);
      double batch_loss = 0.0;
      std::size_t batch_targets = 0;
      for (std::size_t t = b; t < std::min(order.size(), b + bs); ++t) {
        const MaskedSeq ms = mlm_mask(seqs[order[t]], hyper.mask_rate, vocab, rng);
        if (ms.targets.empty()) continue;
        const ForwardTrace tr = forward(params, ms.ids);
        Matrix dout(tr.tokens(), config.hidden);
        batch_loss += mlm_loss(params, tr, ms.targets, &grads, &dout);
        backward(params, tr, dout, grads);
        batch_targets += ms.targets.size();
      }
      if (batch_targets == 0) continue;
      if (!std::isfinite(batch_loss))
        throw TrainingError("pretrain: non-finite loss at step " + std::to_string(step));
      scale(grads, 1.0 / static_cast<double>(batch_targets));
      AdamHyper ah = hyper.adam;
      ah.lr = scheduled_lr(hyper.lr, hyper.linear_decay, step, total);
      adam_step(params, grads, state, ah);
      ++step;
      epoch_loss += batch_loss;
      epoch_targets += batch_targets;
    }
    if (sink)
      sink({"pretrain", epoch + 1, step,
            epoch_targets ? epoch_loss / static_cast<double>(epoch_targets) : 0.0});
  }
  return params;
}

double mlm_eval_loss(const EncoderParams& params, std::span<const std::string> corpus,
                     const Vocab& vocab, double mask_rate, std::size_t max_len,
                     std::uint64_t seed) {
  Rng rng(seed);
  double loss = 0.0;
  std::size_t count = 0;
  for (const auto& doc : corpus) {
    const TokenSeq seq = encode(doc, vocab, std::min(max_len, params.config.max_len));
    const MaskedSeq ms = mlm_mask(seq, mask_rate, vocab, rng);
    if (ms.targets.empty()) continue;
    const ForwardTrace tr = forward(params, ms.ids);
    loss += mlm_loss(params, tr, ms.targets);
    count += ms.targets.size();
  }
  return count ? loss / static_cast<double>(count) : 0.0;
}

// ---- Fine-tuning -------------------------------------------------------------

ClassifierModel finetune(ClassifierModel model, std::span<const LabeledExample> data,
                         const Vocab& vocab, const FinetuneHyper& hyper, std::uint64_t seed,
                         const EpochSink& sink) {
  if (hyper.epochs == 0 || data.empty()) return model;
  validate_labels(data, model.num_labels());
  const auto& config = model.encoder.config;
  const std::size_t max_len = std::min(hyper.max_len, config.max_len);
  Rng rng(derive_seed(seed, "finetune.order"));

  std::vector<TokenSeq> seqs;
  seqs.reserve(data.size());
  for (const auto& ex : data) seqs.push_back(encode(ex.text, vocab, max_len));

  ParamGrads grads = EncoderParams::zeros(config);
  Matrix dw(model.head_weight.rows(), model.head_weight.cols());
  Matrix db(1, model.head_bias.cols());
  AdamState state;
  const std::size_t bs = std::max<std::size_t>(1, hyper.batch_size);
  const std::size_t total = ((seqs.size() + bs - 1) / bs) * hyper.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto order = shuffled(seqs.size(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      zero(grads);
      dw.fill(0.0);
      db.fill(0.0);
      const std::size_t end = std::min(order.size(), b + bs);
      const double w = 1.0 / static_cast<double>(end - b);
      double batch_loss = 0.0;
      for (std::size_t t = b; t < end; ++t) {
        const std::size_t idx = order[t];
        const ForwardTrace tr = forward(model.encoder, seqs[idx]);
        Matrix dout(tr.tokens(), config.hidden);
        if (model.kind == HeadKind::kPerToken) {
          const auto labels = piece_labels(seqs[idx], data[idx]);
          const auto n = static_cast<double>(
              std::count_if(labels.begin(), labels.end(), [](int l) { return l >= 0; }));
          for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0) continue;
            batch_loss += head_ce(model, tr.output.row(i), labels[i], w / n, dw, db, dout.row(i));
          }
        } else {
          const auto x = pooled_representation(model.kind, tr);
          std::vector<double> dx(x.size(), 0.0);
          batch_loss += head_ce(model, x, data[idx].label, w, dw, db, dx);
          if (model.kind == HeadKind::kCls) {
            std::copy(dx.begin(), dx.end(), dout.row(0).begin());
          } else {
            const auto pos = non_pad_positions(tr);
            for (std::size_t i : pos)
              for (std::size_t k = 0; k < dx.size(); ++k)
                dout(i, k) += dx[k] / static_cast<double>(pos.size());
          }
        }
        backward(model.encoder, tr, dout, grads);
      }
      if (!std::isfinite(batch_loss))
        throw TrainingError("finetune: non-finite loss at step " + std::to_string(step));
      auto slots = adam_slots(model.encoder, grads);
      slots.push_back({"head.weight", &model.head_weight, &dw});
      slots.push_back({"head.bias", &model.head_bias, &db});
      AdamHyper ah = hyper.adam;
      ah.lr = scheduled_lr(hyper.lr, hyper.linear_decay, step, total);
      adam_step(slots, state, ah);
      ++step;
      epoch_loss += batch_loss * static_cast<double>(end - b);
    }
    if (sink) sink({"finetune", epoch + 1, step, epoch_loss / static_cast<double>(seqs.size())});
  }
  return model;
}

Prediction predict(const ClassifierModel& model, const TokenSeq& seq) {
  const ForwardTrace tr = forward(model.encoder, seq);
  Prediction p;
  if (model.kind == HeadKind::kPerToken) {
    p.token_labels.reserve(tr.tokens());
    for (std::size_t i = 0; i < tr.tokens(); ++i)
      p.token_labels.push_back(argmax_lowest(head_logits(model, tr.output.row(i))));
    return p;
  }
  p.logits = head_logits(model, pooled_representation(model.kind, tr));
  p.label = argmax_lowest(p.logits);
  return p;
}

Prediction predict(const ClassifierModel& model, std::string_view text, const Vocab& vocab,
                   std::size_t max_len) {
  return predict(model, encode(text, vocab, std::min(max_len, model.encoder.config.max_len)));
}

double accuracy(const ClassifierModel& model, std::span<const LabeledExample> data,
                const Vocab& vocab, std::size_t max_len) {
  std::size_t correct = 0, total = 0;
  for (const auto& ex : data) {
    const TokenSeq seq = encode(ex.text, vocab, std::min(max_len, model.encoder.config.max_len));
    const Prediction p = predict(model, seq);
    if (model.kind == HeadKind::kPerToken) {
      const auto labels = piece_labels(seq, ex);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        ++total;
        correct += p.token_labels[i] == labels[i];
      }
    } else {
      ++total;
      correct += p.label == ex.label;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model) {
  Checkpoint c;
  c.kind = "classifier";
  c.encoder = model.encoder;
  c.extras = {{"head.weight", model.head_weight}, {"head.bias", model.head_bias}};
  c.attributes = {{"head", to_string(model.kind)}, {"labels", std::to_string(model.num_labels())}};
  save_checkpoint(path, c);
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "classifier") throw IoError(path.string() + ": not a classifier checkpoint");
  ClassifierModel m;
  m.encoder = std::move(c.encoder);
  m.kind = head_kind_from_string(c.attributes.at("head"));
  for (auto& [name, t] : c.extras) {
    if (name == "head.weight")
      m.head_weight = std::move(t);
    else if (name == "head.bias")
      m.head_bias = std::move(t);
  }
  if (m.head_weight.rows() != m.encoder.config.hidden || m.head_bias.cols() != m.head_weight.cols())
    throw IoError(path.string() + ": classifier head is missing or malformed");
  return m;
}

}  // namespace porlab
