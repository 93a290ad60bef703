// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "porlab/rng.hpp"

namespace porlab {
namespace {

// Ridders' extrapolation of central differences: shrinks the step by 1.4 per
// round, extrapolates in a Neville tableau and keeps the estimate with the
// smallest error bound.
template <class F>
double ridders_derivative(F&& f, double h) {
  constexpr int kMaxRounds = 10;
  constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink;
  double table[kMaxRounds][kMaxRounds];
  table[0][0] = (f(h) - f(-h)) / (2.0 * h);
  double best = table[0][0];
  double best_err = std::numeric_limits<double>::max();
  for (int i = 1; i < kMaxRounds; ++i) {
    h /= kShrink;
    table[0][i] = (f(h) - f(-h)) / (2.0 * h);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
      fac *= kShrink2;
      const double err = std::max(std::abs(table[j][i] - table[j - 1][i]),
                                  std::abs(table[j][i] - table[j - 1][i - 1]));
      if (err <= best_err) {
        best_err = err;
        best = table[j][i];
      }
    }
    if (std::abs(table[i][i] - table[i - 1][i - 1]) >= 2.0 * best_err) break;
  }
  return best;
}

}  // namespace

GradCheckResult check_gradients(const EncoderParams& params, std::span<const TokenId> ids,
                                const OutputLoss& loss, const GradCheckOptions& options) {
  ParamGrads analytic = EncoderParams::zeros(params.config);
  {
    const ForwardTrace tr = forward(params, ids);
    Matrix dout(tr.tokens(), params.config.hidden);
    loss(params, tr, &analytic, &dout);
    backward(params, tr, dout, analytic);
  }
  if (options.tamper) options.tamper(analytic);

  std::vector<const Matrix*> grads;
  for_each_tensor(analytic, [&](const std::string&, const Matrix& g) { grads.push_back(&g); });

  GradCheckResult res;
  EncoderParams probe = params;
  std::size_t k = 0;
  auto eval = [&]() {
    const ForwardTrace tr = forward(probe, ids);
    return loss(probe, tr, nullptr, nullptr);
  };
  for_each_tensor(probe, [&](const std::string& name, Matrix& m) {
    const Matrix& g = *grads[k++];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double saved = m[i];
      const double numeric = ridders_derivative(
          [&](double offset) {
            m[i] = saved + offset;
            return eval();
          },
          options.step);
      m[i] = saved;
      const double scale = std::max(std::abs(numeric), std::abs(g[i]));
      const double diff = std::abs(numeric - g[i]);
      const double err = scale < kGradAbsFloor ? diff : diff / scale;
      ++res.entries;
      if (err > res.max_error) {
        res.max_error = err;
        res.worst_tensor = name;
        res.worst_index = i;
      }
    }
  });
  return res;
}

EncoderConfig random_tiny_config(std::uint64_t seed) {
  Rng rng(seed);
  EncoderConfig c;
  c.layers = 1 + uniform_index(rng, 2);
  c.heads = 1 + uniform_index(rng, 2);
  // hidden in [4, 8]; two-wide layer norms are degenerate (outputs are +-1).
  const std::size_t per_head = c.heads == 1 ? 4 + uniform_index(rng, 5) : 2 + uniform_index(rng, 3);
  c.hidden = c.heads * per_head;
  c.ffn = 4 + uniform_index(rng, 5);
  c.max_len = 6;
  c.vocab_size = 7 + uniform_index(rng, 4);
  return c;
}

GradCheckResult grad_check(const EncoderConfig& config, std::uint64_t seed,
                           const GradCheckOptions& options) {
  config.validate();
  Rng rng(derive_seed(seed, "grad_check"));
  EncoderParams params = EncoderParams::init(config, rng());
  // Move well away from the near-linear regime of the default init.
  for_each_tensor(params, [&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v += 0.4 * standard_normal(rng);
  });

  const std::size_t n = 2 + uniform_index(rng, std::min<std::size_t>(3, config.max_len - 1));
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = static_cast<TokenId>(1 + uniform_index(rng, config.vocab_size - 1));
  Matrix weights(n, config.hidden);
  for (double& v : weights.values()) v = standard_normal(rng);
  std::vector<MlmTarget> targets = {
      {uniform_index(rng, n), static_cast<TokenId>(uniform_index(rng, config.vocab_size))}};

  const OutputLoss loss = [&](const EncoderParams& p, const ForwardTrace& tr, ParamGrads* g,
                              Matrix* dout) {
    double l = 0.0;
    for (std::size_t i = 0; i < tr.output.size(); ++i) l += weights[i] * tr.output[i];
    if (dout) axpy(1.0, weights, *dout);
    return l + mlm_loss(p, tr, targets, g, dout);
  };
  return check_gradients(params, ids, loss, options);
}

}  // namespace porlab
