// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/adam.hpp"

#include <cmath>

#include "porlab/error.hpp"

namespace porlab {

void adam_step(std::span<const AdamSlot> slots, AdamState& state, const AdamHyper& hyper) {
  for (const auto& s : slots) {
    if (!s.param->same_shape(*s.grad))
      throw InputError("adam: gradient shape mismatch for " + s.name);
    if (!all_finite(*s.grad)) throw TrainingError("non-finite gradient in " + s.name);
  }
  if (state.m.empty()) {
    for (const auto& s : slots) {
      state.m.emplace_back(s.param->rows(), s.param->cols());
      state.v.emplace_back(s.param->rows(), s.param->cols());
    }
  }
  if (state.m.size() != slots.size()) throw InputError("adam: state/slot count mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Matrix& p = *slots[k].param;
    const Matrix& g = *slots[k].grad;
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

std::vector<AdamSlot> adam_slots(EncoderParams& params, const ParamGrads& grads) {
  std::vector<AdamSlot> slots;
  for_each_tensor(
      params, [&](const std::string& name, Matrix& m) { slots.push_back({name, &m, nullptr}); });
  std::size_t i = 0;
  for_each_tensor(grads, [&](const std::string&, const Matrix& g) { slots[i++].grad = &g; });
  return slots;
}

void adam_step(EncoderParams& params, const ParamGrads& grads, AdamState& state,
               const AdamHyper& hyper) {
  const auto slots = adam_slots(params, grads);
  adam_step(slots, state, hyper);
}

}  // namespace porlab
