// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "porlab/encoder.hpp"
#include "porlab/tensor.hpp"

namespace porlab {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments in the same order as the slots passed to adam_step.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

struct AdamSlot {
  std::string name;
  Matrix* param;
  const Matrix* grad;
};

/// One bias-corrected Adam update. All gradients are checked before any
/// parameter moves; a non-finite entry throws TrainingError naming the tensor.
void adam_step(std::span<const AdamSlot> slots, AdamState& state, const AdamHyper& hyper);

/// Slots for every encoder tensor, in for_each_tensor order.
std::vector<AdamSlot> adam_slots(EncoderParams& params, const ParamGrads& grads);

void adam_step(EncoderParams& params, const ParamGrads& grads, AdamState& state,
               const AdamHyper& hyper);

}  // namespace porlab
