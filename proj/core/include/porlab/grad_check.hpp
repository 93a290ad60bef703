// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "porlab/encoder.hpp"

namespace porlab {

/// A scalar loss over encoder outputs. When `grads` is non-null the callee adds
/// any head-parameter gradients there and writes dLoss/dOutput into
/// `output_grad` (pre-sized N x K, zero-filled).
using OutputLoss = std::function<double(const EncoderParams&, const ForwardTrace&,
                                        ParamGrads* grads, Matrix* output_grad)>;

struct GradCheckResult {
  double max_error = 0.0;  // worst relative error (absolute when |g| < 1e-8)
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t entries = 0;
};

struct GradCheckOptions {
  /// Initial step of the extrapolation sequence.
  double step = 3e-3;
  /// Applied to the analytic gradient before comparison (mutation testing).
  std::function<void(ParamGrads&)> tamper;
};

inline constexpr double kGradAbsFloor = 1e-8;

/// Compares analytic gradients (loss head + backward) with central
/// differences, refined by Ridders' extrapolation, on every parameter entry.
GradCheckResult check_gradients(const EncoderParams& params, std::span<const TokenId> ids,
                                const OutputLoss& loss, const GradCheckOptions& options = {});

/// Draws a tiny random config (1-2 layers, hidden 4-8, <= 4 tokens).
EncoderConfig random_tiny_config(std::uint64_t seed);

/// Random well-scaled params, a <= 4 token input and a loss mixing a random
/// linear functional of the outputs with MLM cross-entropy; returns the worst
/// gradient error.
GradCheckResult grad_check(const EncoderConfig& config, std::uint64_t seed,
                           const GradCheckOptions& options = {});

}  // namespace porlab
