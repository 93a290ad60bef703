// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace porlab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a master seed, a stage tag and a counter.
///
/// seed(master, tag, i) = mix64(mix64(master ^ fnv1a(tag)) + i). Every stage
/// of a pipeline and every repeat of a sweep cell draws from its own child
/// seed, so cells can be rerun independently.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t counter = 0);

/// Uniform integer in [0, n). Uses rejection on the raw 64-bit output so the
/// sequence does not depend on the standard library's distribution code.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform double in [0, 1) built from the top 53 bits.
double uniform_unit(Rng& rng);

/// Standard normal via Box-Muller on uniform_unit (library independent).
double standard_normal(Rng& rng);

}  // namespace porlab
