// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "porlab/encoder.hpp"

namespace porlab {

inline constexpr std::string_view kCheckpointMagic = "PORLABCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On-disk model container, shared by clean, backdoored and fine-tuned models.
///
///   8 bytes   magic "PORLABCK"
///   u32 LE    format version
///   u64 LE    manifest length M
///   M bytes   manifest JSON: kind, config, attributes, and per tensor
///             {name, shape [rows, cols], offset, bytes}
///   ...       tensor data, little-endian float32, offsets relative to here
///
/// Values are stored in single precision; loading widens them back to double.
struct Checkpoint {
  std::string kind = "encoder";
  EncoderParams encoder;
  /// Tensors beyond the encoder (e.g. a classification head).
  std::vector<std::pair<std::string, Matrix>> extras;
  std::map<std::string, std::string> attributes;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes atomically (temporary file + rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_encoder(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_encoder(const std::filesystem::path& path);

/// Hash of the serialized encoder-only checkpoint; equal for params that
/// round to the same float32 values.
std::string params_hash(const EncoderParams& params);

/// Rounds every value to float32, i.e. what a save/load round trip yields.
EncoderParams round_to_storage(EncoderParams params);

}  // namespace porlab
