// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "porlab/error.hpp"
#include "porlab/hash.hpp"

namespace porlab {
namespace {

using nlohmann::json;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint64_t get_le(std::string_view bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

json config_json(const EncoderConfig& c) {
  return {{"layers", c.layers}, {"hidden", c.hidden},   {"heads", c.heads},
          {"ffn", c.ffn},       {"max_len", c.max_len}, {"vocab_size", c.vocab_size}};
}

EncoderConfig config_from(const json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn = j.at("ffn").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  for_each_tensor(ckpt.encoder,
                  [&](const std::string& n, const Matrix& m) { tensors.emplace_back(n, &m); });
  for (const auto& [n, m] : ckpt.extras) tensors.emplace_back(n, &m);

  json manifest;
  manifest["format"] = "porlab-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["kind"] = ckpt.kind;
  manifest["config"] = config_json(ckpt.encoder.config);
  manifest["attributes"] = ckpt.attributes;
  json list = json::array();
  std::uint64_t offset = 0;
  for (const auto& [n, m] : tensors) {
    const std::uint64_t bytes = m->size() * 4;
    list.push_back(
        {{"name", n}, {"shape", {m->rows(), m->cols()}}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  manifest["tensors"] = list;
  const std::string mtext = manifest.dump();

  std::string out(kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, mtext.size());
  out += mtext;
  out.reserve(out.size() + offset);
  for (const auto& [n, m] : tensors) {
    for (double v : m->values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const std::size_t head = kCheckpointMagic.size() + 4 + 8;
  if (bytes.size() < head || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
    throw IoError("not a porlab checkpoint");
  const auto version = get_le(bytes, kCheckpointMagic.size(), 4);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto mlen = get_le(bytes, kCheckpointMagic.size() + 4, 8);
  if (head + mlen > bytes.size()) throw IoError("truncated checkpoint manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(head, mlen));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad checkpoint manifest: ") + e.what());
  }
  const std::string_view data = bytes.substr(head + mlen);

  Checkpoint ckpt;
  try {
    ckpt.kind = manifest.at("kind").get<std::string>();
    ckpt.attributes = manifest.at("attributes").get<std::map<std::string, std::string>>();
    ckpt.encoder = EncoderParams::zeros(config_from(manifest.at("config")));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad checkpoint manifest: ") + e.what());
  }

  std::map<std::string, Matrix*> slots;
  for_each_tensor(ckpt.encoder, [&](const std::string& n, Matrix& m) { slots[n] = &m; });
  std::size_t encoder_found = 0;
  for (const auto& t : manifest.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto nbytes = t.at("bytes").get<std::uint64_t>();
    if (shape.size() != 2 || nbytes != shape[0] * shape[1] * 4 || offset + nbytes > data.size())
      throw IoError("checkpoint tensor " + name + " has inconsistent extent");
    Matrix* dst = nullptr;
    if (auto it = slots.find(name); it != slots.end()) {
      dst = it->second;
      if (dst->rows() != shape[0] || dst->cols() != shape[1])
        throw IoError("checkpoint tensor " + name + " does not match config shape");
      ++encoder_found;
    } else {
      ckpt.extras.emplace_back(name, Matrix(shape[0], shape[1]));
      dst = &ckpt.extras.back().second;
    }
    for (std::size_t i = 0; i < dst->size(); ++i) {
      const auto bits = static_cast<std::uint32_t>(get_le(data, offset + 4 * i, 4));
      (*dst)[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  if (encoder_found != slots.size()) throw IoError("checkpoint is missing encoder tensors");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_checkpoint(ss.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_encoder(const std::filesystem::path& path, const EncoderParams& params) {
  Checkpoint c;
  c.encoder = params;
  save_checkpoint(path, c);
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  return load_checkpoint(path).encoder;
}

std::string params_hash(const EncoderParams& params) {
  Checkpoint c;
  c.encoder = params;
  Fnv1a h;
  h.update(serialize_checkpoint(c));
  return h.hex();
}

EncoderParams round_to_storage(EncoderParams params) {
  for_each_tensor(params, [](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
  });
  return params;
}

}  // namespace porlab
