/*
 * Copyright 2026 The reident Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "reident/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "reident/error.hpp"
#include "reident/rng.hpp"

namespace reident {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'E', 'I', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

std::string hex_digest(const std::string& bytes) {
  return fmt::format("{:016x}", derive_seed(0, bytes));
}

}  // namespace

json to_json(const EncoderSpec& spec) {
  return {{"architecture", to_string(spec.architecture)},
          {"feature_dim", spec.feature_dim},
          {"pretrained", spec.pretrained},
          {"input_resolution", spec.input_resolution},
          {"input_channels", spec.input_channels}};
}

json to_json(const ProjectionSpec& spec) {
  return {{"hidden_dim", spec.hidden_dim}, {"output_dim", spec.output_dim}};
}

EncoderSpec encoder_spec_from_json(const json& j) {
  EncoderSpec s;
  if (j.contains("architecture")) {
    s.architecture = parse_architecture(j["architecture"].get<std::string>());
  }
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  s.pretrained = j.value("pretrained", s.pretrained);
  s.input_resolution = j.value("input_resolution", s.input_resolution);
  s.input_channels = j.value("input_channels", s.input_channels);
  s.validate();
  return s;
}

ProjectionSpec projection_spec_from_json(const json& j) {
  ProjectionSpec s;
  s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
  s.output_dim = j.value("output_dim", s.output_dim);
  s.validate();
  return s;
}

void save_checkpoint(const fs::path& file, Model& model, const json& metadata) {
  json header;
  header["encoder"] = to_json(model.encoder_spec());
  header["projection"] = to_json(model.projection_spec());
  header["normalization"] = {{"mean", model.channel_mean}, {"std", model.channel_std}};
  header["metadata"] = metadata;
  std::string payload;
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.parameters()) {
    table.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset},
                     {"count", p.size}});
    for (std::size_t i = 0; i < p.size; ++i) {
      put_le(payload, std::bit_cast<std::uint32_t>(p.value[i]));
    }
    offset += p.size * sizeof(float);
  }
  header["tensors"] = std::move(table);

  const std::string header_text = header.dump();
  std::string bytes(kMagic.begin(), kMagic.end());
  put_le(bytes, kVersion);
  put_le(bytes, static_cast<std::uint64_t>(header_text.size()));
  bytes += header_text;
  bytes += payload;

  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + file.string());
}

LoadedCheckpoint load_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + file.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) {
    return IoError("corrupt checkpoint " + file.string() + ": " + why);
  };
  const std::size_t prefix = kMagic.size() + 4 + 8;
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw corrupt("bad magic");
  }
  if (get_le<std::uint32_t>(bytes, kMagic.size()) != kVersion) {
    throw corrupt("unsupported version");
  }
  const auto header_len = get_le<std::uint64_t>(bytes, kMagic.size() + 4);
  if (header_len > bytes.size() - prefix) throw corrupt("truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(prefix, header_len));
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  }
  const std::size_t data_start = prefix + header_len;

  try {
    LoadedCheckpoint out{Model(encoder_spec_from_json(header.at("encoder")),
                               projection_spec_from_json(header.at("projection"))),
                         header.value("metadata", json::object()),
                         hex_digest(bytes)};
    out.model.channel_mean = header.at("normalization").at("mean").get<std::vector<float>>();
    out.model.channel_std = header.at("normalization").at("std").get<std::vector<float>>();
    auto params = out.model.parameters();
    const auto& table = header.at("tensors");
    if (table.size() != params.size()) throw corrupt("tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = table[i];
      if (entry.at("name").get<std::string>() != params[i].name ||
          entry.at("count").get<std::size_t>() != params[i].size) {
        throw corrupt("tensor " + params[i].name + " does not match the architecture");
      }
      const std::size_t off = data_start + entry.at("offset").get<std::size_t>();
      if (off + params[i].size * sizeof(float) > bytes.size()) {
        throw corrupt("tensor " + params[i].name + " is truncated");
      }
      for (std::size_t j = 0; j < params[i].size; ++j) {
        params[i].value[j] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, off + 4 * j));
      }
    }
    return out;
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  } catch (const PreconditionError& e) {
    throw corrupt(e.what());
  }
}

}  // namespace reident
