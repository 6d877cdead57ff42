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

#ifndef REIDENT_CHECKPOINT_HPP_
#define REIDENT_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include "json.hpp"
#include "reident/encoder.hpp"

namespace reident {

nlohmann::json to_json(const EncoderSpec& spec);
nlohmann::json to_json(const ProjectionSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);
ProjectionSpec projection_spec_from_json(const nlohmann::json& j);

// Archive layout:
//   "REIDCKPT" | u32 version | u64 header length | JSON header | tensor data
// The header carries both specs, the input normalization, the caller's
// metadata object and a tensor table of {name, shape, offset, count}; tensor
// data is little-endian float32 in table order.
void save_checkpoint(const std::filesystem::path& file, Model& model,
                     const nlohmann::json& metadata);

struct LoadedCheckpoint {
  Model model;
  nlohmann::json metadata;
  std::string hash;  // hex digest of the archive bytes
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace reident

#endif  // REIDENT_CHECKPOINT_HPP_
