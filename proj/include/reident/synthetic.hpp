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

#ifndef REIDENT_SYNTHETIC_HPP_
#define REIDENT_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "reident/dataset.hpp"
#include "reident/image.hpp"

namespace reident {

enum class AnonymizationMode { kEdgePreserving, kEdgeDestroying };

std::string_view to_string(AnonymizationMode m);
AnonymizationMode parse_anonymization_mode(std::string_view s);

// Desk-scale stand-in for a face dataset plus its anonymization. Each person
// is a fixed geometric layout inside a silhouette shared by everybody;
// originals vary in appearance and by a small geometric jitter.
struct SyntheticConfig {
  int n_persons = 50;
  int images_per_person = 6;
  int image_size = 64;
  // Per-image shape displacement bound, in pixels of a 64-pixel image.
  double jitter = 1.0;
  // Consecutive persons in groups of this size share a template layout and
  // differ in one shape, giving look-alike identities. 1 draws every layout
  // independently.
  int family_size = 3;
  // Label carried by edge-preserving anonymized images; must name depth or
  // edges. Edge-destroying images are always segmentation-only.
  ConditioningSet preserving_conditioning{Condition::kDepth, Condition::kEdges,
                                          Condition::kSegmentation};
  AnonymizationMode anonymization_mode = AnonymizationMode::kEdgePreserving;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticImage {
  ImageRecord record;  // path is relative to the dataset directory
  Image pixels;
};

// Renders everything in memory. Originals and anonymized images alternate
// per (person, index); the anonymized image's base is the original with the
// same index.
std::vector<SyntheticImage> render_synthetic_dataset(const SyntheticConfig& cfg);

// Writes images/<id>.png and manifest.jsonl under out_dir and returns the
// manifest (absolute paths).
Manifest generate_synthetic_dataset(const SyntheticConfig& cfg,
                                    const std::filesystem::path& out_dir);

}  // namespace reident

#endif  // REIDENT_SYNTHETIC_HPP_
