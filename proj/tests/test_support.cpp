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

#include "test_support.hpp"

#include <cstdlib>

#include <fmt/format.h>

namespace reident::testing {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("REIDENT_TEST_TMP");
  const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "reident_tests";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RowMatrix random_matrix(int rows, int cols, Rng& rng) {
  RowMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

RowMatrix random_unit_rows(int rows, int cols, Rng& rng) {
  RowMatrix m = random_matrix(rows, cols, rng);
  for (int i = 0; i < rows; ++i) m.row(i).normalize();
  return m;
}

Image random_image(int width, int height, int channels, Rng& rng) {
  Image img(width, height, channels);
  for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform());
  return img;
}

Manifest toy_manifest(int persons, int originals_per_person, int augmented_per_person) {
  Manifest m;
  for (int p = 0; p < persons; ++p) {
    const std::string person = fmt::format("p{:03d}", p);
    for (int i = 0; i < originals_per_person; ++i) {
      ImageRecord r;
      r.image_id = fmt::format("{}_{:02d}", person, i);
      r.person_id = person;
      r.variant = Variant::kOriginal;
      r.path = r.image_id + ".png";
      m.records.push_back(r);
    }
    for (int i = 0; i < augmented_per_person; ++i) {
      ImageRecord r;
      r.image_id = fmt::format("{}_{:02d}_aug", person, i);
      r.person_id = person;
      r.variant = Variant::kAugmented;
      r.base_image_id = fmt::format("{}_{:02d}", person, i % originals_per_person);
      r.conditioning = ConditioningSet{Condition::kDepth, Condition::kEdges,
                                       Condition::kSegmentation};
      r.path = r.image_id + ".png";
      m.records.push_back(r);
    }
  }
  return m;
}

}  // namespace reident::testing
