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

#ifndef REIDENT_TESTS_TEST_SUPPORT_HPP_
#define REIDENT_TESTS_TEST_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reident/contrastive.hpp"
#include "reident/dataset.hpp"
#include "reident/image.hpp"
#include "reident/rng.hpp"

namespace reident::testing {

// Fresh per-test scratch directory under $REIDENT_TEST_TMP (or the system
// temp directory).
std::filesystem::path scratch_dir(const std::string& name);

RowMatrix random_matrix(int rows, int cols, Rng& rng);
RowMatrix random_unit_rows(int rows, int cols, Rng& rng);

Image random_image(int width, int height, int channels, Rng& rng);

// Manifest of originals and augmented images with in-memory paths only.
Manifest toy_manifest(int persons, int originals_per_person, int augmented_per_person);

}  // namespace reident::testing

#endif  // REIDENT_TESTS_TEST_SUPPORT_HPP_
