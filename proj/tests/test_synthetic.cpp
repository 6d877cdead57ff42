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

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <set>

#include "reident/edgeops.hpp"
#include "reident/error.hpp"
#include "reident/synthetic.hpp"
#include "test_support.hpp"

namespace reident {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Synthetic, CountsIdsAndRecords) {
  SyntheticConfig cfg;
  cfg.n_persons = 4;
  cfg.images_per_person = 3;
  const auto imgs = render_synthetic_dataset(cfg);
  ASSERT_EQ(imgs.size(), 24u);
  std::set<std::string> persons, ids;
  for (const auto& s : imgs) {
    persons.insert(s.record.person_id);
    ids.insert(s.record.image_id);
    EXPECT_NO_THROW(validate_record(s.record));
    EXPECT_EQ(s.pixels.width(), 64);
    EXPECT_EQ(s.pixels.channels(), 1);
    for (float v : s.pixels.pixels()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  EXPECT_EQ(persons.size(), 4u);
  EXPECT_EQ(ids.size(), 24u);
  EXPECT_EQ(imgs[1].record.base_image_id, imgs[0].record.image_id);
  EXPECT_EQ(imgs[1].record.conditioning.label(), "depth+edges+segmentation");
}

TEST(Synthetic, DestroyingModeIsSegmentationOnly) {
  SyntheticConfig cfg;
  cfg.n_persons = 2;
  cfg.images_per_person = 2;
  cfg.anonymization_mode = AnonymizationMode::kEdgeDestroying;
  for (const auto& s : render_synthetic_dataset(cfg)) {
    if (s.record.variant == Variant::kAugmented) {
      EXPECT_EQ(s.record.conditioning.label(), "segmentation");
    }
  }
  cfg.anonymization_mode = AnonymizationMode::kEdgePreserving;
  cfg.preserving_conditioning = ConditioningSet{Condition::kDepth, Condition::kSegmentation};
  const auto imgs = render_synthetic_dataset(cfg);
  EXPECT_EQ(imgs[1].record.conditioning.label(), "depth+segmentation");
  EXPECT_EQ(imgs[1].record.image_id, "p0000_00_aug-ds");
  cfg.preserving_conditioning = ConditioningSet{Condition::kSegmentation};
  EXPECT_THROW(render_synthetic_dataset(cfg), PreconditionError);
}

TEST(Synthetic, WrittenDatasetIsByteIdenticalAcrossRuns) {
  SyntheticConfig cfg;
  cfg.n_persons = 2;
  cfg.images_per_person = 2;
  cfg.seed = 7;
  const auto dir = testing::scratch_dir("synth_det");
  const Manifest a = generate_synthetic_dataset(cfg, dir / "a");
  const Manifest b = generate_synthetic_dataset(cfg, dir / "b");
  ASSERT_EQ(a.records.size(), 8u);
  a.validate(true);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(slurp(a.records[i].path), slurp(b.records[i].path));
  }
  EXPECT_EQ(read_manifest(dir / "a" / "manifest.jsonl"), a);
  const Manifest c = generate_synthetic_dataset(cfg, dir / "a");
  EXPECT_EQ(manifest_hash(c), manifest_hash(a));
  cfg.seed = 8;
  const auto other = render_synthetic_dataset(cfg);
  EXPECT_FALSE(other[0].pixels == render_synthetic_dataset(SyntheticConfig{2, 2, 64})[0].pixels);
}

TEST(Synthetic, PreservingKeepsEdgesBetterThanDestroying) {
  // Over 100+ pairs of the same persons.
  SyntheticConfig cfg;
  cfg.n_persons = 26;
  cfg.images_per_person = 4;
  cfg.seed = 3;
  const auto keep = render_synthetic_dataset(cfg);
  cfg.anonymization_mode = AnonymizationMode::kEdgeDestroying;
  const auto destroy = render_synthetic_dataset(cfg);
  double s_keep = 0, s_destroy = 0;
  int pairs = 0;
  for (std::size_t i = 0; i + 1 < keep.size(); i += 2) {
    ASSERT_TRUE(keep[i].pixels == destroy[i].pixels) << "originals must not depend on the mode";
    const Image e0 = canny_edges(keep[i].pixels).pixels;
    s_keep += ssim(e0, canny_edges(keep[i + 1].pixels).pixels);
    s_destroy += ssim(e0, canny_edges(destroy[i + 1].pixels).pixels);
    ++pairs;
  }
  EXPECT_GE(pairs, 100);
  EXPECT_GT(s_keep / pairs, s_destroy / pairs);
}

TEST(Synthetic, FamilyMembersLookAlike) {
  SyntheticConfig cfg;
  cfg.n_persons = 30;
  cfg.images_per_person = 2;
  cfg.family_size = 3;
  const auto images = render_synthetic_dataset(cfg);
  // Records alternate original and anonymized, two of each per person.
  auto edges_of = [&](int person) { return canny_edges(images[4 * person].pixels).pixels; };
  double within = 0, across = 0;
  int n_within = 0, n_across = 0;
  for (int p = 0; p + 1 < cfg.n_persons; ++p) {
    const double s = ssim(edges_of(p), edges_of(p + 1));
    if (p / 3 == (p + 1) / 3) {
      within += s;
      ++n_within;
    } else {
      across += s;
      ++n_across;
    }
  }
  EXPECT_GT(within / n_within, across / n_across);
}

TEST(Synthetic, Preconditions) {
  EXPECT_THROW(render_synthetic_dataset(SyntheticConfig{1, 6, 64}), PreconditionError);
  EXPECT_THROW(render_synthetic_dataset(SyntheticConfig{5, 1, 64}), PreconditionError);
  EXPECT_THROW(render_synthetic_dataset(SyntheticConfig{5, 2, 16}), PreconditionError);
  SyntheticConfig cfg;
  cfg.jitter = -1;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg.jitter = 1;
  cfg.family_size = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  EXPECT_THROW(parse_anonymization_mode("blur"), PreconditionError);
}

}  // namespace
}  // namespace reident
