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

#ifndef REIDENT_DATASET_HPP_
#define REIDENT_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reident/rng.hpp"

namespace reident {

enum class Variant { kOriginal, kAugmented, kEdgeOriginal, kEdgeAugmented };
enum class Split { kTrain, kVal, kTest, kUnassigned };
enum class SplitMode { kPersonDisjoint, kPersonOverlapping };
enum class Condition : std::uint8_t {
  kDepth = 1,
  kEdges = 2,
  kSegmentation = 4,
};

std::string_view to_string(Variant v);
std::string_view to_string(Split s);
std::string_view to_string(SplitMode m);
Variant parse_variant(std::string_view s);
Split parse_split(std::string_view s);
SplitMode parse_split_mode(std::string_view s);

inline bool is_original_like(Variant v) {
  return v == Variant::kOriginal || v == Variant::kEdgeOriginal;
}

// Subset of {depth, edges, segmentation}; printed as "depth+edges+segmentation".
class ConditioningSet {
 public:
  ConditioningSet() = default;
  ConditioningSet(std::initializer_list<Condition> conds) {
    for (Condition c : conds) insert(c);
  }

  void insert(Condition c) { bits_ |= static_cast<std::uint8_t>(c); }
  bool contains(Condition c) const {
    return (bits_ & static_cast<std::uint8_t>(c)) != 0;
  }
  bool empty() const { return bits_ == 0; }
  std::vector<std::string> names() const;
  std::string label() const;
  std::uint8_t bits() const { return bits_; }

  // Accepts "depth+edges", "segmentation", "none" or "".
  static ConditioningSet parse(std::string_view label);

  friend bool operator==(ConditioningSet, ConditioningSet) = default;
  friend auto operator<=>(ConditioningSet, ConditioningSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct ImageRecord {
  std::string image_id;
  std::string person_id;
  Variant variant = Variant::kOriginal;
  std::optional<std::string> base_image_id;
  ConditioningSet conditioning;
  std::filesystem::path path;
  Split split = Split::kUnassigned;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Checks the per-record variant/conditioning invariants.
void validate_record(const ImageRecord& r);

struct Manifest {
  std::vector<ImageRecord> records;
  SplitMode split_mode = SplitMode::kPersonDisjoint;
  std::uint64_t seed = 0;

  // Enforces unique image ids, record invariants and, in person_disjoint
  // mode, one split per person. With check_paths, every path must exist.
  void validate(bool check_paths = false) const;

  std::vector<std::string> person_ids() const;
  const ImageRecord* find(std::string_view image_id) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

// JSONL with one ImageRecord per line, plus a "<name>.meta.json" sidecar
// holding split_mode and seed. Relative paths are resolved against the
// manifest's directory on read and written relative to it when possible.
void write_manifest(const std::filesystem::path& file, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& file);
std::uint64_t manifest_hash(const Manifest& m);

// Recovers person/variant from filenames of the form
//   <person><sep><image>[<sep>aug[N][-<conds>]][<sep>edge].png
// where <conds> uses d/e/s for depth/edges/segmentation.
struct NamingRule {
  char separator = '_';
  std::string augmented_marker = "aug";
  std::string edge_marker = "edge";
  std::vector<std::string> extensions = {".png"};
  ConditioningSet default_conditioning{Condition::kDepth, Condition::kEdges,
                                       Condition::kSegmentation};
};

struct ManifestBuildResult {
  Manifest manifest;
  std::vector<std::string> errors;
};

ManifestBuildResult build_manifest(const std::filesystem::path& root,
                                   const NamingRule& rule = {});

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

Manifest assign_splits(const Manifest& m, SplitRatios ratios, SplitMode mode,
                       std::uint64_t seed);

struct PairSample {
  ImageRecord anchor;
  ImageRecord positive;
  bool distinct_base = false;
};

// Which variants form a training pair. When both sides use the same variant
// the positive is a different image of the same person.
struct PairingRule {
  Variant anchor = Variant::kOriginal;
  Variant positive = Variant::kAugmented;
};

// Index of the train-split persons that can form pairs under a rule.
class PairIndex {
 public:
  PairIndex(const Manifest& m, PairingRule rule = {},
            Split split = Split::kTrain);

  struct Person {
    std::string person_id;
    std::vector<std::size_t> anchors;
    std::vector<std::size_t> positives;
  };

  const std::vector<Person>& persons() const { return persons_; }
  const Manifest& manifest() const { return *manifest_; }
  PairingRule rule() const { return rule_; }

  // Positive for the given anchor record: uniform among positives with a
  // different base image when any exists, otherwise among all positives.
  PairSample make_pair(const Person& p, std::size_t anchor_index,
                       Rng& rng) const;

 private:
  const Manifest* manifest_;
  PairingRule rule_;
  std::vector<Person> persons_;
};

std::vector<PairSample> sample_training_batch(const Manifest& m, int batch_size,
                                              Rng& rng,
                                              PairingRule rule = {});

// Epoch-based batching. Each round shuffles the eligible persons and cuts
// them into chunks of batch_size, dropping the partial tail; an epoch runs
// `rounds` such rounds, cycling through each person's anchors so every
// anchor is visited before any repeats.
class EpochBatcher {
 public:
  EpochBatcher(const PairIndex& index, int batch_size, int rounds);

  std::vector<std::vector<PairSample>> epoch(Rng& rng) const;
  int batches_per_epoch() const;
  int rounds() const { return rounds_; }

  // Mean anchors per eligible person, rounded up.
  static int default_rounds(const PairIndex& index);

 private:
  const PairIndex* index_;
  int batch_size_;
  int rounds_;
};

}  // namespace reident

#endif  // REIDENT_DATASET_HPP_
