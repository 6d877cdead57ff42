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

#include "reident/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "reident/error.hpp"

namespace reident {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kOriginal: return "original";
    case Variant::kAugmented: return "augmented";
    case Variant::kEdgeOriginal: return "edge_original";
    case Variant::kEdgeAugmented: return "edge_augmented";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "?";
}

std::string_view to_string(SplitMode m) {
  return m == SplitMode::kPersonDisjoint ? "person_disjoint"
                                         : "person_overlapping";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::kOriginal, Variant::kAugmented,
                    Variant::kEdgeOriginal, Variant::kEdgeAugmented}) {
    if (to_string(v) == s) return v;
  }
  throw PreconditionError("unknown variant: " + std::string(s));
}

Split parse_split(std::string_view s) {
  for (Split v : {Split::kTrain, Split::kVal, Split::kTest, Split::kUnassigned}) {
    if (to_string(v) == s) return v;
  }
  throw PreconditionError("unknown split: " + std::string(s));
}

SplitMode parse_split_mode(std::string_view s) {
  if (s == "person_disjoint") return SplitMode::kPersonDisjoint;
  if (s == "person_overlapping") return SplitMode::kPersonOverlapping;
  throw PreconditionError("unknown split mode: " + std::string(s));
}

namespace {

constexpr std::pair<Condition, std::string_view> kConditionNames[] = {
    {Condition::kDepth, "depth"},
    {Condition::kEdges, "edges"},
    {Condition::kSegmentation, "segmentation"},
};

Condition parse_condition(std::string_view s) {
  for (auto [c, name] : kConditionNames) {
    if (name == s) return c;
  }
  throw PreconditionError("unknown conditioning: " + std::string(s));
}

}  // namespace

std::vector<std::string> ConditioningSet::names() const {
  std::vector<std::string> out;
  for (auto [c, name] : kConditionNames) {
    if (contains(c)) out.emplace_back(name);
  }
  return out;
}

std::string ConditioningSet::label() const {
  if (empty()) return "none";
  std::string out;
  for (const auto& n : names()) {
    if (!out.empty()) out += '+';
    out += n;
  }
  return out;
}

ConditioningSet ConditioningSet::parse(std::string_view label) {
  ConditioningSet out;
  if (label.empty() || label == "none") return out;
  std::size_t start = 0;
  while (start <= label.size()) {
    std::size_t end = label.find('+', start);
    if (end == std::string_view::npos) end = label.size();
    out.insert(parse_condition(label.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

void validate_record(const ImageRecord& r) {
  if (r.image_id.empty()) throw PreconditionError("record with empty image_id");
  if (r.person_id.empty()) {
    throw PreconditionError("record " + r.image_id + " has empty person_id");
  }
  if (is_original_like(r.variant)) {
    if (!r.conditioning.empty()) {
      throw PreconditionError("record " + r.image_id +
                              ": original variants carry no conditioning");
    }
    if (r.base_image_id) {
      throw PreconditionError("record " + r.image_id +
                              ": original variants have no base image");
    }
  } else if (r.conditioning.empty()) {
    throw PreconditionError("record " + r.image_id +
                            ": augmented variants need conditioning");
  }
}

void Manifest::validate(bool check_paths) const {
  std::unordered_set<std::string_view> ids;
  std::unordered_map<std::string_view, Split> person_split;
  for (const auto& r : records) {
    validate_record(r);
    if (!ids.insert(r.image_id).second) {
      throw PreconditionError("duplicate image_id: " + r.image_id);
    }
    if (check_paths && !fs::exists(r.path)) {
      throw IoError("missing image file for " + r.image_id + ": " +
                    r.path.string());
    }
    if (split_mode == SplitMode::kPersonDisjoint) {
      auto [it, inserted] = person_split.emplace(r.person_id, r.split);
      if (!inserted && it->second != r.split) {
        throw PreconditionError("person " + r.person_id +
                                " appears in more than one split");
      }
    }
  }
}

std::vector<std::string> Manifest::person_ids() const {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.person_id);
  return {ids.begin(), ids.end()};
}

const ImageRecord* Manifest::find(std::string_view image_id) const {
  for (const auto& r : records) {
    if (r.image_id == image_id) return &r;
  }
  return nullptr;
}

namespace {

fs::path meta_path(const fs::path& file) {
  fs::path p = file;
  p.replace_extension(".meta.json");
  return p;
}

json record_to_json(const ImageRecord& r, const fs::path& base_dir) {
  json j;
  j["image_id"] = r.image_id;
  j["person_id"] = r.person_id;
  j["variant"] = to_string(r.variant);
  j["base_image_id"] =
      r.base_image_id ? json(*r.base_image_id) : json(nullptr);
  j["conditioning"] = r.conditioning.names();
  fs::path p = r.path;
  if (p.is_absolute() && !base_dir.empty()) {
    std::error_code ec;
    fs::path rel = fs::relative(p, base_dir, ec);
    if (!ec && !rel.empty() && *rel.begin() != "..") p = rel;
  }
  j["path"] = p.generic_string();
  j["split"] = to_string(r.split);
  return j;
}

ImageRecord record_from_json(const json& j, const fs::path& base_dir) {
  ImageRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.person_id = j.at("person_id").get<std::string>();
  r.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("base_image_id") && !j["base_image_id"].is_null()) {
    r.base_image_id = j["base_image_id"].get<std::string>();
  }
  if (j.contains("conditioning")) {
    for (const auto& c : j["conditioning"]) {
      r.conditioning.insert(parse_condition(c.get<std::string>()));
    }
  }
  fs::path p = j.at("path").get<std::string>();
  r.path = p.is_relative() ? base_dir / p : p;
  r.split = j.contains("split") ? parse_split(j["split"].get<std::string>())
                                : Split::kUnassigned;
  return r;
}

}  // namespace

void write_manifest(const fs::path& file, const Manifest& m) {
  const fs::path dir = fs::absolute(file).parent_path();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + file.string());
  for (const auto& r : m.records) {
    ImageRecord abs = r;
    abs.path = fs::absolute(r.path).lexically_normal();
    out << record_to_json(abs, dir).dump() << '\n';
  }
  std::ofstream meta(meta_path(file), std::ios::binary);
  if (!meta) throw IoError("cannot write manifest metadata for " + file.string());
  meta << json{{"split_mode", to_string(m.split_mode)}, {"seed", m.seed}}.dump(2)
       << '\n';
  if (!out || !meta) throw IoError("write failed: " + file.string());
}

Manifest read_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + file.string());
  const fs::path dir = fs::absolute(file).parent_path();
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(json::parse(line), dir));
    } catch (const json::exception& e) {
      throw PreconditionError(file.string() + ":" + std::to_string(lineno) +
                              ": " + e.what());
    }
  }
  if (std::ifstream meta(meta_path(file)); meta) {
    try {
      json j = json::parse(meta);
      m.split_mode = parse_split_mode(j.at("split_mode").get<std::string>());
      m.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw PreconditionError(meta_path(file).string() + ": " + e.what());
    }
  }
  return m;
}

std::uint64_t manifest_hash(const Manifest& m) {
  std::ostringstream s;
  for (const auto& r : m.records) {
    s << record_to_json(r, {}).dump() << '\n';
  }
  s << to_string(m.split_mode) << ' ' << m.seed;
  return derive_seed(0, s.str());
}

namespace {

std::vector<std::string> split_tokens(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = s.find(sep, start);
    out.emplace_back(s.substr(start, end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

// Parses "aug", "aug2", "aug-de", "aug2-s"; returns nullopt when the token is
// not an augmentation marker.
std::optional<ConditioningSet> parse_aug_token(const std::string& tok,
                                               const NamingRule& rule) {
  const std::string& mk = rule.augmented_marker;
  if (tok.compare(0, mk.size(), mk) != 0) return std::nullopt;
  std::size_t i = mk.size();
  while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
  if (i == tok.size()) return rule.default_conditioning;
  if (tok[i] != '-' || i + 1 == tok.size()) return std::nullopt;
  ConditioningSet c;
  for (char ch : tok.substr(i + 1)) {
    switch (ch) {
      case 'd': c.insert(Condition::kDepth); break;
      case 'e': c.insert(Condition::kEdges); break;
      case 's': c.insert(Condition::kSegmentation); break;
      default: return std::nullopt;
    }
  }
  return c;
}

}  // namespace

ManifestBuildResult build_manifest(const fs::path& root, const NamingRule& rule) {
  if (!fs::is_directory(root)) {
    throw IoError("not a directory: " + root.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (std::find(rule.extensions.begin(), rule.extensions.end(), ext) !=
        rule.extensions.end()) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw PreconditionError("no images found in " + root.string());
  }
  std::sort(files.begin(), files.end());

  ManifestBuildResult result;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    auto toks = split_tokens(stem, rule.separator);
    bool edge = false;
    if (toks.size() > 2 && toks.back() == rule.edge_marker) {
      edge = true;
      toks.pop_back();
    }
    std::optional<ConditioningSet> aug;
    if (toks.size() == 3) {
      aug = parse_aug_token(toks[2], rule);
      if (!aug) {
        result.errors.push_back(f.string() + ": unrecognized token '" +
                                toks[2] + "'");
        continue;
      }
    }
    if (toks.size() < 2 || toks.size() > 3 || toks[0].empty() ||
        toks[1].empty()) {
      result.errors.push_back(f.string() + ": filename does not match the naming rule");
      continue;
    }
    ImageRecord r;
    r.image_id = stem;
    r.person_id = toks[0];
    r.path = f;
    if (aug) {
      r.variant = edge ? Variant::kEdgeAugmented : Variant::kAugmented;
      r.conditioning = *aug;
      r.base_image_id = toks[0] + rule.separator + toks[1];
      if (edge) *r.base_image_id += rule.separator + rule.edge_marker;
    } else {
      r.variant = edge ? Variant::kEdgeOriginal : Variant::kOriginal;
    }
    try {
      validate_record(r);
    } catch (const PreconditionError& e) {
      result.errors.push_back(f.string() + ": " + e.what());
      continue;
    }
    result.manifest.records.push_back(std::move(r));
  }
  if (result.manifest.records.empty()) {
    throw PreconditionError("no images in " + root.string() +
                            " match the naming rule");
  }
  return result;
}

Manifest assign_splits(const Manifest& m, SplitRatios ratios, SplitMode mode,
                       std::uint64_t seed) {
  if (m.records.empty()) throw PreconditionError("manifest is empty");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw PreconditionError("split ratios must be non-negative and sum to 1");
  }
  Manifest out = m;
  out.split_mode = mode;
  out.seed = seed;
  Rng rng(derive_seed(seed, "assign_splits"));

  auto quotas = [&](std::size_t n) {
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios.val * n));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    return std::pair{n_train, n_val};
  };

  if (mode == SplitMode::kPersonOverlapping) {
    std::vector<std::size_t> order(out.records.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    auto [n_train, n_val] = quotas(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      out.records[order[i]].split =
          i < n_train ? Split::kTrain
                      : (i < n_train + n_val ? Split::kVal : Split::kTest);
    }
    return out;
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& r : out.records) ++counts[r.person_id];
  if (counts.size() < 3) {
    throw PreconditionError("person_disjoint splitting needs at least 3 persons, got " +
                            std::to_string(counts.size()));
  }
  std::vector<std::pair<std::string, std::size_t>> persons(counts.begin(),
                                                           counts.end());
  // Seeded shuffle first so that equal counts are ordered randomly.
  rng.shuffle(std::span(persons));
  std::stable_sort(persons.begin(), persons.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const std::size_t n = persons.size();
  auto [n_train, n_val] = quotas(n);
  // Every split with a positive ratio gets at least one person.
  if (ratios.train > 0) n_train = std::max<std::size_t>(n_train, 1);
  if (ratios.val > 0) n_val = std::max<std::size_t>(n_val, 1);
  std::size_t n_test = n - std::min(n, n_train + n_val);
  if (ratios.test > 0 && n_test == 0) {
    if (n_train > n_val && n_train > 1) --n_train; else --n_val;
    n_test = 1;
  }

  std::unordered_map<std::string, Split> assignment;
  for (std::size_t i = 0; i < n_train; ++i) {
    assignment[persons[i].first] = Split::kTrain;
  }
  std::vector<std::string> rest;
  for (std::size_t i = n_train; i < n; ++i) rest.push_back(persons[i].first);
  rng.shuffle(std::span(rest));
  for (std::size_t i = 0; i < rest.size(); ++i) {
    assignment[rest[i]] = i < n_val ? Split::kVal : Split::kTest;
  }
  for (auto& r : out.records) r.split = assignment.at(r.person_id);
  return out;
}

PairIndex::PairIndex(const Manifest& m, PairingRule rule, Split split)
    : manifest_(&m), rule_(rule) {
  std::map<std::string, Person> by_person;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.split != split) continue;
    if (r.variant == rule.anchor) by_person[r.person_id].anchors.push_back(i);
    if (r.variant == rule.positive) by_person[r.person_id].positives.push_back(i);
  }
  const bool same_variant = rule.anchor == rule.positive;
  for (auto& [id, p] : by_person) {
    if (p.anchors.empty() || p.positives.empty()) continue;
    if (same_variant && p.positives.size() < 2) continue;
    p.person_id = id;
    persons_.push_back(std::move(p));
  }
}

PairSample PairIndex::make_pair(const Person& p, std::size_t anchor_index,
                                Rng& rng) const {
  const auto& records = manifest_->records;
  const ImageRecord& anchor = records[anchor_index];
  std::vector<std::size_t> distinct;
  std::vector<std::size_t> fallback;
  for (std::size_t idx : p.positives) {
    if (idx == anchor_index) continue;
    fallback.push_back(idx);
    const auto& base = records[idx].base_image_id;
    if (!base || *base != anchor.image_id) distinct.push_back(idx);
  }
  const auto& pool = distinct.empty() ? fallback : distinct;
  if (pool.empty()) {
    throw PreconditionError("person " + p.person_id + " has no positive for " +
                            anchor.image_id);
  }
  const ImageRecord& pos = records[pool[rng.below(pool.size())]];
  const bool distinct_base = !pos.base_image_id || *pos.base_image_id != anchor.image_id;
  return PairSample{anchor, pos, distinct_base};
}

std::vector<PairSample> sample_training_batch(const Manifest& m, int batch_size,
                                              Rng& rng, PairingRule rule) {
  if (batch_size < 2) throw PreconditionError("batch size must be at least 2");
  PairIndex index(m, rule);
  const auto& persons = index.persons();
  if (persons.size() < static_cast<std::size_t>(batch_size)) {
    throw PreconditionError(
        "batch of " + std::to_string(batch_size) + " needs as many eligible train persons, found " +
        std::to_string(persons.size()) + " (short by " +
        std::to_string(batch_size - persons.size()) + ")");
  }
  std::vector<std::size_t> order(persons.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  std::vector<PairSample> batch;
  batch.reserve(batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const auto& p = persons[order[k]];
    const std::size_t anchor = p.anchors[rng.below(p.anchors.size())];
    batch.push_back(index.make_pair(p, anchor, rng));
  }
  return batch;
}

EpochBatcher::EpochBatcher(const PairIndex& index, int batch_size, int rounds)
    : index_(&index), batch_size_(batch_size), rounds_(rounds) {
  if (batch_size < 2) throw PreconditionError("batch size must be at least 2");
  if (rounds < 1) throw PreconditionError("rounds per epoch must be positive");
  const std::size_t n = index.persons().size();
  if (n < static_cast<std::size_t>(batch_size)) {
    throw PreconditionError(
        "batch of " + std::to_string(batch_size) + " needs as many eligible train persons, found " +
        std::to_string(n) + " (short by " + std::to_string(batch_size - n) + ")");
  }
}

int EpochBatcher::default_rounds(const PairIndex& index) {
  std::size_t total = 0;
  for (const auto& p : index.persons()) total += p.anchors.size();
  const std::size_t n = index.persons().size();
  return n == 0 ? 1 : static_cast<int>((total + n - 1) / n);
}

int EpochBatcher::batches_per_epoch() const {
  return rounds_ * static_cast<int>(index_->persons().size() / batch_size_);
}

std::vector<std::vector<PairSample>> EpochBatcher::epoch(Rng& rng) const {
  const auto& persons = index_->persons();
  std::vector<std::vector<std::size_t>> anchor_order(persons.size());
  for (std::size_t i = 0; i < persons.size(); ++i) {
    anchor_order[i] = persons[i].anchors;
    rng.shuffle(std::span(anchor_order[i]));
  }
  std::vector<std::size_t> cursor(persons.size(), 0);
  std::vector<std::size_t> order(persons.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::vector<PairSample>> batches;
  const std::size_t per_round = persons.size() / batch_size_;
  for (int round = 0; round < rounds_; ++round) {
    rng.shuffle(std::span(order));
    for (std::size_t b = 0; b < per_round; ++b) {
      std::vector<PairSample> batch;
      batch.reserve(batch_size_);
      for (int k = 0; k < batch_size_; ++k) {
        const std::size_t pi = order[b * batch_size_ + k];
        const auto& anchors = anchor_order[pi];
        const std::size_t anchor = anchors[cursor[pi]++ % anchors.size()];
        batch.push_back(index_->make_pair(persons[pi], anchor, rng));
      }
      batches.push_back(std::move(batch));
    }
  }
  return batches;
}

}  // namespace reident
