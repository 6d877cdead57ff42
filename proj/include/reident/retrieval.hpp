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

#ifndef REIDENT_RETRIEVAL_HPP_
#define REIDENT_RETRIEVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reident/dataset.hpp"
#include "reident/encoder.hpp"

namespace reident {

enum class EmbeddingSource { kProjection, kFeatures };
enum class Protocol { kFullRef, kFewRef, kSingleRef };

std::string_view to_string(EmbeddingSource s);
std::string_view to_string(Protocol p);
EmbeddingSource parse_embedding_source(std::string_view s);
Protocol parse_protocol(std::string_view s);

// Maximum references per person under Few-Ref.
inline constexpr std::size_t kFewRefLimit = 5;

// Immutable matrix of unit-norm embeddings with aligned ids.
class EmbeddingDatabase {
 public:
  EmbeddingDatabase(FloatMatrix matrix, std::vector<std::string> image_ids,
                    std::vector<std::string> person_ids, EmbeddingSource source);

  std::size_t size() const { return image_ids_.size(); }
  int dim() const { return static_cast<int>(matrix_.cols()); }
  const FloatMatrix& matrix() const { return matrix_; }
  const std::string& image_id(std::size_t i) const { return image_ids_[i]; }
  const std::string& person_id(std::size_t i) const { return person_ids_[i]; }
  const std::vector<std::string>& image_ids() const { return image_ids_; }
  const std::vector<std::string>& person_ids() const { return person_ids_; }
  EmbeddingSource source() const { return source_; }

  // Rows whose image ids are listed, in the listed order.
  EmbeddingDatabase subset(std::span<const std::string> image_ids) const;
  std::span<const float> row(std::size_t i) const {
    return {matrix_.row(static_cast<Eigen::Index>(i)).data(),
            static_cast<std::size_t>(matrix_.cols())};
  }
  std::size_t index_of(std::string_view image_id) const;

 private:
  FloatMatrix matrix_;
  std::vector<std::string> image_ids_;
  std::vector<std::string> person_ids_;
  EmbeddingSource source_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Embeds every record with the model, rows in input order. Unreadable images
// abort the run with all failures listed.
EmbeddingDatabase build_database(Model& model, const std::vector<ImageRecord>& records,
                                 EmbeddingSource source, int batch_size = 64);

// Same as build_database for images already passed through prepare_image.
EmbeddingDatabase build_database_from_images(Model& model, std::span<const Image> prepared,
                                             std::vector<std::string> image_ids,
                                             std::vector<std::string> person_ids,
                                             EmbeddingSource source, int batch_size = 64);

// Embedding file: one JSON header line {n, d, source, checkpoint_hash}, then
// n*d little-endian float32 values; ids go to "<file>.ids.jsonl".
void write_embeddings(const std::filesystem::path& file, const EmbeddingDatabase& db,
                      const std::string& checkpoint_hash);
EmbeddingDatabase read_embeddings(const std::filesystem::path& file,
                                  std::string* checkpoint_hash = nullptr);

struct ReferenceSelection {
  std::vector<ImageRecord> references;
  std::vector<std::string> warnings;
};

// Full-Ref takes every reference-variant image of the split; Single-Ref one
// and Few-Ref up to five per person, drawn with a generator keyed to
// (seed, person_id).
ReferenceSelection select_references(const Manifest& m, Protocol protocol,
                                     std::uint64_t seed, Split split = Split::kTest,
                                     Variant reference_variant = Variant::kOriginal);

struct QueryHit {
  std::string image_id;
  std::string person_id;
  double similarity = 0.0;
};

struct QueryResult {
  std::vector<QueryHit> hits;
  bool truncated = false;  // k exceeded the database size
};

// Top-k by descending cosine similarity; exact ties go to the smaller
// image_id.
QueryResult query(const EmbeddingDatabase& db, std::span<const float> q, int k);

struct RetrievalQuery {
  std::string image_id;
  std::string person_id;
  std::vector<float> embedding;
};

struct RetrievalReport {
  Protocol protocol = Protocol::kFullRef;
  std::size_t db_size = 0;
  std::size_t n_persons = 0;
  std::size_t n_queries = 0;
  std::map<int, double> topk_accuracy;
  std::map<int, double> random_baseline;  // expected accuracy of random ranking
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// A query scores a top-k hit when any of the k most similar database images
// shares its person.
RetrievalReport evaluate_protocol(const EmbeddingDatabase& db,
                                  const std::vector<RetrievalQuery>& queries,
                                  const std::vector<int>& ks,
                                  Protocol protocol = Protocol::kFullRef,
                                  std::uint64_t seed = 0);

// Which manifest images act as references and which as queries.
struct QuerySetup {
  Split split = Split::kTest;
  Variant reference_variant = Variant::kOriginal;
  Variant query_variant = Variant::kAugmented;
};

// Selects references by protocol and queries with every query-variant image
// of the split whose person has references, then looks both up in `all`.
// Persons without queries or references are reported through `warnings`.
RetrievalReport evaluate_embeddings(const EmbeddingDatabase& all, const Manifest& m,
                                    Protocol protocol, const std::vector<int>& ks,
                                    std::uint64_t seed, const QuerySetup& setup = {},
                                    std::vector<std::string>* warnings = nullptr);

// Embeds exactly the images evaluate_embeddings needs and evaluates them.
RetrievalReport evaluate_model(Model& model, const Manifest& m, Protocol protocol,
                               const std::vector<int>& ks, std::uint64_t seed,
                               const QuerySetup& setup = {},
                               EmbeddingSource source = EmbeddingSource::kProjection,
                               std::vector<std::string>* warnings = nullptr);

// Per-query reference counts feeding the random-guessing baseline.
struct BaselineStats {
  std::size_t db_size = 0;
  std::size_t n_persons = 0;
  std::vector<std::size_t> references_of_query_person;

  static BaselineStats from(const EmbeddingDatabase& db,
                            const std::vector<RetrievalQuery>& queries);
};

// Expected top-k accuracy of ranking the database uniformly at random.
double random_baseline(Protocol protocol, const BaselineStats& stats, int k);

void write_reports_json(const std::filesystem::path& file,
                        const std::vector<RetrievalReport>& reports);
void write_reports_csv(const std::filesystem::path& file,
                       const std::vector<RetrievalReport>& reports);

}  // namespace reident

#endif  // REIDENT_RETRIEVAL_HPP_
