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

#include "reident/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "reident/error.hpp"
#include "reident/image.hpp"
#include "reident/rng.hpp"

namespace reident {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(EmbeddingSource s) {
  return s == EmbeddingSource::kProjection ? "projection" : "features";
}

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kFullRef: return "full_ref";
    case Protocol::kFewRef: return "few_ref";
    case Protocol::kSingleRef: return "single_ref";
  }
  return "?";
}

EmbeddingSource parse_embedding_source(std::string_view s) {
  if (s == "projection") return EmbeddingSource::kProjection;
  if (s == "features") return EmbeddingSource::kFeatures;
  throw PreconditionError("unknown embedding source: " + std::string(s));
}

Protocol parse_protocol(std::string_view s) {
  for (Protocol p : {Protocol::kFullRef, Protocol::kFewRef, Protocol::kSingleRef}) {
    if (to_string(p) == s) return p;
  }
  throw PreconditionError("unknown protocol: " + std::string(s));
}

EmbeddingDatabase::EmbeddingDatabase(FloatMatrix matrix,
                                     std::vector<std::string> image_ids,
                                     std::vector<std::string> person_ids,
                                     EmbeddingSource source)
    : matrix_(std::move(matrix)),
      image_ids_(std::move(image_ids)),
      person_ids_(std::move(person_ids)),
      source_(source) {
  if (static_cast<std::size_t>(matrix_.rows()) != image_ids_.size() ||
      image_ids_.size() != person_ids_.size()) {
    throw PreconditionError("embedding rows and ids are not aligned");
  }
  for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
    const double norm = matrix_.row(i).cast<double>().norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw PreconditionError("embedding for " + image_ids_[i] + " is zero or not finite");
    }
    matrix_.row(i) = (matrix_.row(i).cast<double>() / norm).cast<float>();
    if (!index_.emplace(image_ids_[i], static_cast<std::size_t>(i)).second) {
      throw PreconditionError("duplicate image id in database: " + image_ids_[i]);
    }
  }
}

std::size_t EmbeddingDatabase::index_of(std::string_view image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) {
    throw PreconditionError("no embedding for image " + std::string(image_id));
  }
  return it->second;
}

EmbeddingDatabase EmbeddingDatabase::subset(std::span<const std::string> ids) const {
  FloatMatrix m(static_cast<Eigen::Index>(ids.size()), matrix_.cols());
  std::vector<std::string> persons;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t src = index_of(ids[i]);
    m.row(static_cast<Eigen::Index>(i)) = matrix_.row(static_cast<Eigen::Index>(src));
    persons.push_back(person_ids_[src]);
  }
  return EmbeddingDatabase(std::move(m), {ids.begin(), ids.end()}, std::move(persons),
                           source_);
}

EmbeddingDatabase build_database(Model& model, const std::vector<ImageRecord>& records,
                                 EmbeddingSource source, int batch_size) {
  if (records.empty()) throw PreconditionError("cannot build a database from no records");
  std::vector<Image> prepared;
  prepared.reserve(records.size());
  std::vector<std::string> failures;
  for (const auto& r : records) {
    try {
      prepared.push_back(prepare_image(load_png(r.path), model.encoder_spec()));
    } catch (const IoError& e) {
      failures.push_back(e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " unreadable image(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw IoError(msg);
  }
  std::vector<std::string> ids, persons;
  for (const auto& r : records) {
    ids.push_back(r.image_id);
    persons.push_back(r.person_id);
  }
  return build_database_from_images(model, prepared, std::move(ids), std::move(persons),
                                    source, batch_size);
}

EmbeddingDatabase build_database_from_images(Model& model, std::span<const Image> prepared,
                                             std::vector<std::string> image_ids,
                                             std::vector<std::string> person_ids,
                                             EmbeddingSource source, int batch_size) {
  if (prepared.empty()) throw PreconditionError("cannot build a database from no images");
  if (batch_size < 1) throw PreconditionError("batch size must be positive");
  const int dim = source == EmbeddingSource::kProjection
                      ? model.projection_spec().output_dim
                      : model.encoder_spec().feature_dim;
  FloatMatrix all(static_cast<Eigen::Index>(prepared.size()), dim);
  for (std::size_t start = 0; start < prepared.size(); start += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, prepared.size() - start);
    const Activation batch = make_input_batch(prepared.subspan(start, n), model);
    FloatMatrix out = encode(model, batch);
    if (source == EmbeddingSource::kProjection) out = project(model, out);
    all.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = out;
  }
  return EmbeddingDatabase(std::move(all), std::move(image_ids), std::move(person_ids),
                           source);
}

namespace {

fs::path ids_path(const fs::path& file) {
  fs::path p = file;
  p += ".ids.jsonl";
  return p;
}

}  // namespace

void write_embeddings(const fs::path& file, const EmbeddingDatabase& db,
                      const std::string& checkpoint_hash) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write embeddings: " + file.string());
  out << json{{"n", db.size()}, {"d", db.dim()}, {"source", to_string(db.source())},
              {"checkpoint_hash", checkpoint_hash}}
             .dump()
      << '\n';
  std::string bytes;
  bytes.reserve(db.size() * db.dim() * 4);
  for (std::size_t i = 0; i < db.size(); ++i) {
    for (float v : db.row(i)) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
    }
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream ids(ids_path(file), std::ios::binary);
  if (!ids) throw IoError("cannot write " + ids_path(file).string());
  for (std::size_t i = 0; i < db.size(); ++i) {
    ids << json{{"image_id", db.image_id(i)}, {"person_id", db.person_id(i)}}.dump() << '\n';
  }
  if (!out || !ids) throw IoError("write failed: " + file.string());
}

EmbeddingDatabase read_embeddings(const fs::path& file, std::string* checkpoint_hash) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read embeddings: " + file.string());
  std::string header_line;
  std::getline(in, header_line);
  json header;
  std::size_t n = 0, d = 0;
  EmbeddingSource source;
  try {
    header = json::parse(header_line);
    n = header.at("n").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
    source = parse_embedding_source(header.at("source").get<std::string>());
    if (checkpoint_hash) *checkpoint_hash = header.value("checkpoint_hash", "");
  } catch (const json::exception& e) {
    throw IoError("bad embedding header in " + file.string() + ": " + e.what());
  }
  std::string bytes(n * d * 4, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw IoError("truncated embedding file: " + file.string());
  }
  FloatMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n * d; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) {
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    }
    m.data()[i] = std::bit_cast<float>(u);
  }
  std::ifstream ids(ids_path(file));
  if (!ids) throw IoError("missing id sidecar: " + ids_path(file).string());
  std::vector<std::string> image_ids, person_ids;
  std::string line;
  while (std::getline(ids, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      image_ids.push_back(j.at("image_id").get<std::string>());
      person_ids.push_back(j.at("person_id").get<std::string>());
    } catch (const json::exception& e) {
      throw IoError("bad id sidecar line in " + ids_path(file).string() + ": " + e.what());
    }
  }
  if (image_ids.size() != n) throw IoError("id sidecar does not match " + file.string());
  return EmbeddingDatabase(std::move(m), std::move(image_ids), std::move(person_ids), source);
}

ReferenceSelection select_references(const Manifest& m, Protocol protocol,
                                     std::uint64_t seed, Split split,
                                     Variant reference_variant) {
  std::map<std::string, std::vector<const ImageRecord*>> by_person;
  std::set<std::string> split_persons;
  for (const auto& r : m.records) {
    if (r.split != split) continue;
    split_persons.insert(r.person_id);
    if (r.variant == reference_variant) by_person[r.person_id].push_back(&r);
  }
  if (split_persons.empty()) {
    throw PreconditionError("split " + std::string(to_string(split)) + " is empty");
  }
  ReferenceSelection out;
  for (const auto& p : split_persons) {
    if (!by_person.count(p)) {
      out.warnings.push_back("person " + p + " has no " +
                             std::string(to_string(reference_variant)) +
                             " images; excluded from references");
    }
  }
  if (protocol == Protocol::kFullRef) {
    for (const auto& r : m.records) {
      if (r.split == split && r.variant == reference_variant) out.references.push_back(r);
    }
    return out;
  }
  const std::size_t limit = protocol == Protocol::kSingleRef ? 1 : kFewRefLimit;
  for (auto& [person, recs] : by_person) {
    std::vector<const ImageRecord*> pool = recs;
    std::sort(pool.begin(), pool.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->image_id < b->image_id; });
    Rng rng(derive_seed(seed, person));
    rng.shuffle(std::span(pool));
    pool.resize(std::min(limit, pool.size()));
    for (const ImageRecord* r : pool) out.references.push_back(*r);
  }
  return out;
}

namespace {

std::vector<double> scores_for(const EmbeddingDatabase& db, std::span<const float> q) {
  if (static_cast<int>(q.size()) != db.dim()) {
    throw PreconditionError("query dimension " + std::to_string(q.size()) +
                            " does not match database dimension " + std::to_string(db.dim()));
  }
  double norm = 0.0;
  for (float v : q) norm += static_cast<double>(v) * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw PreconditionError("query vector is zero or not finite");
  }
  std::vector<double> unit(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) unit[i] = q[i] / norm;
  std::vector<double> scores(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto row = db.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < unit.size(); ++j) s += static_cast<double>(row[j]) * unit[j];
    scores[i] = s;
  }
  return scores;
}

// True when database row a ranks ahead of row b.
bool ranks_before(const EmbeddingDatabase& db, const std::vector<double>& scores,
                  std::size_t a, std::size_t b) {
  if (scores[a] != scores[b]) return scores[a] > scores[b];
  return db.image_id(a) < db.image_id(b);
}

}  // namespace

QueryResult query(const EmbeddingDatabase& db, std::span<const float> q, int k) {
  if (k < 1) throw PreconditionError("k must be at least 1");
  const auto scores = scores_for(db, q);
  QueryResult out;
  std::size_t take = static_cast<std::size_t>(k);
  if (take > db.size()) {
    take = db.size();
    out.truncated = true;
  }
  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return ranks_before(db, scores, a, b);
                    });
  for (std::size_t i = 0; i < take; ++i) {
    out.hits.push_back({db.image_id(order[i]), db.person_id(order[i]), scores[order[i]]});
  }
  return out;
}

json RetrievalReport::to_json() const {
  json acc = json::object(), base = json::object();
  for (auto [k, v] : topk_accuracy) acc[std::to_string(k)] = v;
  for (auto [k, v] : random_baseline) base[std::to_string(k)] = v;
  return {{"protocol", to_string(protocol)}, {"db_size", db_size},
          {"n_persons", n_persons},          {"n_queries", n_queries},
          {"topk_accuracy", acc},            {"random_baseline", base},
          {"seed", seed}};
}

RetrievalReport evaluate_protocol(const EmbeddingDatabase& db,
                                  const std::vector<RetrievalQuery>& queries,
                                  const std::vector<int>& ks, Protocol protocol,
                                  std::uint64_t seed) {
  if (queries.empty()) throw PreconditionError("no queries to evaluate");
  if (ks.empty()) throw PreconditionError("no k values requested");
  for (int k : ks) {
    if (k < 1) throw PreconditionError("k must be at least 1");
  }
  const std::set<std::string> db_persons(db.person_ids().begin(), db.person_ids().end());
  RetrievalReport report;
  report.protocol = protocol;
  report.db_size = db.size();
  report.n_persons = db_persons.size();
  report.n_queries = queries.size();
  report.seed = seed;

  // Rank (0-based) of the best-ranked database image of the query's person.
  std::vector<std::size_t> first_hit;
  first_hit.reserve(queries.size());
  for (const auto& q : queries) {
    if (!db_persons.count(q.person_id)) {
      throw PreconditionError("query " + q.image_id + " has person " + q.person_id +
                              " with no database images");
    }
    const auto scores = scores_for(db, q.embedding);
    std::size_t best = db.size();
    for (std::size_t i = 0; i < db.size(); ++i) {
      if (db.person_id(i) == q.person_id && (best == db.size() || ranks_before(db, scores, i, best))) {
        best = i;
      }
    }
    std::size_t rank = 0;
    for (std::size_t i = 0; i < db.size(); ++i) {
      if (i != best && ranks_before(db, scores, i, best)) ++rank;
    }
    first_hit.push_back(rank);
  }
  for (int k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : first_hit) hits += r < static_cast<std::size_t>(k) ? 1 : 0;
    report.topk_accuracy[k] = static_cast<double>(hits) / static_cast<double>(queries.size());
  }
  const BaselineStats stats = BaselineStats::from(db, queries);
  for (int k : ks) report.random_baseline[k] = random_baseline(protocol, stats, k);
  return report;
}

namespace {

struct EvaluationInputs {
  std::vector<ImageRecord> references;
  std::vector<ImageRecord> queries;
};

EvaluationInputs evaluation_inputs(const Manifest& m, Protocol protocol, std::uint64_t seed,
                                   const QuerySetup& setup, std::vector<std::string>* warnings) {
  ReferenceSelection sel =
      select_references(m, protocol, seed, setup.split, setup.reference_variant);
  std::set<std::string> ref_persons;
  for (const auto& r : sel.references) ref_persons.insert(r.person_id);
  EvaluationInputs in;
  std::set<std::string> query_persons;
  for (const auto& r : m.records) {
    if (r.split != setup.split || r.variant != setup.query_variant) continue;
    if (setup.reference_variant == setup.query_variant) {
      throw PreconditionError("reference and query variants must differ");
    }
    if (!ref_persons.count(r.person_id)) continue;
    in.queries.push_back(r);
    query_persons.insert(r.person_id);
  }
  if (warnings) {
    for (auto& w : sel.warnings) warnings->push_back(std::move(w));
    for (const auto& p : ref_persons) {
      if (!query_persons.count(p)) {
        warnings->push_back("person " + p + " has no " +
                            std::string(to_string(setup.query_variant)) + " queries");
      }
    }
  }
  if (in.queries.empty()) {
    throw PreconditionError("no " + std::string(to_string(setup.query_variant)) +
                            " queries in split " + std::string(to_string(setup.split)));
  }
  in.references = std::move(sel.references);
  return in;
}

RetrievalReport evaluate_inputs(const EmbeddingDatabase& all, const EvaluationInputs& in,
                                Protocol protocol, const std::vector<int>& ks,
                                std::uint64_t seed) {
  std::vector<std::string> ref_ids;
  ref_ids.reserve(in.references.size());
  for (const auto& r : in.references) ref_ids.push_back(r.image_id);
  const EmbeddingDatabase db = all.subset(ref_ids);
  std::vector<RetrievalQuery> queries;
  queries.reserve(in.queries.size());
  for (const auto& r : in.queries) {
    const auto row = all.row(all.index_of(r.image_id));
    queries.push_back({r.image_id, r.person_id, {row.begin(), row.end()}});
  }
  return evaluate_protocol(db, queries, ks, protocol, seed);
}

}  // namespace

RetrievalReport evaluate_embeddings(const EmbeddingDatabase& all, const Manifest& m,
                                    Protocol protocol, const std::vector<int>& ks,
                                    std::uint64_t seed, const QuerySetup& setup,
                                    std::vector<std::string>* warnings) {
  return evaluate_inputs(all, evaluation_inputs(m, protocol, seed, setup, warnings), protocol,
                         ks, seed);
}

RetrievalReport evaluate_model(Model& model, const Manifest& m, Protocol protocol,
                               const std::vector<int>& ks, std::uint64_t seed,
                               const QuerySetup& setup, EmbeddingSource source,
                               std::vector<std::string>* warnings) {
  const EvaluationInputs in = evaluation_inputs(m, protocol, seed, setup, warnings);
  std::vector<ImageRecord> needed = in.references;
  needed.insert(needed.end(), in.queries.begin(), in.queries.end());
  const EmbeddingDatabase all = build_database(model, needed, source);
  return evaluate_inputs(all, in, protocol, ks, seed);
}

BaselineStats BaselineStats::from(const EmbeddingDatabase& db,
                                  const std::vector<RetrievalQuery>& queries) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : db.person_ids()) ++counts[p];
  BaselineStats s;
  s.db_size = db.size();
  s.n_persons = counts.size();
  for (const auto& q : queries) {
    auto it = counts.find(q.person_id);
    s.references_of_query_person.push_back(it == counts.end() ? 0 : it->second);
  }
  return s;
}

double random_baseline(Protocol protocol, const BaselineStats& stats, int k) {
  if (k < 1) throw PreconditionError("k must be at least 1");
  if (protocol == Protocol::kSingleRef) {
    if (stats.n_persons == 0) throw PreconditionError("baseline needs at least one person");
    return std::min(1.0, static_cast<double>(k) / static_cast<double>(stats.n_persons));
  }
  if (stats.references_of_query_person.empty() || stats.db_size == 0) {
    throw PreconditionError("baseline needs queries and a non-empty database");
  }
  const double total = static_cast<double>(stats.db_size);
  double sum = 0.0;
  for (std::size_t m : stats.references_of_query_person) {
    // P(no reference of the person among k draws without replacement).
    double miss = 1.0;
    for (int i = 0; i < k && miss > 0.0; ++i) {
      const double remaining = total - i;
      if (remaining <= 0.0) {
        miss = 0.0;
        break;
      }
      miss *= std::max(0.0, remaining - static_cast<double>(m)) / remaining;
    }
    sum += 1.0 - miss;
  }
  return sum / static_cast<double>(stats.references_of_query_person.size());
}

void write_reports_json(const fs::path& file, const std::vector<RetrievalReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(r.to_json());
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << json{{"reports", arr}}.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

void write_reports_csv(const fs::path& file, const std::vector<RetrievalReport>& reports) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << "protocol,k,accuracy,random_baseline,db_size,n_persons,n_queries,seed\n";
  char buf[64], base[64];
  for (const auto& r : reports) {
    for (auto [k, v] : r.topk_accuracy) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      const auto it = r.random_baseline.find(k);
      std::snprintf(base, sizeof(base), "%.6f", it == r.random_baseline.end() ? 0.0 : it->second);
      out << to_string(r.protocol) << ',' << k << ',' << buf << ',' << base << ','
          << r.db_size << ',' << r.n_persons << ',' << r.n_queries << ',' << r.seed << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + file.string());
}

}  // namespace reident
