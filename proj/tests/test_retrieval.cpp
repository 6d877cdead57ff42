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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "reident/error.hpp"
#include "reident/retrieval.hpp"
#include "reident/rng.hpp"
#include "test_support.hpp"

namespace reident {
namespace {

struct RandomDb {
  EmbeddingDatabase db;
  std::vector<std::vector<float>> queries;
};

// Random database whose ids are shuffled relative to row order, with some
// rows duplicated so that exact ties occur.
RandomDb make_db(Rng& rng, int n, int d, int persons) {
  FloatMatrix m(n, d);
  for (int i = 0; i < n; ++i) {
    if (i > 0 && rng.uniform() < 0.25) {
      m.row(i) = m.row(static_cast<Eigen::Index>(rng.below(i)));
    } else {
      for (int j = 0; j < d; ++j) m(i, j) = static_cast<float>(rng.normal());
    }
  }
  std::vector<int> labels(n);
  std::iota(labels.begin(), labels.end(), 0);
  rng.shuffle(std::span<int>(labels));
  std::vector<std::string> ids, pids;
  for (int i = 0; i < n; ++i) {
    ids.push_back(fmt::format("img{:04d}", labels[i]));
    pids.push_back(fmt::format("p{:03d}", rng.below(persons)));
  }
  RandomDb out{EmbeddingDatabase(m, ids, pids, EmbeddingSource::kProjection), {}};
  for (int q = 0; q < 5; ++q) {
    std::vector<float> v(d);
    if (q < 2) {
      const auto row = out.db.row(rng.below(n));
      v.assign(row.begin(), row.end());
      for (auto& x : v) x *= 3.0f;
    } else {
      for (auto& x : v) x = static_cast<float>(rng.normal());
    }
    out.queries.push_back(v);
  }
  return out;
}

// Full sort by extended-precision cosine, then ascending id.
std::vector<std::string> oracle_topk(const EmbeddingDatabase& db, const std::vector<float>& q,
                                     int k) {
  long double qn = 0;
  for (float v : q) qn += static_cast<long double>(v) * v;
  std::vector<std::pair<long double, std::string>> scored;
  for (std::size_t i = 0; i < db.size(); ++i) {
    long double dot = 0, rn = 0;
    const auto row = db.row(i);
    for (std::size_t j = 0; j < q.size(); ++j) {
      dot += static_cast<long double>(row[j]) * q[j];
      rn += static_cast<long double>(row[j]) * row[j];
    }
    scored.emplace_back(dot / std::sqrt(qn * rn), db.image_id(i));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i) {
    out.push_back(scored[i].second);
  }
  return out;
}

TEST(Query, MatchesFullSortOracleIncludingTies) {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(200));
    const int d = 1 + static_cast<int>(rng.below(32));
    const RandomDb r = make_db(rng, n, d, 1 + n / 3);
    for (const auto& q : r.queries) {
      for (int k : {1, 3, 10, n, n + 5}) {
        const QueryResult got = query(r.db, q, k);
        std::vector<std::string> ids;
        for (const auto& h : got.hits) ids.push_back(h.image_id);
        EXPECT_EQ(ids, oracle_topk(r.db, q, k)) << "trial " << trial << " k " << k;
        EXPECT_EQ(got.truncated, k > n);
      }
    }
  }
}

TEST(Query, ExactTiesGoToSmallerId) {
  FloatMatrix m(3, 2);
  m << 1, 0, 1, 0, 0, 1;
  const EmbeddingDatabase db(m, {"b", "a", "c"}, {"p1", "p2", "p3"},
                             EmbeddingSource::kProjection);
  const std::vector<float> q = {2, 0};
  const auto r = query(db, q, 2);
  ASSERT_EQ(r.hits.size(), 2u);
  EXPECT_EQ(r.hits[0].image_id, "a");
  EXPECT_EQ(r.hits[1].image_id, "b");
  EXPECT_NEAR(r.hits[0].similarity, 1.0, 1e-7);
}

TEST(Query, Preconditions) {
  FloatMatrix m(2, 2);
  m << 1, 0, 0, 1;
  const EmbeddingDatabase db(m, {"a", "b"}, {"p", "q"}, EmbeddingSource::kProjection);
  EXPECT_THROW(query(db, std::vector<float>{1, 0, 0}, 1), PreconditionError);
  EXPECT_THROW(query(db, std::vector<float>{0, 0}, 1), PreconditionError);
  EXPECT_THROW(query(db, std::vector<float>{1, 0}, 0), PreconditionError);
  EXPECT_THROW(EmbeddingDatabase(m, {"a", "a"}, {"p", "q"}, EmbeddingSource::kProjection),
               PreconditionError);
  FloatMatrix zero = FloatMatrix::Zero(1, 2);
  EXPECT_THROW(EmbeddingDatabase(zero, {"a"}, {"p"}, EmbeddingSource::kProjection),
               PreconditionError);
}

TEST(Database, RowsAreUnitNorm) {
  Rng rng(6);
  const RandomDb r = make_db(rng, 40, 9, 5);
  for (std::size_t i = 0; i < r.db.size(); ++i) {
    double n = 0;
    for (float v : r.db.row(i)) n += static_cast<double>(v) * v;
    EXPECT_NEAR(n, 1.0, 1e-6);
  }
}

TEST(Embeddings, FileRoundTripIsBitExact) {
  Rng rng(8);
  const RandomDb r = make_db(rng, 17, 5, 4);
  const auto file = testing::scratch_dir("emb_roundtrip") / "db.emb";
  write_embeddings(file, r.db, "abc123");
  std::string hash;
  const EmbeddingDatabase back = read_embeddings(file, &hash);
  EXPECT_EQ(hash, "abc123");
  EXPECT_EQ(back.image_ids(), r.db.image_ids());
  EXPECT_EQ(back.person_ids(), r.db.person_ids());
  EXPECT_EQ(back.source(), r.db.source());
  EXPECT_TRUE(back.matrix() == r.db.matrix());
}

TEST(Embeddings, TruncatedFileIsAnIoError) {
  Rng rng(8);
  const RandomDb r = make_db(rng, 10, 4, 3);
  const auto file = testing::scratch_dir("emb_truncated") / "db.emb";
  write_embeddings(file, r.db, "");
  std::filesystem::resize_file(file, std::filesystem::file_size(file) - 7);
  EXPECT_THROW(read_embeddings(file), IoError);
  EXPECT_THROW(read_embeddings(file.parent_path() / "missing.emb"), IoError);
}

TEST(Baseline, ClosedForms) {
  BaselineStats s;
  s.db_size = 100;
  s.n_persons = 100;
  s.references_of_query_person = {1, 1};
  EXPECT_NEAR(random_baseline(Protocol::kSingleRef, s, 1), 0.01, 1e-15);
  EXPECT_NEAR(random_baseline(Protocol::kSingleRef, s, 10), 0.10, 1e-15);
  EXPECT_NEAR(random_baseline(Protocol::kSingleRef, s, 1000), 1.0, 1e-15);
  // One of M=60 entries belongs to the person: k/M.
  s.db_size = 60;
  s.n_persons = 10;
  s.references_of_query_person = {1};
  EXPECT_NEAR(random_baseline(Protocol::kFullRef, s, 6), 0.1, 1e-12);
  // Six of 60: 1 - C(54,1)/C(60,1) at k=1.
  s.references_of_query_person = {6};
  EXPECT_NEAR(random_baseline(Protocol::kFullRef, s, 1), 0.1, 1e-12);
  EXPECT_NEAR(random_baseline(Protocol::kFullRef, s, 2), 1.0 - (54.0 / 60) * (53.0 / 59), 1e-12);
  EXPECT_NEAR(random_baseline(Protocol::kFewRef, s, 60), 1.0, 1e-12);
}

TEST(Baseline, MatchesMonteCarlo) {
  BaselineStats s;
  s.db_size = 30;
  s.n_persons = 6;
  s.references_of_query_person = {5, 3, 1};
  Rng rng(5);
  std::vector<int> order(30);
  for (int k : {1, 4}) {
    double hits = 0;
    const int trials = 40000;
    for (int t = 0; t < trials; ++t) {
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<int>(order));
      for (std::size_t m : s.references_of_query_person) {
        bool hit = false;
        for (int i = 0; i < k; ++i) hit = hit || order[i] < static_cast<int>(m);
        hits += hit;
      }
    }
    const double mc = hits / (trials * 3.0);
    EXPECT_NEAR(random_baseline(Protocol::kFullRef, s, k), mc, 0.01) << "k=" << k;
  }
}

Manifest random_split_manifest(Rng& rng) {
  const int persons = 2 + static_cast<int>(rng.below(15));
  Manifest m;
  for (int p = 0; p < persons; ++p) {
    const int originals = 1 + static_cast<int>(rng.below(9));
    const int augmented = 1 + static_cast<int>(rng.below(4));
    const std::string person = fmt::format("p{:02d}", p);
    for (int i = 0; i < originals; ++i) {
      ImageRecord r;
      r.image_id = fmt::format("{}_{}", person, i);
      r.person_id = person;
      r.split = Split::kTest;
      r.path = r.image_id;
      m.records.push_back(r);
    }
    for (int i = 0; i < augmented; ++i) {
      ImageRecord r;
      r.image_id = fmt::format("{}_{}_aug", person, i);
      r.person_id = person;
      r.variant = Variant::kAugmented;
      r.base_image_id = fmt::format("{}_{}", person, i % originals);
      r.conditioning = ConditioningSet{Condition::kSegmentation};
      r.split = Split::kTest;
      r.path = r.image_id;
      m.records.push_back(r);
    }
  }
  return m;
}

EmbeddingDatabase random_embeddings(const Manifest& m, int d, Rng& rng) {
  FloatMatrix x(static_cast<Eigen::Index>(m.records.size()), d);
  std::vector<std::string> ids, pids;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = static_cast<float>(rng.normal());
    ids.push_back(m.records[i].image_id);
    pids.push_back(m.records[i].person_id);
  }
  return EmbeddingDatabase(x, ids, pids, EmbeddingSource::kProjection);
}

TEST(Protocols, StructureOverRandomManifests) {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const Manifest m = random_split_manifest(rng);
    const std::size_t persons = m.person_ids().size();
    const EmbeddingDatabase all = random_embeddings(m, 8, rng);
    const std::vector<int> ks = {1, 2, 5, 10, 100};
    const auto single = evaluate_embeddings(all, m, Protocol::kSingleRef, ks, trial);
    const auto few = evaluate_embeddings(all, m, Protocol::kFewRef, ks, trial);
    const auto full = evaluate_embeddings(all, m, Protocol::kFullRef, ks, trial);
    EXPECT_EQ(single.db_size, persons);
    EXPECT_LE(few.db_size, kFewRefLimit * persons);
    std::size_t originals = 0;
    for (const auto& r : m.records) originals += r.variant == Variant::kOriginal;
    EXPECT_EQ(full.db_size, originals);
    for (const auto* rep : {&single, &few, &full}) {
      double prev = 0.0;
      for (auto [k, v] : rep->topk_accuracy) {
        EXPECT_GE(v, prev);
        EXPECT_LE(v, 1.0);
        prev = v;
      }
    }
    EXPECT_DOUBLE_EQ(single.topk_accuracy.at(100), 1.0);
  }
}

TEST(Protocols, KeyedDrawIsStableAndPerPerson) {
  Rng rng(12);
  const Manifest m = random_split_manifest(rng);
  const auto a = select_references(m, Protocol::kFewRef, 3).references;
  const auto b = select_references(m, Protocol::kFewRef, 3).references;
  EXPECT_EQ(a, b);
  std::map<std::string, int> per_person;
  for (const auto& r : a) {
    EXPECT_EQ(r.variant, Variant::kOriginal);
    ++per_person[r.person_id];
  }
  for (auto [p, n] : per_person) EXPECT_LE(n, 5);
  // Dropping one person leaves every other person's draw unchanged.
  Manifest reduced = m;
  const std::string dropped = m.records.front().person_id;
  std::erase_if(reduced.records, [&](const ImageRecord& r) { return r.person_id == dropped; });
  auto c = select_references(reduced, Protocol::kFewRef, 3).references;
  std::vector<ImageRecord> expected;
  for (const auto& r : a) {
    if (r.person_id != dropped) expected.push_back(r);
  }
  EXPECT_EQ(c, expected);
}

TEST(Protocols, PersonsWithoutOriginalsAreWarned) {
  Manifest m = testing::toy_manifest(3, 2, 1);
  for (auto& r : m.records) r.split = Split::kTest;
  std::erase_if(m.records, [](const ImageRecord& r) {
    return r.person_id == "p001" && r.variant == Variant::kOriginal;
  });
  for (auto& r : m.records) {
    if (r.person_id == "p001") r.base_image_id.reset();
  }
  const auto sel = select_references(m, Protocol::kSingleRef, 0);
  EXPECT_EQ(sel.references.size(), 2u);
  ASSERT_EQ(sel.warnings.size(), 1u);
  EXPECT_NE(sel.warnings[0].find("p001"), std::string::npos);
}

TEST(Evaluate, PerfectEmbeddingsScoreOne) {
  // Every image of person p embeds to the basis vector e_p.
  Manifest m = testing::toy_manifest(4, 3, 2);
  for (auto& r : m.records) r.split = Split::kTest;
  FloatMatrix x = FloatMatrix::Zero(static_cast<Eigen::Index>(m.records.size()), 4);
  std::vector<std::string> ids, pids;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    x(static_cast<Eigen::Index>(i), std::stoi(m.records[i].person_id.substr(1))) = 1.0f;
    ids.push_back(m.records[i].image_id);
    pids.push_back(m.records[i].person_id);
  }
  const EmbeddingDatabase all(x, ids, pids, EmbeddingSource::kFeatures);
  const auto rep = evaluate_embeddings(all, m, Protocol::kFullRef, {1}, 0);
  EXPECT_DOUBLE_EQ(rep.topk_accuracy.at(1), 1.0);
  EXPECT_EQ(rep.n_queries, 8u);
  EXPECT_NEAR(rep.random_baseline.at(1), 0.25, 1e-12);
}

TEST(Evaluate, ReportSerialization) {
  RetrievalReport r;
  r.protocol = Protocol::kSingleRef;
  r.db_size = 10;
  r.n_persons = 10;
  r.n_queries = 20;
  r.topk_accuracy = {{1, 0.5}, {10, 0.9}, {100, 1.0}};
  r.random_baseline = {{1, 0.1}, {10, 1.0}, {100, 1.0}};
  const auto j = r.to_json();
  EXPECT_EQ(j["protocol"], "single_ref");
  EXPECT_DOUBLE_EQ(j["topk_accuracy"]["10"].get<double>(), 0.9);
  const auto dir = testing::scratch_dir("report_csv");
  write_reports_csv(dir / "r.csv", {r});
  std::ifstream in(dir / "r.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace reident
