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
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "reident/dataset.hpp"
#include "test_support.hpp"

namespace reident {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { dir_ = testing::scratch_dir("cli"); }

  static CliRun run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" + REIDENT_CLI_PATH + "' " + args +
                            " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  static std::size_t lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) n += !l.empty();
    return n;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, SynthWritesDatasetAndIsDeterministic) {
  const CliRun a = run("synth --persons 50 --per-person 6 --mode edge_preserving --seed 7 --out s1");
  ASSERT_EQ(a.code, 0) << a.err;
  const Manifest m = read_manifest(dir_ / "s1" / "manifest.jsonl");
  std::size_t originals = 0, augmented = 0;
  for (const auto& r : m.records) {
    originals += r.variant == Variant::kOriginal;
    augmented += r.variant == Variant::kAugmented;
  }
  EXPECT_EQ(originals, 300u);
  EXPECT_EQ(augmented, 300u);
  EXPECT_TRUE(fs::exists(dir_ / "s1" / "synth_config.json"));
  const std::string first = slurp(dir_ / "s1" / "manifest.jsonl");
  const CliRun b = run("synth --persons 50 --per-person 6 --mode edge_preserving --seed 7 --out s1");
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(dir_ / "s1" / "manifest.jsonl"), first);
}

TEST_F(Cli, PreconditionFailuresExitWithOne) {
  const CliRun a = run("synth --persons 1 --out bad");
  EXPECT_EQ(a.code, 1);
  EXPECT_NE(a.err.find("n_persons"), std::string::npos) << a.err;
  EXPECT_EQ(run("synth --persons 5 --mode blurry --out bad").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("eval --manifest x.jsonl").code, 1);
}

TEST_F(Cli, IoFailuresExitWithTwo) {
  const CliRun a = run("split --manifest does_not_exist.jsonl --out x.jsonl");
  EXPECT_EQ(a.code, 2);
  EXPECT_NE(a.err.find("does_not_exist"), std::string::npos);
}

TEST_F(Cli, SplitChecksDisjointnessAndRejectsBadRatios) {
  ASSERT_EQ(run("synth --persons 12 --per-person 3 --size 32 --seed 1 --out sp").code, 0);
  const CliRun a = run("split --manifest sp/manifest.jsonl --out sp/split.jsonl --seed 3");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("person-disjoint check passed"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "sp" / "split_config.json"));
  const CliRun o = run(
      "split --manifest sp/manifest.jsonl --out sp/overlap.jsonl --mode person_overlapping "
      "--ratios 0.5,0,0.5");
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(run("split --manifest sp/manifest.jsonl --out sp/x.jsonl --ratios 0.9,0.9,0.1").code,
            1);
}

TEST_F(Cli, ManifestScansImageDirectory) {
  ASSERT_EQ(run("synth --persons 4 --per-person 2 --size 32 --seed 2 --out scan").code, 0);
  const CliRun a = run("manifest --root scan/images --out scan/scanned.jsonl");
  ASSERT_EQ(a.code, 0) << a.err;
  const Manifest scanned = read_manifest(dir_ / "scan" / "scanned.jsonl");
  EXPECT_EQ(scanned.records.size(), 16u);
  EXPECT_EQ(scanned.person_ids().size(), 4u);
  fs::create_directories(dir_ / "empty_dir");
  EXPECT_EQ(run("manifest --root empty_dir --out scan/none.jsonl").code, 1);
}

TEST_F(Cli, EdgesAppendRecordsAndFallBackWithWarning) {
  ASSERT_EQ(run("synth --persons 4 --per-person 2 --size 32 --out ed").code, 0);
  const CliRun a = run("edges --manifest ed/manifest.jsonl --out ed/canny.jsonl");
  ASSERT_EQ(a.code, 0) << a.err;
  const Manifest m = read_manifest(dir_ / "ed" / "canny.jsonl");
  std::size_t edge_orig = 0;
  for (const auto& r : m.records) edge_orig += r.variant == Variant::kEdgeOriginal;
  EXPECT_EQ(edge_orig, 8u);
  EXPECT_EQ(m.records.size(), 32u);
  const std::string png = slurp(dir_ / "ed" / "edges" / "p0000_00_edge.png");
  ASSERT_EQ(run("edges --manifest ed/manifest.jsonl --out ed/canny.jsonl").code, 0);
  EXPECT_EQ(slurp(dir_ / "ed" / "edges" / "p0000_00_edge.png"), png);
  const CliRun h = run(
      "edges --manifest ed/manifest.jsonl --out ed/hed.jsonl --detector hed --image-dir ed/hed");
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_NE(h.err.find("warning"), std::string::npos);
  EXPECT_NE(h.out.find("fallback_gradient"), std::string::npos);
  const auto snapshot = nlohmann::json::parse(slurp(dir_ / "ed" / "edges_config.json"));
  EXPECT_EQ(snapshot["params"]["detector_used"], "fallback_gradient");
}

TEST_F(Cli, TrainEmbedEvalPipeline) {
  ASSERT_EQ(run("synth --persons 16 --per-person 3 --size 32 --seed 4 --out pl").code, 0);
  ASSERT_EQ(run("split --manifest pl/manifest.jsonl --out pl/split.jsonl --ratios 0.5,0.25,0.25")
                .code,
            0);
  const CliRun t = run(
      "train --manifest pl/split.jsonl --out pl/run --batch-size 4 --epochs 2 --resolution 32 "
      "--lr 1e-3 --quiet");
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir_ / "pl" / "run" / "best.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "pl" / "run" / "train_config.json"));
  {
    std::ifstream log(dir_ / "pl" / "run" / "train_log.csv");
    std::string line;
    std::getline(log, line);
    int validated = 0;
    while (std::getline(log, line)) validated += line.back() != ',';
    EXPECT_EQ(validated, 2);
  }
  const CliRun e = run("embed --checkpoint pl/run/best.ckpt --manifest pl/split.jsonl "
                    "--out pl/emb/test.emb --split test");
  ASSERT_EQ(e.code, 0) << e.err;
  const CliRun s = run("eval --embeddings pl/emb/test.emb --manifest pl/split.jsonl "
                    "--protocol single_ref --k 1,10,100 --out pl/rep/single");
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(lines(dir_ / "pl" / "rep" / "single.csv"), 4u);
  const CliRun all = run("eval --checkpoint pl/run/best.ckpt --manifest pl/split.jsonl "
                      "--out pl/rep/all --k 1,5");
  ASSERT_EQ(all.code, 0) << all.err;
  const auto j = nlohmann::json::parse(slurp(dir_ / "pl" / "rep" / "all.json"));
  ASSERT_EQ(j["reports"].size(), 3u);
  EXPECT_EQ(j["reports"][0]["protocol"], "full_ref");
  EXPECT_EQ(j["reports"][1]["protocol"], "few_ref");
  EXPECT_EQ(j["reports"][2]["protocol"], "single_ref");
  EXPECT_TRUE(fs::exists(dir_ / "pl" / "rep" / "all.config.json"));
  EXPECT_EQ(run("embed --checkpoint pl/missing.ckpt --manifest pl/split.jsonl --out x.emb").code,
            2);
}

TEST_F(Cli, EdgeSimReportsOneRowPerGroup) {
  ASSERT_EQ(run("synth --persons 4 --per-person 3 --size 32 --conditioning depth+edges --out es1")
                .code,
            0);
  ASSERT_EQ(run("synth --persons 4 --per-person 3 --size 32 --mode edge_destroying --out es2")
                .code,
            0);
  const CliRun r = run("edge-sim --manifest es1/manifest.jsonl es2/manifest.jsonl "
                    "--groups depth+edges,segmentation --out es/sim.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(dir_ / "es" / "sim.csv"), 3u);
  std::ifstream in(dir_ / "es" / "sim.csv");
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first.rfind("depth+edges,", 0), 0u);
  EXPECT_EQ(second.rfind("segmentation,", 0), 0u);
}

}  // namespace
}  // namespace reident
