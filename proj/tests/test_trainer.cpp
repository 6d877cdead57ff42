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

#include "reident/checkpoint.hpp"
#include "reident/edgeops.hpp"
#include "reident/error.hpp"
#include "reident/synthetic.hpp"
#include "reident/trainer.hpp"
#include "test_support.hpp"

namespace reident {
namespace {

namespace fs = std::filesystem;

Manifest small_dataset(const fs::path& dir, int persons = 16) {
  SyntheticConfig cfg;
  cfg.n_persons = persons;
  cfg.images_per_person = 3;
  cfg.image_size = 32;
  cfg.seed = 2;
  return assign_splits(generate_synthetic_dataset(cfg, dir), {0.6, 0.2, 0.2},
                       SplitMode::kPersonDisjoint, 1);
}

TrainConfig small_config() {
  TrainConfig c;
  c.batch_size = 4;
  c.epochs = 2;
  c.learning_rate = 1e-3;
  c.encoder.feature_dim = 32;
  c.encoder.input_resolution = 32;
  c.projection = {32, 16};
  c.seed = 5;
  return c;
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = small_config();
  c.input_kind = InputKind::kEdgeImages;
  c.edge_positive = Variant::kEdgeAugmented;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_NE(small_config().hash(), c.hash());
  EXPECT_EQ(back.pairing().anchor, Variant::kEdgeOriginal);
  EXPECT_EQ(back.pairing().positive, Variant::kEdgeAugmented);
  EXPECT_THROW(TrainConfig::from_json({{"batch", 4}}), PreconditionError);
  EXPECT_THROW(TrainConfig::from_json({{"tau", -1.0}}), PreconditionError);
  EXPECT_THROW(TrainConfig::from_json({{"optimizer", "sgd"}}), PreconditionError);
  EXPECT_THROW(TrainConfig::from_json({{"batch_size", 1}}), PreconditionError);
  EXPECT_THROW(TrainConfig::from_json({{"edge_positive", "original"}}), PreconditionError);
  const TrainConfig defaults;
  EXPECT_EQ(defaults.batch_size, 32);
  EXPECT_DOUBLE_EQ(defaults.tau, 0.05);
  EXPECT_DOUBLE_EQ(defaults.learning_rate, 1e-4);
  EXPECT_EQ(defaults.optimizer, "adamw");
}

TEST(TrainConfig, ReadsFile) {
  const auto dir = testing::scratch_dir("train_cfg");
  std::ofstream(dir / "c.json") << "{\"tau\": 0.5, \"epochs\": 3}";
  const TrainConfig c = read_train_config(dir / "c.json");
  EXPECT_DOUBLE_EQ(c.tau, 0.5);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_THROW(read_train_config(dir / "missing.json"), IoError);
  std::ofstream(dir / "bad.json") << "{tau";
  EXPECT_THROW(read_train_config(dir / "bad.json"), PreconditionError);
}

TEST(Train, WritesCheckpointsAndIsBitwiseRepeatable) {
  const auto dir = testing::scratch_dir("train_repeat");
  const Manifest m = small_dataset(dir / "data");
  const TrainConfig cfg = small_config();
  int observed = 0;
  const TrainResult a = train(cfg, m, dir / "run_a", [&](int, int, double) { ++observed; });
  const TrainResult b = train(cfg, m, dir / "run_b");
  ASSERT_EQ(a.checkpoints.size(), 2u);
  EXPECT_EQ(a.checkpoints[0].filename(), "epoch_001.ckpt");
  EXPECT_EQ(observed, static_cast<int>(a.log.steps.size()));
  ASSERT_EQ(a.log.steps.size(), b.log.steps.size());
  for (std::size_t i = 0; i < a.log.steps.size(); ++i) {
    EXPECT_EQ(a.log.steps[i].loss, b.log.steps[i].loss);
  }
  EXPECT_EQ(a.log.val_top1, b.log.val_top1);
  for (std::size_t e = 0; e < 2; ++e) {
    const auto ca = load_checkpoint(a.checkpoints[e]), cb = load_checkpoint(b.checkpoints[e]);
    EXPECT_EQ(ca.hash, cb.hash);
    EXPECT_EQ(ca.metadata["epoch"], static_cast<int>(e) + 1);
    EXPECT_DOUBLE_EQ(ca.metadata["tau"].get<double>(), cfg.tau);
    EXPECT_EQ(ca.metadata["config_hash"], cfg.hash());
    EXPECT_EQ(ca.metadata["pairing"]["positive"], "augmented");
    EXPECT_DOUBLE_EQ(validate(a.checkpoints[e], m), a.log.val_top1[e]);
  }
  a.log.write_csv(dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step,epoch,loss,val_top1");
}

TEST(Train, LossFallsOnLearnableData) {
  const auto dir = testing::scratch_dir("train_loss");
  const Manifest m = small_dataset(dir / "data", 24);
  TrainConfig cfg = small_config();
  cfg.epochs = 8;
  cfg.tau = 0.1;
  const TrainResult r = train(cfg, m, dir / "run");
  double first = 0, last = 0;
  int nf = 0, nl = 0;
  for (const auto& s : r.log.steps) {
    if (s.epoch == 1) first += s.loss, ++nf;
    if (s.epoch == cfg.epochs) last += s.loss, ++nl;
  }
  EXPECT_LT(last / nl, first / nf);
}

TEST(Train, EdgeImagesWithSameVariantPairs) {
  const auto dir = testing::scratch_dir("train_edges");
  const Manifest m = small_dataset(dir / "data");
  const Manifest e = derive_edge_dataset(m, EdgeExtractor{}, dir / "edges").manifest;
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.input_kind = InputKind::kEdgeImages;
  const TrainResult r = train(cfg, e, dir / "run");
  EXPECT_EQ(r.log.val_top1.size(), 1u);
  const auto ck = load_checkpoint(r.checkpoints[0]);
  EXPECT_EQ(ck.metadata["pairing"]["anchor"], "edge_original");
  EXPECT_EQ(ck.metadata["pairing"]["positive"], "edge_original");
}

TEST(Train, PreconditionsNameTheProblem) {
  const auto dir = testing::scratch_dir("train_errors");
  const Manifest m = small_dataset(dir / "data");
  TrainConfig cfg = small_config();
  cfg.batch_size = 40;
  EXPECT_THROW(train(cfg, m, dir / "run"), PreconditionError);
  cfg = small_config();
  cfg.input_kind = InputKind::kEdgeImages;
  EXPECT_THROW(train(cfg, m, dir / "run"), PreconditionError);
  Manifest no_val = m;
  for (auto& r : no_val.records) {
    if (r.split == Split::kVal) r.split = Split::kTest;
  }
  EXPECT_THROW(train(small_config(), no_val, dir / "run"), PreconditionError);
}

TEST(SelectBest, ArgmaxWithEarliestTie) {
  TrainingLog log;
  log.val_top1 = {0.2, 0.6, 0.6, 0.4};
  const std::vector<fs::path> ck = {"e1", "e2", "e3", "e4"};
  EXPECT_EQ(select_best(log, ck), "e2");
  log.val_top1 = {0.1};
  EXPECT_THROW(select_best(log, ck), PreconditionError);
  EXPECT_THROW(select_best(TrainingLog{}, {}), PreconditionError);
}

}  // namespace
}  // namespace reident
