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

#ifndef REIDENT_TRAINER_HPP_
#define REIDENT_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reident/dataset.hpp"
#include "reident/encoder.hpp"

namespace reident {

enum class InputKind { kRawImages, kEdgeImages };

std::string_view to_string(InputKind k);
InputKind parse_input_kind(std::string_view s);

struct TrainConfig {
  int batch_size = 32;
  double tau = 0.05;
  double learning_rate = 1e-4;
  std::string optimizer = "adamw";
  double weight_decay = 1e-2;
  int epochs = 10;
  std::uint64_t seed = 0;
  EncoderSpec encoder;
  ProjectionSpec projection;
  bool symmetric_loss = true;
  InputKind input_kind = InputKind::kRawImages;
  // Edge training pairs edge originals with other edge originals (the
  // black-box setting) unless this is edge_augmented.
  Variant edge_positive = Variant::kEdgeOriginal;
  // Rounds of person shuffling per epoch; 0 picks one round per anchor image
  // of the average person.
  int rounds_per_epoch = 0;

  void validate() const;
  PairingRule pairing() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

TrainConfig read_train_config(const std::filesystem::path& file);

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct TrainingLog {
  std::vector<StepRecord> steps;
  std::vector<double> val_top1;         // one entry per epoch
  std::vector<double> epoch_end_seconds;  // wall clock since training start
  std::string config_hash;

  // Columns step, epoch, loss, val_top1; val_top1 is filled on the last step
  // of each epoch.
  void write_csv(const std::filesystem::path& file) const;
};

struct TrainResult {
  std::vector<std::filesystem::path> checkpoints;  // one per epoch
  TrainingLog log;
  Model final_model;
};

// Called after every optimizer step with (epoch, step, loss).
using StepObserver = std::function<void(int, int, double)>;

// Trains on the manifest's train split, validating on the val split after
// every epoch and writing out_dir/checkpoints/epoch_NNN.ckpt. The backend is
// single-threaded, so repeated runs with one config are bitwise identical.
TrainResult train(const TrainConfig& cfg, const Manifest& m,
                  const std::filesystem::path& out_dir,
                  const StepObserver& observer = {});

// Full-Ref top-1 on the val split. With cross-variant pairing, queries are
// the positive-variant images and references the anchor-variant images.
// With same-variant pairing (black-box edge training) no anonymized image
// is used: one keyed-draw image per person is the query and the person's
// remaining images join the references.
double validate(Model& model, const Manifest& m, PairingRule rule,
                std::uint64_t seed = 0);
double validate(const std::filesystem::path& checkpoint, const Manifest& m);

// Argmax of the validation metric; ties go to the earliest epoch.
std::filesystem::path select_best(const TrainingLog& log,
                                  const std::vector<std::filesystem::path>& checkpoints);

}  // namespace reident

#endif  // REIDENT_TRAINER_HPP_
