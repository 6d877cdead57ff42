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

#include "reident/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "reident/checkpoint.hpp"
#include "reident/contrastive.hpp"
#include "reident/error.hpp"
#include "reident/image.hpp"
#include "reident/retrieval.hpp"

namespace reident {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(InputKind k) {
  return k == InputKind::kRawImages ? "raw_images" : "edge_images";
}

InputKind parse_input_kind(std::string_view s) {
  if (s == "raw_images") return InputKind::kRawImages;
  if (s == "edge_images") return InputKind::kEdgeImages;
  throw PreconditionError("unknown input kind: " + std::string(s));
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw PreconditionError("batch_size must be at least 2");
  if (epochs < 1) throw PreconditionError("epochs must be at least 1");
  if (!(tau > 0)) throw PreconditionError("tau must be positive");
  if (learning_rate < 0) throw PreconditionError("learning_rate must be non-negative");
  if (optimizer != "adamw") throw PreconditionError("only the adamw optimizer is supported");
  if (rounds_per_epoch < 0) throw PreconditionError("rounds_per_epoch must be >= 0");
  if (edge_positive != Variant::kEdgeOriginal && edge_positive != Variant::kEdgeAugmented) {
    throw PreconditionError("edge_positive must be edge_original or edge_augmented");
  }
  encoder.validate();
  projection.validate();
}

PairingRule TrainConfig::pairing() const {
  if (input_kind == InputKind::kRawImages) return {Variant::kOriginal, Variant::kAugmented};
  return {Variant::kEdgeOriginal, edge_positive};
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"tau", tau},
          {"learning_rate", learning_rate},
          {"optimizer", optimizer},
          {"weight_decay", weight_decay},
          {"epochs", epochs},
          {"seed", seed},
          {"encoder", reident::to_json(encoder)},
          {"projection", reident::to_json(projection)},
          {"symmetric_loss", symmetric_loss},
          {"input_kind", to_string(input_kind)},
          {"edge_positive", to_string(edge_positive)},
          {"rounds_per_epoch", rounds_per_epoch}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  static const std::set<std::string> known = {
      "batch_size", "tau",      "learning_rate",  "optimizer",  "weight_decay",
      "epochs",     "seed",     "encoder",        "projection", "symmetric_loss",
      "input_kind", "edge_positive", "rounds_per_epoch"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw PreconditionError("unknown train config key: " + key);
  }
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.tau = j.value("tau", c.tau);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("encoder")) c.encoder = encoder_spec_from_json(j["encoder"]);
    if (j.contains("projection")) c.projection = projection_spec_from_json(j["projection"]);
    c.symmetric_loss = j.value("symmetric_loss", c.symmetric_loss);
    if (j.contains("input_kind")) c.input_kind = parse_input_kind(j["input_kind"].get<std::string>());
    if (j.contains("edge_positive")) {
      c.edge_positive = parse_variant(j["edge_positive"].get<std::string>());
    }
    c.rounds_per_epoch = j.value("rounds_per_epoch", c.rounds_per_epoch);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::hash() const {
  return fmt::format("{:016x}", derive_seed(0, to_json().dump()));
}

TrainConfig read_train_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read train config: " + file.string());
  try {
    return TrainConfig::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw PreconditionError(file.string() + ": " + e.what());
  }
}

void TrainingLog::write_csv(const fs::path& file) const {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << "step,epoch,loss,val_top1\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const bool last_of_epoch = i + 1 == steps.size() || steps[i + 1].epoch != s.epoch;
    out << s.step << ',' << s.epoch << ',' << fmt::format("{:.8f}", s.loss) << ',';
    if (last_of_epoch && s.epoch >= 1 && static_cast<std::size_t>(s.epoch) <= val_top1.size()) {
      out << fmt::format("{:.6f}", val_top1[s.epoch - 1]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + file.string());
}

namespace {

struct ValidationSet {
  std::vector<Image> reference_images;
  std::vector<std::string> reference_ids, reference_persons;
  std::vector<Image> query_images;
  std::vector<std::string> query_ids, query_persons;
};

ValidationSet make_validation_set(const Manifest& m, PairingRule rule, std::uint64_t seed,
                                  const EncoderSpec& spec) {
  std::vector<const ImageRecord*> refs, queries;
  if (rule.anchor != rule.positive) {
    std::unordered_set<std::string> ref_persons;
    for (const auto& r : m.records) {
      if (r.split == Split::kVal && r.variant == rule.anchor) {
        refs.push_back(&r);
        ref_persons.insert(r.person_id);
      }
    }
    for (const auto& r : m.records) {
      if (r.split == Split::kVal && r.variant == rule.positive && ref_persons.count(r.person_id)) {
        queries.push_back(&r);
      }
    }
  } else {
    std::map<std::string, std::vector<const ImageRecord*>> by_person;
    for (const auto& r : m.records) {
      if (r.split == Split::kVal && r.variant == rule.anchor) by_person[r.person_id].push_back(&r);
    }
    for (auto& [person, recs] : by_person) {
      if (recs.size() < 2) continue;
      Rng rng(derive_seed(seed, "validation_query/" + person));
      const std::size_t q = rng.below(recs.size());
      for (std::size_t i = 0; i < recs.size(); ++i) {
        (i == q ? queries : refs).push_back(recs[i]);
      }
    }
  }
  if (refs.empty() || queries.empty()) {
    throw PreconditionError("validation split has no usable " +
                            std::string(to_string(rule.anchor)) + "/" +
                            std::string(to_string(rule.positive)) + " images");
  }
  ValidationSet v;
  for (const ImageRecord* r : refs) {
    v.reference_images.push_back(prepare_image(load_png(r->path), spec));
    v.reference_ids.push_back(r->image_id);
    v.reference_persons.push_back(r->person_id);
  }
  for (const ImageRecord* r : queries) {
    v.query_images.push_back(prepare_image(load_png(r->path), spec));
    v.query_ids.push_back(r->image_id);
    v.query_persons.push_back(r->person_id);
  }
  return v;
}

double run_validation(Model& model, const ValidationSet& v) {
  const EmbeddingDatabase db = build_database_from_images(
      model, v.reference_images, v.reference_ids, v.reference_persons,
      EmbeddingSource::kProjection);
  const EmbeddingDatabase q = build_database_from_images(
      model, v.query_images, v.query_ids, v.query_persons, EmbeddingSource::kProjection);
  std::vector<RetrievalQuery> queries;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto row = q.row(i);
    queries.push_back({q.image_id(i), q.person_id(i), {row.begin(), row.end()}});
  }
  return evaluate_protocol(db, queries, {1}, Protocol::kFullRef).topk_accuracy.at(1);
}

// Per-channel mean and standard deviation over every pixel of the images.
void fit_normalization(Model& model, const std::vector<Image>& images) {
  const int ch = model.encoder_spec().input_channels;
  std::vector<double> sum(ch, 0.0), sq(ch, 0.0);
  double count = 0.0;
  for (const auto& img : images) {
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      sum[i % ch] += px[i];
      sq[i % ch] += static_cast<double>(px[i]) * px[i];
    }
    count += static_cast<double>(px.size()) / ch;
  }
  for (int c = 0; c < ch; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - mean * mean);
    model.channel_mean[c] = static_cast<float>(mean);
    model.channel_std[c] = static_cast<float>(var > 1e-12 ? std::sqrt(var) : 1.0);
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Manifest& m, const fs::path& out_dir,
                  const StepObserver& observer) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const PairingRule rule = cfg.pairing();
  const PairIndex index(m, rule);
  const int rounds = cfg.rounds_per_epoch > 0 ? cfg.rounds_per_epoch
                                              : EpochBatcher::default_rounds(index);
  const EpochBatcher batcher(index, cfg.batch_size, rounds);

  Model model(cfg.encoder, cfg.projection);
  model.init(cfg.seed);

  // Decode every training image once.
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<Image> cache;
  for (const auto& p : index.persons()) {
    for (const auto& list : {p.anchors, p.positives}) {
      for (std::size_t idx : list) {
        if (slot.emplace(m.records[idx].image_id, cache.size()).second) {
          cache.push_back(prepare_image(load_png(m.records[idx].path), cfg.encoder));
        }
      }
    }
  }
  fit_normalization(model, cache);
  const ValidationSet val = make_validation_set(m, rule, cfg.seed, cfg.encoder);

  std::error_code ec;
  fs::create_directories(out_dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "checkpoints").string());

  AdamW optimizer(model.parameters(), AdamW::Options{.learning_rate = cfg.learning_rate,
                                                     .weight_decay = cfg.weight_decay});
  const Temperature tau(cfg.tau);
  Rng rng(derive_seed(cfg.seed, "batches"));
  TrainingLog log;
  log.config_hash = cfg.hash();
  std::vector<fs::path> checkpoints;
  const std::size_t k = static_cast<std::size_t>(cfg.batch_size);
  std::vector<Image> batch_images(2 * k);
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::vector<PairSample>> batches;
    try {
      batches = batcher.epoch(rng);
    } catch (const PreconditionError& e) {
      throw PreconditionError(fmt::format("epoch {}: {}", epoch, e.what()));
    }
    for (const auto& batch : batches) {
      ++step;
      std::unordered_set<std::string_view> persons;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        persons.insert(batch[i].anchor.person_id);
        batch_images[i] = cache[slot.at(batch[i].anchor.image_id)];
        batch_images[k + i] = cache[slot.at(batch[i].positive.image_id)];
      }
      if (persons.size() != k) {
        throw PreconditionError(fmt::format(
            "epoch {} step {}: batch has {} distinct persons, expected {}", epoch, step,
            persons.size(), k));
      }
      model.zero_grad();
      const FloatMatrix z = model.forward_train(make_input_batch(batch_images, model));
      const RowMatrix zd = z.cast<double>();
      const auto result = nt_xent_loss_and_gradient(
          zd.topRows(static_cast<Eigen::Index>(k)), zd.bottomRows(static_cast<Eigen::Index>(k)),
          tau, cfg.symmetric_loss);
      FloatMatrix grad(z.rows(), z.cols());
      grad.topRows(static_cast<Eigen::Index>(k)) = result.grad_z.cast<float>();
      grad.bottomRows(static_cast<Eigen::Index>(k)) = result.grad_zhat.cast<float>();
      model.backward(grad);
      optimizer.step();
      log.steps.push_back({step, epoch, result.loss});
      if (observer) observer(epoch, step, result.loss);
    }
    log.val_top1.push_back(run_validation(model, val));
    log.epoch_end_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    const fs::path ckpt = out_dir / "checkpoints" / fmt::format("epoch_{:03d}.ckpt", epoch);
    save_checkpoint(ckpt, model,
                    {{"tau", cfg.tau},
                     {"config_hash", log.config_hash},
                     {"train_config", cfg.to_json()},
                     {"epoch", epoch},
                     {"val_top1", log.val_top1.back()},
                     {"pairing",
                      {{"anchor", to_string(rule.anchor)}, {"positive", to_string(rule.positive)}}}});
    checkpoints.push_back(ckpt);
  }
  return TrainResult{std::move(checkpoints), std::move(log), std::move(model)};
}

double validate(Model& model, const Manifest& m, PairingRule rule, std::uint64_t seed) {
  bool any = false;
  for (const auto& r : m.records) any = any || r.split == Split::kVal;
  if (!any) throw PreconditionError("validation split is empty");
  return run_validation(model, make_validation_set(m, rule, seed, model.encoder_spec()));
}

double validate(const fs::path& checkpoint, const Manifest& m) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  PairingRule rule;
  std::uint64_t seed = 0;
  if (ck.metadata.contains("pairing")) {
    rule.anchor = parse_variant(ck.metadata["pairing"].at("anchor").get<std::string>());
    rule.positive = parse_variant(ck.metadata["pairing"].at("positive").get<std::string>());
  }
  if (ck.metadata.contains("train_config")) {
    seed = ck.metadata["train_config"].value("seed", std::uint64_t{0});
  }
  return validate(ck.model, m, rule, seed);
}

fs::path select_best(const TrainingLog& log, const std::vector<fs::path>& checkpoints) {
  if (log.val_top1.empty() || checkpoints.empty()) {
    throw PreconditionError("select_best needs at least one completed epoch");
  }
  if (log.val_top1.size() != checkpoints.size()) {
    throw PreconditionError("validation log and checkpoint list differ in length");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.val_top1.size(); ++i) {
    if (log.val_top1[i] > log.val_top1[best]) best = i;
  }
  return checkpoints[best];
}

}  // namespace reident
