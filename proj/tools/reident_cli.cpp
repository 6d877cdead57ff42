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

// reident: dataset preparation, training, embedding, retrieval evaluation
// and edge auditing. Exit codes: 0 success, 1 precondition or validation
// failure, 2 I/O failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "reident/checkpoint.hpp"
#include "reident/dataset.hpp"
#include "reident/edgeops.hpp"
#include "reident/error.hpp"
#include "reident/retrieval.hpp"
#include "reident/synthetic.hpp"
#include "reident/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reident;

namespace {

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_ks(const std::string& s) {
  std::vector<int> ks;
  for (const auto& item : split_list(s, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw PreconditionError("bad k value: " + item);
    }
  }
  if (ks.empty()) throw PreconditionError("--k needs at least one value");
  return ks;
}

SplitRatios parse_ratios(const std::string& s) {
  const auto parts = split_list(s, ',');
  if (parts.size() != 3) throw PreconditionError("--ratios needs three values train,val,test");
  SplitRatios r;
  try {
    r.train = std::stod(parts[0]);
    r.val = std::stod(parts[1]);
    r.test = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw PreconditionError("bad --ratios: " + s);
  }
  return r;
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

void write_json(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

// Resolved parameters plus input hashes, written next to the outputs.
void write_snapshot(const fs::path& file, const std::string& command, const json& params,
                    const json& inputs) {
  write_json(file, {{"command", command}, {"params", params}, {"inputs", inputs}});
}

fs::path snapshot_beside(const fs::path& output, const std::string& command) {
  return output.parent_path() / (command + "_config.json");
}

EdgeExtractor make_extractor(const std::string& detector, double low, double high,
                             const std::string& order, std::string* label) {
  EdgeExtractor ex;
  ex.canny.low = low;
  ex.canny.high = high;
  if (order == "blur_first") {
    ex.canny.order = BlurOrder::kBlurFirst;
  } else if (order == "blur_after") {
    ex.canny.order = BlurOrder::kBlurAfter;
  } else {
    throw PreconditionError("unknown blur order: " + order);
  }
  if (detector == "canny") {
    ex.detector = EdgeDetector::kCanny;
  } else if (detector == "hed") {
    std::string note;
    ex.model = EdgeModel::from_environment(&note);
    if (ex.model.is_fallback()) {
      ex.detector = EdgeDetector::kFallbackGradient;
      warn(note);
    } else {
      ex.detector = EdgeDetector::kHed;
    }
  } else {
    throw PreconditionError("unknown detector: " + detector);
  }
  *label = std::string(to_string(ex.detector));
  return ex;
}

struct SynthArgs {
  SyntheticConfig cfg;
  std::string mode = "edge_preserving";
  std::string conditioning = "depth+edges+segmentation";
  std::string out;
};

int cmd_synth(SynthArgs& a) {
  a.cfg.anonymization_mode = parse_anonymization_mode(a.mode);
  a.cfg.preserving_conditioning = ConditioningSet::parse(a.conditioning);
  const Manifest m = generate_synthetic_dataset(a.cfg, a.out);
  const json params = {{"persons", a.cfg.n_persons},
                       {"per_person", a.cfg.images_per_person},
                       {"size", a.cfg.image_size},
                       {"jitter", a.cfg.jitter},
                       {"family_size", a.cfg.family_size},
                       {"mode", a.mode},
                       {"conditioning", a.conditioning},
                       {"seed", a.cfg.seed},
                       {"out", a.out}};
  write_snapshot(fs::path(a.out) / "synth_config.json", "synth", params, json::object());
  std::cout << fmt::format("wrote {} records to {} (manifest hash {})\n", m.records.size(),
                           (fs::path(a.out) / "manifest.jsonl").string(),
                           hex(manifest_hash(m)));
  return 0;
}

struct ManifestArgs {
  std::string root, out, extensions = ".png";
};

// Scans a directory tree named by the default naming rule. Unparseable
// files are reported and skipped.
int cmd_manifest(const ManifestArgs& a) {
  NamingRule rule;
  rule.extensions = split_list(a.extensions, ',');
  const ManifestBuildResult res = build_manifest(a.root, rule);
  for (const auto& e : res.errors) std::cerr << "skipped: " << e << '\n';
  if (res.manifest.records.empty()) throw PreconditionError("no images found under " + a.root);
  write_manifest(a.out, res.manifest);
  write_snapshot(snapshot_beside(a.out, "manifest"), "manifest",
                 {{"root", a.root}, {"extensions", a.extensions}, {"out", a.out}}, json::object());
  std::cout << fmt::format("{} records, {} persons, {} skipped\n", res.manifest.records.size(),
                           res.manifest.person_ids().size(), res.errors.size());
  return 0;
}

struct SplitArgs {
  std::string manifest, out, ratios = "0.7,0.1,0.2", mode = "person_disjoint";
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a) {
  const Manifest in = read_manifest(a.manifest);
  const SplitMode mode = parse_split_mode(a.mode);
  const Manifest out = assign_splits(in, parse_ratios(a.ratios), mode, a.seed);
  out.validate();
  std::map<Split, std::set<std::string>> persons;
  std::map<Split, std::size_t> images;
  for (const auto& r : out.records) {
    persons[r.split].insert(r.person_id);
    ++images[r.split];
  }
  if (mode == SplitMode::kPersonDisjoint) {
    for (const auto& p : persons[Split::kTrain]) {
      if (persons[Split::kVal].count(p) || persons[Split::kTest].count(p)) {
        throw PreconditionError("person " + p + " crosses splits");
      }
    }
    for (const auto& p : persons[Split::kVal]) {
      if (persons[Split::kTest].count(p)) throw PreconditionError("person " + p + " crosses splits");
    }
  }
  write_manifest(a.out, out);
  write_snapshot(snapshot_beside(a.out, "split"), "split",
                 {{"ratios", a.ratios}, {"mode", a.mode}, {"seed", a.seed}, {"out", a.out}},
                 {{a.manifest, hex(manifest_hash(in))}});
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    std::cout << fmt::format("{}: {} persons, {} images\n", to_string(s), persons[s].size(),
                             images[s]);
  }
  if (mode == SplitMode::kPersonDisjoint) std::cout << "person-disjoint check passed\n";
  return 0;
}

struct EdgesArgs {
  std::string manifest, out_manifest, out_dir, detector = "canny", order = "blur_first";
  double low = 100.0, high = 200.0;
};

int cmd_edges(const EdgesArgs& a) {
  const Manifest in = read_manifest(a.manifest);
  std::string label;
  const EdgeExtractor ex = make_extractor(a.detector, a.low, a.high, a.order, &label);
  const fs::path dir = a.out_dir.empty() ? fs::path(a.out_manifest).parent_path() / "edges"
                                         : fs::path(a.out_dir);
  const EdgeDatasetResult res = derive_edge_dataset(in, ex, dir);
  write_manifest(a.out_manifest, res.manifest);
  write_snapshot(snapshot_beside(a.out_manifest, "edges"), "edges",
                 {{"detector", a.detector},
                  {"detector_used", label},
                  {"low", a.low},
                  {"high", a.high},
                  {"blur_order", a.order},
                  {"out_dir", dir.string()}},
                 {{a.manifest, hex(manifest_hash(in))}});
  std::cout << fmt::format("detector {}: {} edge_original and {} edge_augmented records\n", label,
                           res.n_edge_original, res.n_edge_augmented);
  return 0;
}

struct TrainArgs {
  std::string manifest, config, out;
  std::optional<int> batch_size, epochs, resolution, channels, rounds;
  std::optional<double> tau, lr, weight_decay;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> input_kind, edge_positive;
  bool asymmetric = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : read_train_config(a.config);
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.resolution) cfg.encoder.input_resolution = *a.resolution;
  if (a.channels) cfg.encoder.input_channels = *a.channels;
  if (a.rounds) cfg.rounds_per_epoch = *a.rounds;
  if (a.tau) cfg.tau = *a.tau;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
  if (a.seed) cfg.seed = *a.seed;
  if (a.input_kind) cfg.input_kind = parse_input_kind(*a.input_kind);
  if (a.edge_positive) cfg.edge_positive = parse_variant(*a.edge_positive);
  if (a.asymmetric) cfg.symmetric_loss = false;
  cfg.validate();
  const Manifest m = read_manifest(a.manifest);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_json(out / "train_config.json", cfg.to_json());
  write_snapshot(out / "train_snapshot.json", "train", cfg.to_json(),
                 {{a.manifest, hex(manifest_hash(m))}});
  const bool quiet = a.quiet;
  TrainResult res = train(cfg, m, out, [quiet](int epoch, int step, double loss) {
    if (!quiet && step % 10 == 0) std::cerr << fmt::format("epoch {} step {} loss {:.4f}\n", epoch, step, loss);
  });
  res.log.write_csv(out / "train_log.csv");
  const fs::path best = select_best(res.log, res.checkpoints);
  fs::copy_file(best, out / "best.ckpt", fs::copy_options::overwrite_existing);
  for (std::size_t e = 0; e < res.log.val_top1.size(); ++e) {
    std::cout << fmt::format("epoch {} val_top1 {:.4f}\n", e + 1, res.log.val_top1[e]);
  }
  std::cout << "best checkpoint: " << best.string() << '\n';
  return 0;
}

std::optional<Split> parse_split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

struct EmbedArgs {
  std::string checkpoint, manifest, out, source = "projection", split = "all";
  int batch = 64;
};

int cmd_embed(const EmbedArgs& a) {
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  const Manifest m = read_manifest(a.manifest);
  const auto split = parse_split_filter(a.split);
  std::vector<ImageRecord> records;
  for (const auto& r : m.records) {
    if (!split || r.split == *split) records.push_back(r);
  }
  if (records.empty()) throw PreconditionError("no records in split " + a.split);
  const EmbeddingDatabase db =
      build_database(ck.model, records, parse_embedding_source(a.source), a.batch);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_embeddings(a.out, db, ck.hash);
  write_snapshot(snapshot_beside(a.out, "embed"), "embed",
                 {{"source", a.source}, {"split", a.split}, {"out", a.out}},
                 {{a.checkpoint, ck.hash}, {a.manifest, hex(manifest_hash(m))}});
  std::cout << fmt::format("embedded {} images (d={})\n", db.size(), db.dim());
  return 0;
}

struct EvalArgs {
  std::string embeddings, checkpoint, manifest, out = "eval", protocol = "all", k = "1,10,100";
  std::string split = "test", reference_variant = "original", query_variant = "augmented";
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  if (a.embeddings.empty() == a.checkpoint.empty()) {
    throw PreconditionError("eval needs exactly one of --embeddings or --checkpoint");
  }
  const Manifest m = read_manifest(a.manifest);
  const std::vector<int> ks = parse_ks(a.k);
  std::vector<Protocol> protocols;
  if (a.protocol == "all") {
    protocols = {Protocol::kFullRef, Protocol::kFewRef, Protocol::kSingleRef};
  } else {
    for (const auto& p : split_list(a.protocol, ',')) protocols.push_back(parse_protocol(p));
  }
  QuerySetup setup{parse_split(a.split), parse_variant(a.reference_variant),
                   parse_variant(a.query_variant)};
  json inputs = {{a.manifest, hex(manifest_hash(m))}};
  std::optional<EmbeddingDatabase> db;
  std::optional<LoadedCheckpoint> ck;
  if (!a.embeddings.empty()) {
    std::string hash;
    db = read_embeddings(a.embeddings, &hash);
    inputs[a.embeddings] = hash;
  } else {
    ck = load_checkpoint(a.checkpoint);
    inputs[a.checkpoint] = ck->hash;
  }
  std::vector<RetrievalReport> reports;
  std::vector<std::string> warnings;
  for (Protocol p : protocols) {
    std::vector<std::string>* w = reports.empty() ? &warnings : nullptr;
    reports.push_back(db ? evaluate_embeddings(*db, m, p, ks, a.seed, setup, w)
                         : evaluate_model(ck->model, m, p, ks, a.seed, setup,
                                          EmbeddingSource::kProjection, w));
  }
  for (const auto& w : warnings) warn(w);
  const fs::path prefix(a.out);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  write_reports_json(prefix.string() + ".json", reports);
  write_reports_csv(prefix.string() + ".csv", reports);
  write_snapshot(prefix.string() + ".config.json", "eval",
                 {{"protocol", a.protocol},
                  {"k", ks},
                  {"seed", a.seed},
                  {"split", a.split},
                  {"reference_variant", a.reference_variant},
                  {"query_variant", a.query_variant}},
                 inputs);
  for (const auto& r : reports) {
    for (auto [k, v] : r.topk_accuracy) {
      std::cout << fmt::format("{} top-{}: {:.4f} (random {:.4f}, db {}, queries {})\n",
                               to_string(r.protocol), k, v, r.random_baseline.at(k), r.db_size,
                               r.n_queries);
    }
  }
  return 0;
}

struct EdgeSimArgs {
  std::vector<std::string> manifests;
  std::string groups, out = "edge_similarity.csv", detector = "canny", order = "blur_first";
  double low = 100.0, high = 200.0;
};

int cmd_edge_sim(const EdgeSimArgs& a) {
  std::string label;
  const EdgeExtractor ex = make_extractor(a.detector, a.low, a.high, a.order, &label);
  std::vector<ConditioningSet> wanted;
  for (const auto& g : split_list(a.groups, ',')) wanted.push_back(ConditioningSet::parse(g));
  std::map<ConditioningSet, EdgePairGroup> by_label;
  json inputs = json::object();
  for (const auto& file : a.manifests) {
    const Manifest m = read_manifest(file);
    inputs[file] = hex(manifest_hash(m));
    for (const auto& r : m.records) {
      if (r.variant != Variant::kAugmented || !r.base_image_id) continue;
      if (!wanted.empty() &&
          std::find(wanted.begin(), wanted.end(), r.conditioning) == wanted.end()) {
        continue;
      }
      const ImageRecord* base = m.find(*r.base_image_id);
      if (!base) throw PreconditionError("base image " + *r.base_image_id + " not in " + file);
      auto& group = by_label[r.conditioning];
      group.conditioning = r.conditioning;
      group.pairs.emplace_back(load_png(base->path), load_png(r.path));
    }
  }
  std::vector<EdgePairGroup> groups;
  if (wanted.empty()) {
    for (auto& [_, g] : by_label) groups.push_back(std::move(g));
  } else {
    for (const auto& c : wanted) {
      EdgePairGroup g{c, {}};
      if (auto it = by_label.find(c); it != by_label.end()) g = std::move(it->second);
      groups.push_back(std::move(g));
    }
  }
  std::vector<std::string> warnings;
  const auto rows = edge_similarity_report(groups, ex, &warnings);
  for (const auto& w : warnings) warn(w);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_edge_similarity_csv(a.out, rows);
  write_snapshot(snapshot_beside(fs::absolute(a.out), "edge_sim"), "edge-sim",
                 {{"groups", a.groups},
                  {"detector", a.detector},
                  {"detector_used", label},
                  {"low", a.low},
                  {"high", a.high},
                  {"blur_order", a.order}},
                 inputs);
  for (const auto& r : rows) {
    std::cout << fmt::format("{}: ssim {:.4f} l1 {:.4f} ({} pairs)\n", r.conditioning.label(),
                             r.ssim, r.l1, r.n_pairs);
  }
  return 0;
}

void add_edge_options(CLI::App* c, std::string& detector, double& low, double& high,
                      std::string& order) {
  c->add_option("--detector", detector, "canny or hed")->capture_default_str();
  c->add_option("--low", low, "Canny low threshold")->capture_default_str();
  c->add_option("--high", high, "Canny high threshold")->capture_default_str();
  c->add_option("--blur-order", order, "blur_first or blur_after")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Re-identification attacks on anonymized person images"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  c_synth->add_option("--persons", synth.cfg.n_persons)->capture_default_str();
  c_synth->add_option("--per-person", synth.cfg.images_per_person)->capture_default_str();
  c_synth->add_option("--size", synth.cfg.image_size)->capture_default_str();
  c_synth->add_option("--jitter", synth.cfg.jitter)->capture_default_str();
  c_synth->add_option("--family-size", synth.cfg.family_size)->capture_default_str();
  c_synth->add_option("--mode", synth.mode, "edge_preserving or edge_destroying")
      ->capture_default_str();
  c_synth->add_option("--conditioning", synth.conditioning,
                      "label of edge-preserving anonymized images")
      ->capture_default_str();
  c_synth->add_option("--seed", synth.cfg.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out, "output directory")->required();

  ManifestArgs man;
  auto* c_man = app.add_subcommand("manifest", "build a manifest from a directory of images");
  c_man->add_option("--root", man.root, "image directory")->required();
  c_man->add_option("--out", man.out, "output manifest")->required();
  c_man->add_option("--extensions", man.extensions, "comma-separated")->capture_default_str();

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "assign train/val/test splits");
  c_split->add_option("--manifest", split.manifest)->required();
  c_split->add_option("--out", split.out, "output manifest")->required();
  c_split->add_option("--ratios", split.ratios)->capture_default_str();
  c_split->add_option("--mode", split.mode, "person_disjoint or person_overlapping")
      ->capture_default_str();
  c_split->add_option("--seed", split.seed)->capture_default_str();

  EdgesArgs edges;
  auto* c_edges = app.add_subcommand("edges", "derive edge images");
  c_edges->add_option("--manifest", edges.manifest)->required();
  c_edges->add_option("--out", edges.out_manifest, "output manifest")->required();
  c_edges->add_option("--image-dir", edges.out_dir, "edge image directory");
  add_edge_options(c_edges, edges.detector, edges.low, edges.high, edges.order);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a contrastive attack model");
  c_train->add_option("--manifest", tr.manifest)->required();
  c_train->add_option("--config", tr.config, "JSON train config");
  c_train->add_option("--out", tr.out, "run directory")->required();
  c_train->add_option("--batch-size", tr.batch_size);
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--resolution", tr.resolution);
  c_train->add_option("--channels", tr.channels);
  c_train->add_option("--rounds-per-epoch", tr.rounds);
  c_train->add_option("--tau", tr.tau);
  c_train->add_option("--lr", tr.lr);
  c_train->add_option("--weight-decay", tr.weight_decay);
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--input-kind", tr.input_kind, "raw_images or edge_images");
  c_train->add_option("--edge-positive", tr.edge_positive, "edge_original or edge_augmented");
  c_train->add_flag("--asymmetric-loss", tr.asymmetric);
  c_train->add_flag("--quiet", tr.quiet);

  EmbedArgs embed;
  auto* c_embed = app.add_subcommand("embed", "embed manifest images");
  c_embed->add_option("--checkpoint", embed.checkpoint)->required();
  c_embed->add_option("--manifest", embed.manifest)->required();
  c_embed->add_option("--out", embed.out)->required();
  c_embed->add_option("--source", embed.source, "projection or features")->capture_default_str();
  c_embed->add_option("--split", embed.split, "train, val, test or all")->capture_default_str();
  c_embed->add_option("--batch", embed.batch)->capture_default_str();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "top-k retrieval evaluation");
  c_eval->add_option("--embeddings", ev.embeddings);
  c_eval->add_option("--checkpoint", ev.checkpoint);
  c_eval->add_option("--manifest", ev.manifest)->required();
  c_eval->add_option("--protocol", ev.protocol, "full_ref, few_ref, single_ref or all")
      ->capture_default_str();
  c_eval->add_option("--k", ev.k)->capture_default_str();
  c_eval->add_option("--seed", ev.seed)->capture_default_str();
  c_eval->add_option("--split", ev.split)->capture_default_str();
  c_eval->add_option("--reference-variant", ev.reference_variant)->capture_default_str();
  c_eval->add_option("--query-variant", ev.query_variant)->capture_default_str();
  c_eval->add_option("--out", ev.out, "output prefix for .json and .csv")->capture_default_str();

  EdgeSimArgs es;
  auto* c_es = app.add_subcommand("edge-sim", "edge similarity per conditioning group");
  c_es->add_option("--manifest", es.manifests)->required();
  c_es->add_option("--groups", es.groups, "comma-separated conditioning labels");
  c_es->add_option("--out", es.out)->capture_default_str();
  add_edge_options(c_es, es.detector, es.low, es.high, es.order);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_man) return cmd_manifest(man);
    if (*c_split) return cmd_split(split);
    if (*c_edges) return cmd_edges(edges);
    if (*c_train) return cmd_train(tr);
    if (*c_embed) return cmd_embed(embed);
    if (*c_eval) return cmd_eval(ev);
    if (*c_es) return cmd_edge_sim(es);
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
