// Copyright 2026 The LVC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "lvc/cli.hpp"

#include <filesystem>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lvc/ablation.hpp"
#include "lvc/corrector.hpp"
#include "lvc/datamodel.hpp"
#include "lvc/errors.hpp"
#include "lvc/evaluator.hpp"
#include "lvc/json_io.hpp"
#include "lvc/manifest.hpp"
#include "lvc/retrain_prep.hpp"
#include "lvc/sourcing.hpp"
#include "lvc/synthworld.hpp"
#include "lvc/verifier.hpp"

namespace lvc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// A world, its detector noise and the seed that regenerates both.
struct WorldSpec {
  WorldConfig config;
  DetectorNoise noise;
  std::uint64_t seed = 0;

  json to_json() const {
    return {{"config", config.to_json()}, {"noise", noise.to_json()}, {"seed", seed}};
  }
  static WorldSpec from_json(const json& j) {
    if (!j.is_object() || !j.contains("config") || !j.contains("seed")) {
      throw ConfigError("world spec needs 'config' and 'seed'");
    }
    WorldSpec s;
    s.config = WorldConfig::from_json(j["config"]);
    if (j.contains("noise")) s.noise = DetectorNoise::from_json(j["noise"]);
    if (!j["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
    return s;
  }
};

WorldSpec load_world_spec(const fs::path& p) { return WorldSpec::from_json(json_io::read_file(p)); }

// Outputs must never overwrite an input.
void check_outputs(const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  for (const fs::path& o : outputs) {
    const fs::path co = fs::weakly_canonical(o);
    for (const fs::path& i : inputs) {
      if (!i.empty() && fs::weakly_canonical(i) == co) {
        throw ConfigError("output " + o.string() + " would overwrite input " + i.string());
      }
    }
  }
}

void ensure_parent(const fs::path& p) {
  const fs::path parent = p.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

fs::path run_manifest_path(const fs::path& primary) {
  return fs::path(primary.string() + ".run.json");
}

void write_manifest(const std::string& command, const json& config,
                    std::optional<std::uint64_t> seed, std::vector<fs::path> artifacts,
                    const fs::path& path) {
  RunManifest m;
  m.command = command;
  m.config = config;
  m.seed = seed;
  m.artifacts = std::move(artifacts);
  m.write(path);
}

std::vector<fs::path> embedding_files(const EmbeddingPaths& p) { return {p.data, p.manifest}; }

EmbeddingMatrix load_embedding_spec(const std::string& spec) {
  const EmbeddingPaths p = EmbeddingPaths::parse(spec);
  return load_embeddings(p.data, p.manifest);
}

Dataset with_annotations(const Dataset& like, std::vector<Annotation> anns) {
  Dataset d;
  d.images = like.images;
  d.categories = like.categories;
  d.annotations = std::move(anns);
  return d;
}

std::vector<Detection> novel_only(const std::vector<Detection>& dets, const FewShotSplit* split) {
  if (split == nullptr) return dets;
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    if (split->is_novel(d.category)) out.push_back(d);
  }
  return out;
}

FeatureProvider oracle_from_world(const fs::path& spec_path, std::unique_ptr<WorldTruth>& world,
                                  std::unique_ptr<SimulatedDetections>& sim) {
  const WorldSpec spec = load_world_spec(spec_path);
  world = std::make_unique<WorldTruth>(generate_world(spec.config, spec.seed));
  sim = std::make_unique<SimulatedDetections>(
      simulate_detector(*world, spec.noise, spec.seed, ImageSet::kTrain));
  return oracle_provider(*world, *sim);
}

std::vector<Detection> apply_correction(const CascadeRegressor& model,
                                        const std::vector<Detection>& dets,
                                        const FeatureProvider& fp, const Dataset& images,
                                        std::size_t* collapsed) {
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    auto it = images.images.find(d.image_id);
    if (it == images.images.end()) {
      throw IntegrityError("detection " + std::to_string(to_int(d.id)) +
                           " refers to unknown image " + std::to_string(to_int(d.image_id)));
    }
    const CorrectionResult r = correct(model, d, fp, it->second);
    if (r.collapsed && collapsed != nullptr) ++*collapsed;
    Detection c = d;
    c.box = r.box;
    out.push_back(c);
  }
  return out;
}

json load_json_or_empty(const std::string& path) {
  return path.empty() ? json::object() : json_io::read_file(path);
}

// Combined experiment file {"world", "noise", "params"} or a bare world config.
struct Experiment {
  WorldConfig world;
  DetectorNoise noise;
  PseudoLabelParams params;
  json to_json() const {
    return {{"world", world.to_json()}, {"noise", noise.to_json()}, {"params", params.to_json()}};
  }
};

Experiment load_experiment(const std::string& config, const std::string& noise,
                           const std::string& params) {
  Experiment e;
  const json c = json_io::read_file(config);
  if (c.is_object() && c.contains("world")) {
    for (const auto& [key, v] : c.items()) {
      if (key == "world") e.world = WorldConfig::from_json(v);
      else if (key == "noise") e.noise = DetectorNoise::from_json(v);
      else if (key == "params") e.params = PseudoLabelParams::from_json(v);
      else throw ConfigError("experiment config: unknown key '" + key + "'");
    }
  } else {
    e.world = WorldConfig::from_json(c);
  }
  if (!noise.empty()) e.noise = DetectorNoise::from_json(json_io::read_file(noise));
  if (!params.empty()) e.params = PseudoLabelParams::from_json(json_io::read_file(params));
  e.noise.validate(e.world.n_classes());
  return e;
}

// ---------------------------------------------------------------------------
// Pipeline configuration. Relative paths resolve against the config file.

struct PipelineConfig {
  fs::path dataset;
  fs::path split;
  fs::path detections;
  std::string shot_embeddings;
  std::string detection_embeddings;
  fs::path corrector_model;
  fs::path corrector_pairs;
  std::string features;
  fs::path oracle_world;
  fs::path world;  // enables the ablation report
  fs::path eval_gt;
  PseudoLabelParams params;
  EvalOptions eval;
  std::optional<std::uint64_t> seed;
  fs::path out_dir;

  json to_json() const {
    auto s = [](const fs::path& p) { return p.empty() ? json(nullptr) : json(p.string()); };
    auto t = [](const std::string& p) { return p.empty() ? json(nullptr) : json(p); };
    return {{"dataset", s(dataset)},
            {"split", s(split)},
            {"detections", s(detections)},
            {"shot_embeddings", t(shot_embeddings)},
            {"detection_embeddings", t(detection_embeddings)},
            {"corrector_model", s(corrector_model)},
            {"corrector_pairs", s(corrector_pairs)},
            {"features", t(features)},
            {"oracle", s(oracle_world)},
            {"world", s(world)},
            {"eval_gt", s(eval_gt)},
            {"params", params.to_json()},
            {"evaluator", {{"max_dets", eval.max_dets}}},
            {"seed", seed ? json(*seed) : json(nullptr)},
            {"out_dir", s(out_dir)}};
  }
};

std::string resolve_spec(const fs::path& base, const std::string& spec) {
  // Embedding specs may be "name" or "data,manifest".
  const auto comma = spec.find(',');
  auto one = [&](const std::string& p) {
    const fs::path q(p);
    return (q.is_absolute() ? q : base / q).lexically_normal().string();
  };
  if (comma == std::string::npos) return one(spec);
  return one(spec.substr(0, comma)) + "," + one(spec.substr(comma + 1));
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  const json j = json_io::read_file(path);
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  const fs::path base = path.parent_path();
  auto path_of = [&](const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a path string");
    const fs::path p(v.get<std::string>());
    return (p.is_absolute() ? p : base / p).lexically_normal();
  };
  auto spec_of = [&](const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a path string");
    return resolve_spec(base, v.get<std::string>());
  };
  PipelineConfig c;
  json params = json::object();
  for (const auto& [key, v] : j.items()) {
    if (v.is_null()) continue;
    if (key == "dataset") c.dataset = path_of(v, key);
    else if (key == "split") c.split = path_of(v, key);
    else if (key == "detections") c.detections = path_of(v, key);
    else if (key == "shot_embeddings") c.shot_embeddings = spec_of(v, key);
    else if (key == "detection_embeddings") c.detection_embeddings = spec_of(v, key);
    else if (key == "corrector_model") c.corrector_model = path_of(v, key);
    else if (key == "corrector_pairs") c.corrector_pairs = path_of(v, key);
    else if (key == "features") c.features = spec_of(v, key);
    else if (key == "oracle") c.oracle_world = path_of(v, key);
    else if (key == "world") c.world = path_of(v, key);
    else if (key == "eval_gt") c.eval_gt = path_of(v, key);
    else if (key == "out_dir") c.out_dir = path_of(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "evaluator") {
      if (!v.is_object()) throw ConfigError("'evaluator' must be an object");
      for (const auto& [ek, ev] : v.items()) {
        if (ek != "max_dets" || !ev.is_number_integer() || ev.get<int>() < 1) {
          throw ConfigError("evaluator: only a positive 'max_dets' is supported");
        }
        c.eval.max_dets = ev.get<int>();
      }
    } else if (key == "params") {
      params = v;
    } else if (key == "q" || key == "k" || key == "per_class_cap" || key == "corrector") {
      params[key] = v;
    } else {
      throw ConfigError("pipeline config: unknown key '" + key + "'");
    }
  }
  c.params = PseudoLabelParams::from_json(params);
  return c;
}

// ---------------------------------------------------------------------------

struct Options {
  // shared
  std::string out;
  std::string split;
  std::string detections;
  std::string config;
  std::string noise;
  std::string params;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string seeds = "1..5";
  // source
  double q = kDefaultSourcingThreshold;
  std::optional<int> cap;
  // verify
  std::string candidates;
  std::string shot_emb;
  std::string cand_emb;
  std::optional<int> k;
  bool k_auto = false;
  std::string out_verified;
  std::string out_rejected;
  // train-corrector / correct
  std::vector<std::string> pairs;
  std::string hp;
  std::string model;
  std::string features;
  std::string oracle;
  std::string dataset;
  // emit / assemble
  std::string verified;
  std::string out_ignore;
  std::string base;
  std::string pseudo;
  std::string ignores;
  bool no_ignores = false;
  // eval
  int max_dets = kDefaultMaxDets;
  bool small_only = false;
  std::string proposals;
  std::vector<int> top_n;
  std::string report;
  std::string pr_dir;
  std::vector<double> pr_iou = {0.5};
  // pipeline overrides
  std::optional<double> q_override;
  std::optional<int> k_override;
};

int cmd_source(const Options& o) {
  check_outputs({o.detections, o.split}, {o.out});
  const auto dets = load_detections(o.detections);
  const FewShotSplit split = load_split(o.split);
  const CandidateSet c = source_candidates(dets, split, o.q, o.cap);
  ensure_parent(o.out);
  save_detections(c.candidates, o.out);
  write_manifest("source",
                 {{"detections", o.detections}, {"split", o.split}, {"q", o.q},
                  {"cap", o.cap ? json(*o.cap) : json(nullptr)}},
                 std::nullopt, {o.out}, run_manifest_path(o.out));
  return kExitOk;
}

int cmd_verify(const Options& o) {
  const auto shot_paths = EmbeddingPaths::parse(o.shot_emb);
  const auto cand_paths = EmbeddingPaths::parse(o.cand_emb);
  std::vector<fs::path> inputs = {o.candidates, o.split};
  for (const auto& p : embedding_files(shot_paths)) inputs.push_back(p);
  for (const auto& p : embedding_files(cand_paths)) inputs.push_back(p);
  check_outputs(inputs, {o.out_verified, o.out_rejected});

  CandidateSet cands;
  cands.candidates = load_detections(o.candidates);
  const FewShotSplit split = load_split(o.split);
  if (o.k && o.k_auto) throw ConfigError("--k and --k-auto are mutually exclusive");
  const int k = o.k.value_or(k_for_shots(split.shots));
  const KnnClassifier knn = build_knn(split, load_embedding_spec(o.shot_emb), k);
  const VerificationOutcome v = verify(cands, knn, load_embedding_spec(o.cand_emb));
  ensure_parent(o.out_verified);
  ensure_parent(o.out_rejected);
  save_verification(v, o.out_verified, o.out_rejected);
  write_manifest("verify",
                 {{"candidates", o.candidates}, {"split", o.split}, {"train_emb", o.shot_emb},
                  {"cand_emb", o.cand_emb}, {"k", k}},
                 std::nullopt, {o.out_verified, o.out_rejected},
                 run_manifest_path(o.out_verified));
  return kExitOk;
}

StagePairs merge_pairs(const std::vector<std::string>& files) {
  StagePairs all;
  for (const std::string& f : files) {
    const StagePairs p = load_train_pairs(f);
    for (std::size_t s = 0; s < all.size(); ++s) {
      all[s].insert(all[s].end(), p[s].begin(), p[s].end());
    }
  }
  return all;
}

int cmd_train_corrector(const Options& o) {
  std::vector<fs::path> inputs(o.pairs.begin(), o.pairs.end());
  inputs.push_back(o.hp);
  check_outputs(inputs, {o.out});
  TrainHyperparams hp = TrainHyperparams::from_json(load_json_or_empty(o.hp));
  if (o.seed) hp.seed = *o.seed;
  TrainingSummary summary;
  const CascadeRegressor model = train_cascade(merge_pairs(o.pairs), hp, &summary);
  ensure_parent(o.out);
  save_model(model, o.out);
  write_manifest("train-corrector",
                 {{"pairs", o.pairs}, {"hp", hp.to_json()},
                  {"final_loss", summary.final_loss}, {"pair_counts", summary.pairs}},
                 hp.seed, {o.out}, run_manifest_path(o.out));
  return kExitOk;
}

int cmd_correct(const Options& o) {
  if (o.features.empty() == o.oracle.empty()) {
    throw ConfigError("correct needs exactly one of --features or --oracle");
  }
  if (!o.features.empty() && o.dataset.empty()) {
    throw ConfigError("correct --features needs --dataset for image extents");
  }
  std::vector<fs::path> inputs = {o.model, o.candidates, o.dataset};
  if (!o.features.empty()) {
    for (const auto& p : embedding_files(EmbeddingPaths::parse(o.features))) inputs.push_back(p);
  } else {
    inputs.push_back(o.oracle);
  }
  check_outputs(inputs, {o.out});

  const CascadeRegressor model = load_model(o.model);
  const auto dets = load_detections(o.candidates);
  std::unique_ptr<WorldTruth> world;
  std::unique_ptr<SimulatedDetections> sim;
  const FeatureProvider fp = o.features.empty()
                                 ? oracle_from_world(o.oracle, world, sim)
                                 : FeatureProvider::from_embeddings(load_embedding_spec(o.features));
  Dataset images;
  if (!o.dataset.empty()) {
    images = load_dataset(o.dataset);
  } else {
    images.images = world->dataset.images;
    images.images.insert(world->test_dataset.images.begin(), world->test_dataset.images.end());
  }
  std::size_t collapsed = 0;
  const auto corrected = apply_correction(model, dets, fp, images, &collapsed);
  ensure_parent(o.out);
  save_detections(corrected, o.out);
  write_manifest("correct",
                 {{"model", o.model}, {"candidates", o.candidates}, {"dataset", o.dataset},
                  {"features", o.features}, {"oracle", o.oracle}, {"collapsed", collapsed}},
                 std::nullopt, {o.out}, run_manifest_path(o.out));
  return kExitOk;
}

int cmd_emit(const Options& o) {
  check_outputs({o.detections, o.verified, o.split}, {o.out_ignore});
  const auto dets = load_detections(o.detections);
  VerificationOutcome v;
  v.verified = load_detections(o.verified);
  std::optional<FewShotSplit> split;
  if (!o.split.empty()) split = load_split(o.split);
  const auto ignores = emit_ignore_regions(novel_only(dets, split ? &*split : nullptr), v);
  ensure_parent(o.out_ignore);
  save_annotation_list(ignores, o.out_ignore);
  write_manifest("emit", {{"detections", o.detections}, {"verified", o.verified}, {"split", o.split}},
                 std::nullopt, {o.out_ignore}, run_manifest_path(o.out_ignore));
  return kExitOk;
}

int cmd_assemble(const Options& o) {
  check_outputs({o.base, o.split, o.pseudo, o.ignores}, {o.out});
  const Dataset base = load_dataset(o.base);
  const FewShotSplit split = load_split(o.split);
  std::vector<Annotation> pseudo;
  if (!o.pseudo.empty()) pseudo = to_pseudo_annotations(load_detections(o.pseudo));
  std::vector<Annotation> ignores;
  if (!o.ignores.empty() && !o.no_ignores) ignores = load_annotation_list(o.ignores);
  const Dataset out = assemble_retrain_set(base, split, pseudo, ignores);
  ensure_parent(o.out);
  save_annotations(out, o.out);
  write_manifest("assemble",
                 {{"base", o.base}, {"split", o.split}, {"pseudo", o.pseudo},
                  {"ignore", o.no_ignores ? "" : o.ignores}},
                 std::nullopt, {o.out}, run_manifest_path(o.out));
  return kExitOk;
}

std::string iou_tag(double t) {
  return std::to_string(static_cast<int>(std::lround(t * 100.0)));
}

int cmd_eval(const Options& o) {
  check_outputs({o.dataset, o.detections, o.split, o.proposals}, {o.report});
  const Dataset gt = load_dataset(o.dataset);
  const auto dets = load_detections(o.detections);
  const FewShotSplit split = load_split(o.split);
  EvalOptions opts;
  opts.max_dets = o.max_dets;
  MetricsReport report = coco_map(dets, gt, split, opts);
  if (o.small_only) {
    EvalOptions small = opts;
    small.area = AreaRange{0.0, kSmallAreaMax};
    for (const auto& [k, v] : coco_map(dets, gt, split, small).metrics) {
      if (k.ends_with("s") && k.find('/') == std::string::npos) report.metrics[k] = v;
    }
  }
  if (!o.proposals.empty()) {
    const std::vector<int> top_n = o.top_n.empty() ? std::vector<int>{100, 1000} : o.top_n;
    add_recall_metrics(report, load_detections(o.proposals), gt, split, top_n);
  }
  std::vector<fs::path> artifacts = {o.report};
  if (!o.pr_dir.empty()) {
    // One curve per (class with ground truth, IoU threshold).
    std::error_code ec;
    fs::create_directories(o.pr_dir, ec);
    if (ec) throw IoError("cannot create " + o.pr_dir + ": " + ec.message());
    for (const ClassMetrics& c : report.classes) {
      for (double t : o.pr_iou) {
        const fs::path p = fs::path(o.pr_dir) / ("pr_" + std::to_string(to_int(c.category)) +
                                                 "_iou" + iou_tag(t) + ".csv");
        write_pr_csv(pr_curve(dets, gt.annotations, t, c.category, opts), p);
        artifacts.push_back(p);
      }
    }
  }
  ensure_parent(o.report);
  json_io::write_file(o.report, report.to_json(), 2);
  write_manifest("eval",
                 {{"dataset", o.dataset}, {"detections", o.detections}, {"split", o.split},
                  {"max_dets", o.max_dets}, {"small", o.small_only}, {"proposals", o.proposals},
                  {"top_n", o.top_n}, {"pr_iou", o.pr_iou}},
                 std::nullopt, artifacts, run_manifest_path(o.report));
  return kExitOk;
}

int cmd_simulate(const Options& o) {
  if (!o.seed) throw ConfigError("simulate needs --seed");
  const Experiment e = load_experiment(o.config, o.noise, o.params);
  const std::uint64_t seed = *o.seed;
  const fs::path dir = o.out_dir;
  check_outputs({o.config, o.noise, o.params}, {dir / "world_spec.json"});
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const WorldTruth world = generate_world(e.world, seed);
  const FewShotSplit split =
      make_few_shot_split(world.dataset, world.novel_categories(), e.world.shots, seed);
  const SimulatedDetections train = simulate_detector(world, e.noise, seed, ImageSet::kTrain);
  const SimulatedDetections test = simulate_detector(world, e.noise, seed, ImageSet::kTest);

  // The observable training set: base annotations and the K shots.
  std::vector<Annotation> observed;
  std::vector<std::string> keys;
  std::vector<float> values;
  auto keep_embedding = [&](AnnotationId id) {
    keys.push_back(embedding_key(id));
    const auto row = world.true_embeddings.at(embedding_key(id));
    values.insert(values.end(), row.begin(), row.end());
  };
  for (const Annotation& a : world.dataset.annotations) {
    if (split.is_base(a.category)) {
      observed.push_back(a);
      keep_embedding(a.id);
    }
  }
  for (const Annotation& a : split.novel_annotations) {
    observed.push_back(a);
    keep_embedding(a.id);
  }
  const EmbeddingMatrix train_emb(e.world.emb_dim, std::move(keys), std::move(values));

  WorldSpec spec{e.world, e.noise, seed};
  const std::vector<fs::path> artifacts = {
      dir / "world_spec.json",      dir / "dataset.json",
      dir / "test_dataset.json",    dir / "split.json",
      dir / "detections.json",      dir / "test_detections.json",
      dir / "train_emb.f32",        dir / "train_emb.manifest.json",
      dir / "det_emb.f32",          dir / "det_emb.manifest.json",
      dir / "corrector_pairs.json", dir / "truth.jsonl",
      dir / "train_truth.json",     dir / "pipeline.json"};
  json_io::write_file(artifacts[0], spec.to_json(), 2);
  save_annotations(with_annotations(world.dataset, observed), artifacts[1]);
  save_annotations(world.test_dataset, artifacts[2]);
  save_split(split, artifacts[3]);
  save_detections(train.detections, artifacts[4]);
  save_detections(test.detections, artifacts[5]);
  save_embeddings(train_emb, artifacts[6], artifacts[7]);
  save_embeddings(train.embeddings, artifacts[8], artifacts[9]);
  save_train_pairs(corrector_training_pairs(world, split, e.params, seed), artifacts[10]);
  write_truth_log(world, train, artifacts[11]);
  save_annotations(world.dataset, artifacts[12]);
  // Paths are relative to the output directory, which load_pipeline_config
  // resolves against.
  const json pipeline = {{"dataset", "dataset.json"},
                         {"split", "split.json"},
                         {"detections", "detections.json"},
                         {"shot_embeddings", "train_emb"},
                         {"detection_embeddings", "det_emb"},
                         {"corrector_pairs", "corrector_pairs.json"},
                         {"oracle", "world_spec.json"},
                         {"world", "world_spec.json"},
                         {"eval_gt", "train_truth.json"},
                         {"params", e.params.to_json()},
                         {"seed", seed},
                         {"out_dir", "run"}};
  json_io::write_file(artifacts[13], pipeline, 2);
  write_manifest("simulate", e.to_json(), seed, artifacts, dir / "manifest.json");
  return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  check_outputs({o.config, o.noise, o.params}, {o.out});
  const Experiment e = load_experiment(o.config, o.noise, o.params);
  std::vector<AblationResult> results;
  for (std::uint64_t seed : parse_seed_list(o.seeds)) {
    results.push_back(run_ablation(e.world, e.noise, e.params, seed));
    const AblationResult& r = results.back();
    out << "seed " << seed << ":";
    for (const AblationRow& row : r.rows) out << ' ' << row.name << '=' << row.nap();
    out << " (without ignores " << r.without_ignores.nap() << ")\n";
  }
  json table = ablation_table(results);
  table["experiment"] = e.to_json();
  ensure_parent(o.out);
  json_io::write_file(o.out, table, 2);
  json cfg = e.to_json();
  cfg["seeds"] = o.seeds;
  write_manifest("ablate", cfg, std::nullopt, {o.out}, run_manifest_path(o.out));
  return kExitOk;
}

int cmd_pipeline(const Options& o, std::ostream& out) {
  PipelineConfig c = load_pipeline_config(o.config);
  if (o.seed) c.seed = o.seed;
  if (o.q_override) c.params.q = *o.q_override;
  if (o.k_override) c.params.k = *o.k_override;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (c.out_dir.empty()) throw ConfigError("pipeline needs an output directory (--out-dir)");
  if (!c.seed) throw ConfigError("pipeline needs a seed (config 'seed' or --seed)");
  for (const auto& [name, p] : std::map<std::string, fs::path>{
           {"dataset", c.dataset}, {"split", c.split}, {"detections", c.detections}}) {
    if (p.empty()) throw ConfigError("pipeline config needs '" + name + "'");
  }
  if (c.shot_embeddings.empty() || c.detection_embeddings.empty()) {
    throw ConfigError("pipeline config needs 'shot_embeddings' and 'detection_embeddings'");
  }
  if (c.corrector_model.empty() == c.corrector_pairs.empty()) {
    throw ConfigError("pipeline config needs exactly one of 'corrector_model', 'corrector_pairs'");
  }
  if (c.features.empty() == c.oracle_world.empty()) {
    throw ConfigError("pipeline config needs exactly one of 'features', 'oracle'");
  }
  const fs::path dir = c.out_dir;
  std::vector<fs::path> inputs = {o.config, c.dataset, c.split, c.detections, c.corrector_model,
                                  c.corrector_pairs, c.oracle_world, c.world, c.eval_gt};
  const std::vector<fs::path> artifacts = {
      dir / "candidates.json",     dir / "verified.json",     dir / "rejected.json",
      dir / "corrector_model.json", dir / "corrected.json",   dir / "ignores.json",
      dir / "retrain_set.json",    dir / "report.json"};
  check_outputs(inputs, artifacts);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::uint64_t seed = *c.seed;

  // source
  const Dataset dataset = load_dataset(c.dataset);
  const FewShotSplit split = load_split(c.split);
  const auto dets = load_detections(c.detections);
  const CandidateSet cands = source_candidates(dets, split, c.params.q, c.params.per_class_cap);
  save_detections(cands.candidates, artifacts[0]);
  out << "source: " << cands.candidates.size() << " candidates\n";

  // verify
  const int k = c.params.k.value_or(k_for_shots(split.shots));
  const KnnClassifier knn = build_knn(split, load_embedding_spec(c.shot_embeddings), k);
  const VerificationOutcome ver = verify(cands, knn, load_embedding_spec(c.detection_embeddings));
  save_verification(ver, artifacts[1], artifacts[2]);
  out << "verify: " << ver.verified.size() << " verified, " << ver.rejected.size()
      << " rejected (k = " << k << ")\n";

  // correct
  CascadeRegressor model;
  TrainingSummary summary;
  if (!c.corrector_model.empty()) {
    model = load_model(c.corrector_model);
  } else {
    TrainHyperparams hp = c.params.corrector;
    hp.seed = seed;
    model = train_cascade(load_train_pairs(c.corrector_pairs), hp, &summary);
  }
  save_model(model, artifacts[3]);
  std::unique_ptr<WorldTruth> oracle_world;
  std::unique_ptr<SimulatedDetections> oracle_sim;
  const FeatureProvider fp =
      c.features.empty() ? oracle_from_world(c.oracle_world, oracle_world, oracle_sim)
                         : FeatureProvider::from_embeddings(load_embedding_spec(c.features));
  std::size_t collapsed = 0;
  const auto corrected = apply_correction(model, ver.verified, fp, dataset, &collapsed);
  save_detections(corrected, artifacts[4]);
  out << "correct: " << corrected.size() << " boxes (" << collapsed << " collapsed)\n";

  // emit
  const auto ignores = emit_ignore_regions(dets, split, ver);
  save_annotation_list(ignores, artifacts[5]);
  out << "emit: " << ignores.size() << " ignore regions\n";

  // assemble
  const Dataset retrain =
      assemble_retrain_set(dataset, split, to_pseudo_annotations(corrected), ignores);
  save_annotations(retrain, artifacts[6]);
  out << "assemble: " << retrain.annotations.size() << " annotations\n";

  // eval
  json report = {{"seed", seed},
                 {"counts",
                  {{"detections", dets.size()},
                   {"candidates", cands.candidates.size()},
                   {"verified", ver.verified.size()},
                   {"rejected", ver.rejected.size()},
                   {"corrected", corrected.size()},
                   {"collapsed", collapsed},
                   {"ignores", ignores.size()},
                   {"retrain_annotations", retrain.annotations.size()}}},
                 {"k", k}};
  if (c.corrector_model.empty()) {
    report["corrector"] = {{"pairs", summary.pairs}, {"final_loss", summary.final_loss}};
  }
  if (!c.eval_gt.empty()) {
    // Pseudo-label quality against a fully annotated copy of the train set.
    const Dataset truth = load_dataset(c.eval_gt);
    report["pseudo_labels"] = {
        {"sourced", coco_map(cands.candidates, truth, split, c.eval).to_json()},
        {"verified", coco_map(ver.verified, truth, split, c.eval).to_json()},
        {"corrected", coco_map(corrected, truth, split, c.eval).to_json()}};
  }
  if (!c.world.empty()) {
    const WorldSpec spec = load_world_spec(c.world);
    PseudoLabelRun run;
    run.world = generate_world(spec.config, spec.seed);
    run.split = split;
    run.train_dets.detections = dets;
    run.candidates = cands;
    run.verification = ver;
    run.corrected = corrected;
    run.ignores = ignores;
    const AblationResult ablation = run_ablation(run, c.params);
    json rows = json::object();
    for (const AblationRow& r : ablation.rows) {
      rows[r.name] = r.report.to_json();
      out << "eval: " << r.name << " nAP " << r.nap() << '\n';
    }
    report["ablation"] = rows;
    report["ablation_without_ignores"] = ablation.without_ignores.report.to_json();
  }
  json_io::write_file(artifacts[7], report, 2);
  write_manifest("pipeline", c.to_json(), seed, artifacts, dir / "manifest.json");
  return kExitOk;
}

}  // namespace

std::vector<unsigned long long> parse_seed_list(const std::string& spec) {
  auto number = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad seed list '" + spec + "'");
    }
    return std::stoull(s);
  };
  std::vector<unsigned long long> out;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const auto lo = number(spec.substr(0, dots));
    const auto hi = number(spec.substr(dots + 2));
    if (hi < lo) throw ConfigError("bad seed range '" + spec + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    out.push_back(number(spec.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label, verify and correct pseudo-labels for few-shot object detection", "lvc"};
  app.require_subcommand(1);
  Options o;

  auto* source = app.add_subcommand("source", "Keep novel-class detections scoring above q");
  source->add_option("--detections", o.detections, "Detections (results format)")->required();
  source->add_option("--split", o.split, "Few-shot split")->required();
  source->add_option("--q", o.q, "Score threshold (strict)")->capture_default_str();
  source->add_option("--cap", o.cap, "Keep at most this many candidates per class");
  source->add_option("--out", o.out, "Candidates output")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Accept candidates whose kNN label agrees");
  verify_cmd->add_option("--candidates", o.candidates, "Candidates file")->required();
  verify_cmd->add_option("--split", o.split, "Few-shot split")->required();
  verify_cmd->add_option("--train-emb", o.shot_emb, "Shot embeddings: name or data,manifest")
      ->required();
  verify_cmd->add_option("--cand-emb", o.cand_emb, "Candidate embeddings: name or data,manifest")
      ->required();
  verify_cmd->add_option("--k", o.k, "Neighbours");
  verify_cmd->add_flag("--k-auto", o.k_auto, "Derive k from K (the default)");
  verify_cmd->add_option("--out-verified", o.out_verified, "Verified output")->required();
  verify_cmd->add_option("--out-rejected", o.out_rejected, "Rejected output")->required();

  auto* train = app.add_subcommand("train-corrector", "Fit the three-stage box regressor");
  train->add_option("--pairs", o.pairs, "Training pair files")->required();
  train->add_option("--hp", o.hp, "Hyperparameter JSON");
  train->add_option("--seed", o.seed, "Overrides the hyperparameter seed");
  train->add_option("--out", o.out, "Model output")->required();

  auto* correct_cmd = app.add_subcommand("correct", "Refine candidate boxes with a trained model");
  correct_cmd->add_option("--model", o.model, "Model JSON")->required();
  correct_cmd->add_option("--candidates", o.candidates, "Candidates file")->required();
  correct_cmd->add_option("--dataset", o.dataset, "Dataset with image extents");
  correct_cmd->add_option("--features", o.features, "Per-detection features: name or data,manifest");
  correct_cmd->add_option("--oracle", o.oracle, "world_spec.json of a simulated world");
  correct_cmd->add_option("--out", o.out, "Corrected output")->required();

  auto* emit = app.add_subcommand("emit", "Turn unverified novel detections into ignore regions");
  emit->add_option("--detections", o.detections, "All detections")->required();
  emit->add_option("--verified", o.verified, "Verified candidates")->required();
  emit->add_option("--split", o.split, "Restrict to the split's novel classes");
  emit->add_option("--out-ignore", o.out_ignore, "Ignore-region output")->required();

  auto* assemble = app.add_subcommand("assemble", "Build the retraining annotation set");
  assemble->add_option("--base", o.base, "Base ground truth")->required();
  assemble->add_option("--split", o.split, "Few-shot split")->required();
  assemble->add_option("--pseudo", o.pseudo, "Pseudo-label detections");
  assemble->add_option("--ignore", o.ignores, "Ignore regions from emit");
  assemble->add_flag("--no-ignores", o.no_ignores, "Drop ignore regions");
  assemble->add_option("--out", o.out, "Output dataset")->required();

  auto* eval = app.add_subcommand("eval", "COCO-style AP and recall");
  eval->add_option("--dataset", o.dataset, "Ground-truth dataset")->required();
  eval->add_option("--detections", o.detections, "Detections")->required();
  eval->add_option("--split", o.split, "Few-shot split")->required();
  eval->add_option("--max-dets", o.max_dets, "Detections per image and class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_flag("--small", o.small_only, "Also report the small-object aggregates");
  eval->add_option("--proposals", o.proposals, "Class-agnostic proposals for recall");
  eval->add_option("--top-n", o.top_n, "Proposal budgets (default 100,1000)")->delimiter(',');
  eval->add_option("--report", o.report, "Metrics output")->required();
  eval->add_option("--pr-dir", o.pr_dir, "Write one PR curve per class and IoU");
  eval->add_option("--pr-iou", o.pr_iou, "IoU thresholds for --pr-dir")
      ->delimiter(',')
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic world and detections");
  simulate->add_option("--config", o.config, "World config or experiment file")->required();
  simulate->add_option("--noise", o.noise, "Detector noise config");
  simulate->add_option("--params", o.params, "Pipeline parameters");
  simulate->add_option("--seed", o.seed, "Seed")->required();
  simulate->add_option("--out-dir", o.out_dir, "Output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Cumulative ablation over several seeds");
  ablate->add_option("--config", o.config, "World config or experiment file")->required();
  ablate->add_option("--noise", o.noise, "Detector noise config");
  ablate->add_option("--params", o.params, "Pipeline parameters");
  ablate->add_option("--seeds", o.seeds, "e.g. 1..5 or 1,2,3")->capture_default_str();
  ablate->add_option("--out", o.out, "Table output")->required();

  auto* pipeline = app.add_subcommand("pipeline", "source, verify, correct, emit, assemble, eval");
  pipeline->add_option("--config", o.config, "Pipeline config")->required();
  pipeline->add_option("--seed", o.seed, "Overrides the config seed");
  pipeline->add_option("--q", o.q_override, "Overrides the config threshold");
  pipeline->add_option("--k", o.k_override, "Overrides the config neighbour count");
  pipeline->add_option("--out-dir", o.out_dir, "Overrides the config output directory");

  std::vector<const char*> argv = {"lvc"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (source->parsed()) return cmd_source(o);
    if (verify_cmd->parsed()) return cmd_verify(o);
    if (train->parsed()) return cmd_train_corrector(o);
    if (correct_cmd->parsed()) return cmd_correct(o);
    if (emit->parsed()) return cmd_emit(o);
    if (assemble->parsed()) return cmd_assemble(o);
    if (eval->parsed()) return cmd_eval(o);
    if (simulate->parsed()) return cmd_simulate(o);
    if (ablate->parsed()) return cmd_ablate(o, out);
    if (pipeline->parsed()) return cmd_pipeline(o, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace lvc
