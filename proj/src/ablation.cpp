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
#include "lvc/ablation.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "lvc/errors.hpp"
#include "lvc/random.hpp"
#include "lvc/retrain_prep.hpp"

namespace lvc {

namespace {

using nlohmann::json;

constexpr std::uint64_t kCorrectorProposalStream = 30;

std::vector<Annotation> known_annotations(const WorldTruth& world,
                                          const FewShotSplit& split) {
  std::vector<Annotation> out;
  for (const Annotation& a : world.dataset.annotations) {
    if (split.is_base(a.category)) out.push_back(a);
  }
  out.insert(out.end(), split.novel_annotations.begin(), split.novel_annotations.end());
  return out;
}

json row_json(const AblationRow& row) {
  json j = {{"name", row.name}};
  for (const char* key : {"nAP", "nAP50", "nAP75", "bAP", "bAP50", "bAP75"}) {
    if (auto v = row.report.get(key)) j[key] = *v;
  }
  j["metrics"] = row.report.to_json();
  return j;
}

}  // namespace

StagePairs corrector_training_pairs(const WorldTruth& world, const FewShotSplit& split,
                                    const PseudoLabelParams& params, std::uint64_t seed) {
  std::mt19937_64 rng = seeded_rng(seed, kCorrectorProposalStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<Annotation> known = known_annotations(world, split);
  const double s = params.corrector_proposal_jitter;
  std::map<ImageId, std::vector<Proposal>> proposals;
  std::map<ImageId, std::vector<Annotation>> gts;
  for (const Annotation& a : known) {
    const HiddenObject& obj = world.object(a.id);
    gts[obj.image_id].push_back(a);
    for (int p = 0; p < params.corrector_proposals; ++p) {
      const double zx = normal(rng), zy = normal(rng), zw = normal(rng), zh = normal(rng);
      const Box& t = obj.true_box;
      const Box b = clip(Box{t.x + s * t.w * zx, t.y + s * t.h * zy, t.w * std::exp(s * zw),
                             t.h * std::exp(s * zh)},
                         world.cfg.extent);
      if (!b.has_positive_size()) continue;
      proposals[obj.image_id].push_back(Proposal{obj.image_id, b, {}});
    }
  }
  // A proposal may match a neighbouring object; its feature must describe the
  // object it is regressed to, so features are filled in after matching.
  StagePairs out;
  for (auto& [image, props] : proposals) {
    const std::vector<Annotation>& image_gts = gts.at(image);
    for (Proposal& p : props) p.feature.assign(1, 0.0);
    StagePairs matched = build_training_set(props, image_gts);
    for (std::size_t st = 0; st < out.size(); ++st) {
      for (TrainPair& pair : matched[st]) {
        const auto target = std::find_if(image_gts.begin(), image_gts.end(),
                                         [&](const Annotation& a) { return a.box == pair.target; });
        pair.feature = oracle_feature(pair.anchor, world.object(target->id), world);
        out[st].push_back(std::move(pair));
      }
    }
  }
  return out;
}

PseudoLabelParams PseudoLabelParams::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("pipeline parameters must be a JSON object");
  PseudoLabelParams p;
  for (const auto& [key, v] : j.items()) {
    if (key == "q") {
      if (!v.is_number()) throw ConfigError("'q' must be a number");
      p.q = v.get<double>();
    } else if (key == "per_class_cap") {
      if (!v.is_null() && !v.is_number_integer()) {
        throw ConfigError("'per_class_cap' must be an integer or null");
      }
      if (!v.is_null()) p.per_class_cap = v.get<int>();
    } else if (key == "k") {
      if (v.is_string() && v.get<std::string>() == "auto") continue;
      if (!v.is_number_integer()) throw ConfigError("'k' must be an integer or \"auto\"");
      p.k = v.get<int>();
    } else if (key == "corrector") {
      try {
        p.corrector = TrainHyperparams::from_json(v);
      } catch (const Error& e) {
        throw ConfigError(std::string("corrector: ") + e.what());
      }
    } else if (key == "corrector_proposals") {
      if (!v.is_number_integer()) throw ConfigError("'corrector_proposals' must be an integer");
      p.corrector_proposals = v.get<int>();
    } else if (key == "corrector_proposal_jitter") {
      if (!v.is_number()) throw ConfigError("'corrector_proposal_jitter' must be a number");
      p.corrector_proposal_jitter = v.get<double>();
    } else if (key == "surrogate") {
      p.surrogate = SurrogateConfig::from_json(v);
    } else {
      throw ConfigError("pipeline parameters: unknown key '" + key + "'");
    }
  }
  if (!(p.q >= 0.0 && p.q <= 1.0)) throw ConfigError("'q' must lie in [0, 1]");
  if (p.corrector_proposals < 1 || !(p.corrector_proposal_jitter >= 0.0)) {
    throw ConfigError("corrector proposal parameters out of range");
  }
  return p;
}

json PseudoLabelParams::to_json() const {
  json j = {{"q", q},
            {"per_class_cap", per_class_cap ? json(*per_class_cap) : json(nullptr)},
            {"k", k ? json(*k) : json("auto")},
            {"corrector", corrector.to_json()},
            {"corrector_proposals", corrector_proposals},
            {"corrector_proposal_jitter", corrector_proposal_jitter},
            {"surrogate", surrogate.to_json()}};
  return j;
}

FeatureProvider oracle_provider(const WorldTruth& world, const SimulatedDetections& sim) {
  return FeatureProvider::from_oracle([&world, &sim](const Detection& d, const Box& box) {
    auto it = sim.source_object.find(d.id);
    if (it != sim.source_object.end()) return oracle_feature(box, world.object(it->second), world);
    std::vector<double> f(4, 0.0);
    f.insert(f.end(), world.background_center.begin(), world.background_center.end());
    return f;
  });
}

PseudoLabelRun run_pseudo_labelling(const WorldConfig& cfg, const DetectorNoise& noise,
                                    const PseudoLabelParams& params, std::uint64_t seed) {
  PseudoLabelRun run;
  run.world = generate_world(cfg, seed);
  run.split = make_few_shot_split(run.world.dataset, run.world.novel_categories(), cfg.shots,
                                  seed);
  run.train_dets = simulate_detector(run.world, noise, seed, ImageSet::kTrain);
  run.test_dets = simulate_detector(run.world, noise, seed, ImageSet::kTest);

  run.candidates =
      source_candidates(run.train_dets.detections, run.split, params.q, params.per_class_cap);
  const int k = params.k.value_or(k_for_shots(cfg.shots));
  const KnnClassifier knn = build_knn(run.split, run.world.true_embeddings, k);
  run.verification = verify(run.candidates, knn, run.train_dets.embeddings);

  run.corrector_pairs = corrector_training_pairs(run.world, run.split, params, seed);
  TrainHyperparams hp = params.corrector;
  hp.seed = seed;
  run.corrector = train_cascade(run.corrector_pairs, hp, &run.corrector_summary);

  const FeatureProvider fp = oracle_provider(run.world, run.train_dets);
  for (const Detection& d : run.verification.verified) {
    Detection c = d;
    c.box = correct(run.corrector, d, fp, run.world.dataset.images.at(d.image_id)).box;
    run.corrected.push_back(c);
  }
  run.ignores = emit_ignore_regions(run.train_dets.detections, run.split, run.verification);
  run.assembled = assemble_retrain_set(run.world.dataset, run.split,
                                       to_pseudo_annotations(run.corrected), run.ignores);
  return run;
}

AblationResult run_ablation(const PseudoLabelRun& run, const PseudoLabelParams& params) {
  const WorldTruth& world = run.world;
  AblationResult result;
  result.seed = world.seed;
  const auto& names = ablation_row_names();

  const auto train_props =
      generate_proposals(world, ImageSet::kTrain, params.surrogate, world.seed);
  const auto test_props = generate_proposals(world, ImageSet::kTest, params.surrogate, world.seed);
  auto retrain = [&](const std::string& name, std::span<const Detection> pseudo,
                     std::span<const Annotation> ignores) {
    const Dataset ds =
        assemble_retrain_set(world.dataset, run.split, to_pseudo_annotations(pseudo), ignores);
    const RetrainedDetector det =
        RetrainedDetector::train(world, ds, train_props, params.surrogate);
    return AblationRow{name, coco_map(det.detect(world, test_props), world.test_dataset,
                                      run.split)};
  };

  std::vector<Detection> all_novel;
  for (const Detection& d : run.train_dets.detections) {
    if (run.split.is_novel(d.category)) all_novel.push_back(d);
  }
  result.rows.push_back(retrain(names[0], all_novel, {}));

  VerificationOutcome sourced_only;
  sourced_only.verified = run.candidates.candidates;
  const auto sourcing_ignores =
      emit_ignore_regions(run.train_dets.detections, run.split, sourced_only);
  result.rows.push_back(retrain(names[1], run.candidates.candidates, sourcing_ignores));
  result.rows.push_back(retrain(names[2], run.verification.verified, run.ignores));
  result.rows.push_back(retrain(names[3], run.corrected, run.ignores));
  result.without_ignores = retrain("+correction without ignore regions", run.corrected, {});
  return result;
}

AblationResult run_ablation(const WorldConfig& cfg, const DetectorNoise& noise,
                            const PseudoLabelParams& params, std::uint64_t seed) {
  return run_ablation(run_pseudo_labelling(cfg, noise, params, seed), params);
}

json AblationResult::to_json() const {
  json rows_j = json::array();
  for (const AblationRow& r : rows) rows_j.push_back(row_json(r));
  return {{"seed", seed}, {"rows", rows_j}, {"without_ignores", row_json(without_ignores)}};
}

json ablation_table(const std::vector<AblationResult>& results) {
  json seeds = json::array();
  json per_seed = json::array();
  std::map<std::string, std::map<std::string, double>> sums;
  std::vector<std::string> order;
  for (const AblationResult& r : results) {
    seeds.push_back(r.seed);
    per_seed.push_back(r.to_json());
    std::vector<const AblationRow*> all;
    for (const AblationRow& row : r.rows) all.push_back(&row);
    all.push_back(&r.without_ignores);
    for (const AblationRow* row : all) {
      if (!sums.contains(row->name)) order.push_back(row->name);
      for (const char* key : {"nAP", "nAP50", "nAP75"}) {
        sums[row->name][key] += row->report.get(key).value_or(0.0);
      }
    }
  }
  json mean = json::array();
  for (const std::string& name : order) {
    json m = {{"name", name}};
    for (const auto& [key, total] : sums[name]) {
      m[key] = results.empty() ? 0.0 : total / static_cast<double>(results.size());
    }
    mean.push_back(m);
  }
  return {{"seeds", seeds}, {"per_seed", per_seed}, {"mean", mean}};
}

}  // namespace lvc
