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
#ifndef LVC_ABLATION_HPP_
#define LVC_ABLATION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvc/corrector.hpp"
#include "lvc/datamodel.hpp"
#include "lvc/evaluator.hpp"
#include "lvc/sourcing.hpp"
#include "lvc/surrogate.hpp"
#include "lvc/synthworld.hpp"
#include "lvc/verifier.hpp"

namespace lvc {

struct PseudoLabelParams {
  double q = kDefaultSourcingThreshold;
  std::optional<int> per_class_cap;
  std::optional<int> k;  // defaults to k_for_shots(K)
  TrainHyperparams corrector;
  // Jittered boxes per annotated train object used to fit the corrector.
  int corrector_proposals = 8;
  double corrector_proposal_jitter = 0.2;
  SurrogateConfig surrogate;

  // Missing keys keep their defaults; unknown keys throw ConfigError.
  static PseudoLabelParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Every intermediate of one seeded pseudo-labelling run on a world.
struct PseudoLabelRun {
  WorldTruth world;
  FewShotSplit split;
  SimulatedDetections train_dets;
  SimulatedDetections test_dets;
  CandidateSet candidates;
  VerificationOutcome verification;
  StagePairs corrector_pairs;
  CascadeRegressor corrector;
  TrainingSummary corrector_summary;
  std::vector<Detection> corrected;
  std::vector<Annotation> ignores;  // unverified novel detections
  Dataset assembled;                // corrected pseudo-labels + ignores
};

// Corrector training pairs from jittered boxes around every annotated train
// object (base ground truth and shots), with oracle features.
StagePairs corrector_training_pairs(const WorldTruth& world, const FewShotSplit& split,
                                    const PseudoLabelParams& params, std::uint64_t seed);

// Label, verify and correct on the world's train images.
PseudoLabelRun run_pseudo_labelling(const WorldConfig& cfg, const DetectorNoise& noise,
                                    const PseudoLabelParams& params, std::uint64_t seed);

// Oracle features for simulated detections; pure false positives get a zero
// delta part and the background center.
FeatureProvider oracle_provider(const WorldTruth& world, const SimulatedDetections& sim);

struct AblationRow {
  std::string name;
  MetricsReport report;

  double nap() const { return report.get("nAP").value_or(0.0); }
};

struct AblationResult {
  std::uint64_t seed = 0;
  // baseline, +sourcing, +verification, +correction.
  std::vector<AblationRow> rows;
  // +correction retrained without ignore regions.
  AblationRow without_ignores;

  nlohmann::json to_json() const;
};

inline const std::vector<std::string>& ablation_row_names() {
  static const std::vector<std::string> kNames = {"baseline", "+sourcing", "+verification",
                                                  "+correction"};
  return kNames;
}

// Every row retrains the surrogate detector and scores it on held-out images.
// The baseline trains on every novel detection as a pseudo-label; later rows
// use cumulatively refined pseudo-labels plus ignore regions over the novel
// detections they dropped.
AblationResult run_ablation(const PseudoLabelRun& run, const PseudoLabelParams& params);
AblationResult run_ablation(const WorldConfig& cfg, const DetectorNoise& noise,
                            const PseudoLabelParams& params, std::uint64_t seed);

// {"seeds": [...], "per_seed": [...], "mean": {row: {nAP, nAP50, nAP75}}}.
nlohmann::json ablation_table(const std::vector<AblationResult>& results);

}  // namespace lvc

#endif  // LVC_ABLATION_HPP_
