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
#ifndef LVC_CORRECTOR_HPP_
#define LVC_CORRECTOR_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "json.hpp"
#include "lvc/datamodel.hpp"
#include "lvc/geometry.hpp"

namespace lvc {

// IoU gates of the three cascade stages, in stage order.
inline constexpr std::array<double, 3> kCascadeGates = {0.3, 0.5, 0.7};

// Linear map from a feature vector to a BoxDelta: delta = W f + b.
struct StageRegressor {
  double iou_gate = 0.0;
  int feature_dim = 0;
  std::vector<double> weights;  // 4 x feature_dim, row-major (dx, dy, dw, dh)
  std::array<double, 4> bias{};

  BoxDelta predict(std::span<const double> feature) const;

  friend bool operator==(const StageRegressor&, const StageRegressor&) = default;
};

struct CascadeRegressor {
  int feature_dim = 0;
  std::array<StageRegressor, 3> stages;

  // All-zero parameters: every stage predicts the zero delta.
  static CascadeRegressor zeros(int feature_dim);

  friend bool operator==(const CascadeRegressor&, const CascadeRegressor&) = default;
};

struct TrainPair {
  std::vector<double> feature;
  Box anchor;
  Box target;
  double anchor_iou = 0.0;
};

using StagePairs = std::array<std::vector<TrainPair>, 3>;

// A region proposal with the feature vector pooled for it.
struct Proposal {
  ImageId image_id{};
  Box box;
  std::vector<double> feature;
};

// Matches each proposal to its highest-IoU ground truth in the same image
// (earliest annotation wins ties) and files the pair under every stage whose
// gate it exceeds. Ignore annotations are not matching targets; proposals
// with IoU <= 0.3 and images without ground truth contribute nothing.
// Throws DimensionMismatch when features differ in length.
StagePairs build_training_set(std::span<const Proposal> proposals,
                              std::span<const Annotation> gts);

struct SmoothL1 {
  double loss = 0.0;
  double gradient = 0.0;
};

// r^2 / (2 beta) inside |r| < beta, |r| - beta / 2 outside.
SmoothL1 smooth_l1(double residual, double beta);

struct TrainHyperparams {
  double learning_rate = 1e-2;
  int epochs = 200;
  int batch_size = 64;
  double beta = 1.0;
  std::uint64_t seed = 0;

  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainHyperparams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TrainingSummary {
  std::array<std::size_t, 3> pairs{};
  // Mean smooth-L1 over all pairs and components after the last epoch.
  std::array<double, 3> final_loss{};
};

// Each stage is trained independently by seeded mini-batch gradient descent
// from zero weights, minimizing the mean smooth-L1 over the four components
// of encode_deltas(anchor, target). Throws EmptyStage, DimensionMismatch or
// DivergedLoss.
CascadeRegressor train_cascade(const StagePairs& pairs, const TrainHyperparams& hp,
                               TrainingSummary* summary = nullptr);

// Supplies the feature fed to each stage. Static providers return one fixed
// vector per detection; oracle providers recompute it from the current box.
class FeatureProvider {
 public:
  enum class Mode { kStatic, kOracle };
  using OracleFn = std::function<std::vector<double>(const Detection&, const Box&)>;

  static FeatureProvider from_static(std::map<DetectionId, std::vector<double>> features);
  // Rows keyed by embedding_key(detection id).
  static FeatureProvider from_embeddings(const EmbeddingMatrix& m);
  static FeatureProvider from_oracle(OracleFn fn);

  Mode mode() const { return mode_; }
  // Throws MissingFeature.
  std::vector<double> feature(const Detection& det, const Box& current) const;

 private:
  Mode mode_ = Mode::kStatic;
  std::map<DetectionId, std::vector<double>> static_;
  OracleFn oracle_;
};

struct CorrectionResult {
  Box box;
  // Set when an intermediate box lost its area; `box` is then the last box
  // with positive size.
  bool collapsed = false;
};

// box_0 = candidate box; box_s = clip(decode(box_{s-1}, stage_s(feature))).
CorrectionResult correct(const CascadeRegressor& model, const Detection& candidate,
                         const FeatureProvider& fp, ImageExtent extent);

nlohmann::json model_to_json(const CascadeRegressor& model);
CascadeRegressor model_from_json(const nlohmann::json& j);
void save_model(const CascadeRegressor& model, const std::filesystem::path& path);
CascadeRegressor load_model(const std::filesystem::path& path);

void save_train_pairs(const StagePairs& pairs, const std::filesystem::path& path);
StagePairs load_train_pairs(const std::filesystem::path& path);

}  // namespace lvc

#endif  // LVC_CORRECTOR_HPP_
