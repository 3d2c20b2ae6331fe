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
#ifndef LVC_SYNTHWORLD_HPP_
#define LVC_SYNTHWORLD_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "json.hpp"
#include "lvc/datamodel.hpp"
#include "lvc/geometry.hpp"

namespace lvc {

// Seeded synthetic world. Category ids 1..n_base are base classes and
// n_base+1..n_base+n_novel are novel. Train images are numbered 1..n_images
// and held-out test images follow them; annotation ids are unique across
// both sets.
struct WorldConfig {
  int n_base = 5;
  int n_novel = 5;
  int emb_dim = 16;
  double cluster_angle_min = 60.0;  // degrees, in (0, 90]
  double intra_sigma = 0.1;
  int n_images = 400;
  int n_test_images = 200;
  int objects_min = 1;
  int objects_max = 4;
  ImageExtent extent{640, 480};
  // Object side lengths as fractions of the image side.
  double box_min_frac = 0.1;
  double box_max_frac = 0.4;
  int shots = 5;

  int n_classes() const { return n_base + n_novel; }
  // Throws ConfigError.
  void validate() const;
  // Missing keys keep their defaults; unknown keys throw ConfigError.
  static WorldConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ScoreModel {
  double tp_mean = 0.95;
  double fp_mean = 0.83;
  double sigma = 0.05;
};

struct DetectorNoise {
  double miss_rate = 0.3;
  // Off-diagonal mass of the generated confusion matrix, spread uniformly
  // over the other classes. Ignored when `confusion` is given.
  double confusion_offdiag = 0.3;
  // Optional explicit row-stochastic matrix, rows and columns in category
  // order.
  std::vector<std::vector<double>> confusion;
  std::map<CategoryId, double> miss_rate_overrides;
  double box_jitter_sigma = 0.15;
  ScoreModel score;
  // Expected number of detections per image not caused by any object.
  double false_positives_per_image = 0.0;

  // Throws ConfigError when the matrix is not n x n row-stochastic
  // (tolerance 1e-9) or a probability is outside [0, 1].
  void validate(int n_classes) const;
  std::vector<std::vector<double>> confusion_matrix(int n_classes) const;
  double miss_rate_for(CategoryId c) const;
  static DetectorNoise from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static DetectorNoise noiseless();
};

struct HiddenObject {
  AnnotationId id{};
  ImageId image_id{};
  CategoryId true_class{};
  Box true_box;
  bool test = false;
};

struct WorldTruth {
  WorldConfig cfg;
  std::uint64_t seed = 0;
  Dataset dataset;       // train images, every object annotated
  Dataset test_dataset;  // held-out images for evaluation
  // Unit-norm class centers keyed by category, plus a background center
  // for non-object regions.
  std::map<CategoryId, std::vector<double>> centers;
  std::vector<double> background_center;
  // Keyed by embedding_key(annotation id), train and test objects.
  EmbeddingMatrix true_embeddings;
  std::vector<HiddenObject> objects;
  std::map<AnnotationId, std::size_t> object_index;

  std::set<CategoryId> base_categories() const;
  std::set<CategoryId> novel_categories() const;
  const HiddenObject& object(AnnotationId id) const;
};

// Places centers by seeded rejection sampling (bounded; throws
// CenterPlacementFailure), then images and objects.
WorldTruth generate_world(const WorldConfig& cfg, std::uint64_t seed);

struct DetectorEvent {
  enum class Kind { kMiss, kDetection, kFalsePositive };
  Kind kind = Kind::kMiss;
  std::optional<AnnotationId> object;
  std::optional<DetectionId> detection;
  ImageId image_id{};
  CategoryId true_class{};  // unset meaning for pure false positives
  CategoryId label{};
  Box box;
  double score = 0.0;
  bool confused = false;
  int jitter_draws = 0;
};

struct SimulatedDetections {
  std::vector<Detection> detections;
  // Keyed by embedding_key(detection id).
  EmbeddingMatrix embeddings;
  std::vector<DetectorEvent> events;
  // Detection id -> hidden object; pure false positives are absent.
  std::map<DetectionId, AnnotationId> source_object;
};

enum class ImageSet { kTrain, kTest };

// Runs the noisy detector over every object of one image set. Detection ids
// are consecutive from 1 in object order; pure false positives follow.
SimulatedDetections simulate_detector(const WorldTruth& world, const DetectorNoise& noise,
                                      std::uint64_t seed,
                                      ImageSet images = ImageSet::kTrain);

// concat(encode_deltas(box, true box), center of the true class). Throws
// ZeroSizeAnchor when the box has no area.
std::vector<double> oracle_feature(const Box& box, const HiddenObject& hidden,
                                   const WorldTruth& world);

// Geodesic step from a unit vector whose angle concentrates around sigma
// radians; returns `center` unchanged when sigma is 0.
std::vector<double> perturb_on_sphere(const std::vector<double>& center, double sigma,
                                      std::mt19937_64& rng);

// Uniform object box inside the configured extent.
Box random_object_box(const WorldConfig& cfg, std::mt19937_64& rng);

// One JSON header line (config, seed, centers) followed by one line per
// hidden object and one per detector event.
void write_truth_log(const WorldTruth& world, const SimulatedDetections& sim,
                     const std::filesystem::path& path);

}  // namespace lvc

#endif  // LVC_SYNTHWORLD_HPP_
