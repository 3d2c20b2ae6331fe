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
#ifndef LVC_SURROGATE_HPP_
#define LVC_SURROGATE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "lvc/datamodel.hpp"
#include "lvc/synthworld.hpp"

// Non-neural stand-in for retraining a two-stage detector on an assembled
// annotation set inside the synthetic world.
//
// Region proposals are drawn around every hidden object and in empty
// background. Training labels each train-image proposal with assign_roi
// (classification memory: class or background, Ignored rows dropped) and
// assign_rpn (objectness memory: foreground or background). At test time a
// proposal is scored by similarity-weighted kNN votes in both memories and
// its box is regressed by class-specific nearest-neighbour residuals, so
// noisy training boxes, wrong labels, missing annotations and ignore regions
// all propagate into the detector's output.
namespace lvc {

struct SurrogateConfig {
  int proposals_per_object = 4;
  double proposal_jitter = 0.1;      // corner offset, fraction of box size
  double proposal_emb_sigma = 0.05;  // geodesic noise on the object embedding
  int background_proposals = 4;      // per image
  int k_cls = 10;
  int k_obj = 10;
  int k_reg = 1;
  double nms_iou = 0.5;
  int max_dets = 100;  // per image

  static SurrogateConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SurrogateProposal {
  ImageId image_id{};
  Box box;
  std::optional<AnnotationId> object;  // empty for background proposals
  std::vector<double> embedding;       // unit norm
};

// Deterministic in (world, images, cfg, seed). Background proposals have
// IoU < 0.3 with every object of their image.
std::vector<SurrogateProposal> generate_proposals(const WorldTruth& world, ImageSet images,
                                                  const SurrogateConfig& cfg,
                                                  std::uint64_t seed);

class RetrainedDetector {
 public:
  // `train_set` is an assembled retraining set: is_ignore annotations act as
  // ignore regions, all others as ground truth.
  static RetrainedDetector train(const WorldTruth& world, const Dataset& train_set,
                                 std::span<const SurrogateProposal> proposals,
                                 const SurrogateConfig& cfg);

  // Per-class NMS, then the top max_dets per image. Detection ids are
  // consecutive from 1.
  std::vector<Detection> detect(const WorldTruth& world,
                                std::span<const SurrogateProposal> proposals) const;

  std::size_t classification_rows() const { return cls_labels_.size(); }
  std::size_t objectness_rows() const { return obj_fg_.size(); }

 private:
  SurrogateConfig cfg_;
  int dim_ = 0;
  std::vector<double> cls_rows_;
  std::vector<CategoryId> cls_labels_;  // CategoryId{0} is background
  std::vector<std::optional<BoxDelta>> cls_residual_;
  std::vector<double> obj_rows_;
  std::vector<bool> obj_fg_;
};

}  // namespace lvc

#endif  // LVC_SURROGATE_HPP_
