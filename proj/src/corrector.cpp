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
#include "lvc/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lvc/errors.hpp"
#include "lvc/random.hpp"
#include "lvc/json_io.hpp"

namespace lvc {

using nlohmann::json;

namespace {

// Largest log-scale step a stage may take; keeps exp() finite for
// untrained or badly extrapolating models.
constexpr double kMaxLogScale = 4.135166556742356;  // log(1000 / 16)

std::array<double, 4> as_array(const BoxDelta& d) { return {d.dx, d.dy, d.dw, d.dh}; }

}  // namespace

BoxDelta StageRegressor::predict(std::span<const double> feature) const {
  if (feature.size() != static_cast<std::size_t>(feature_dim)) {
    throw DimensionMismatch("stage regressor expects " + std::to_string(feature_dim) +
                            " features, got " + std::to_string(feature.size()));
  }
  std::array<double, 4> out = bias;
  for (int c = 0; c < 4; ++c) {
    const double* w = weights.data() + c * feature_dim;
    for (int d = 0; d < feature_dim; ++d) out[c] += w[d] * feature[d];
  }
  return {out[0], out[1], out[2], out[3]};
}

CascadeRegressor CascadeRegressor::zeros(int feature_dim) {
  if (feature_dim <= 0) throw DimensionMismatch("feature_dim must be positive");
  CascadeRegressor m;
  m.feature_dim = feature_dim;
  for (std::size_t s = 0; s < 3; ++s) {
    m.stages[s].iou_gate = kCascadeGates[s];
    m.stages[s].feature_dim = feature_dim;
    m.stages[s].weights.assign(4 * static_cast<std::size_t>(feature_dim), 0.0);
  }
  return m;
}

StagePairs build_training_set(std::span<const Proposal> proposals,
                              std::span<const Annotation> gts) {
  std::map<ImageId, std::vector<const Annotation*>> by_image;
  for (const Annotation& a : gts) {
    if (!a.is_ignore) by_image[a.image_id].push_back(&a);
  }
  StagePairs out;
  std::optional<std::size_t> dim;
  for (const Proposal& p : proposals) {
    if (!dim) dim = p.feature.size();
    if (p.feature.size() != *dim) {
      throw DimensionMismatch("proposal features must share one dimension");
    }
    auto it = by_image.find(p.image_id);
    if (it == by_image.end()) continue;
    const Annotation* best = nullptr;
    double best_iou = -1.0;
    for (const Annotation* g : it->second) {
      const double v = iou(p.box, g->box);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best_iou <= kCascadeGates[0]) continue;
    if (!p.box.has_positive_size() || !best->box.has_positive_size()) continue;
    for (std::size_t s = 0; s < 3; ++s) {
      if (best_iou > kCascadeGates[s]) {
        out[s].push_back(TrainPair{p.feature, p.box, best->box, best_iou});
      }
    }
  }
  return out;
}

SmoothL1 smooth_l1(double residual, double beta) {
  if (!(beta > 0.0)) throw RangeError("smooth_l1: beta must be positive");
  const double a = std::abs(residual);
  if (a < beta) return {residual * residual / (2.0 * beta), residual / beta};
  return {a - 0.5 * beta, residual > 0.0 ? 1.0 : -1.0};
}

TrainHyperparams TrainHyperparams::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("hyperparameters must be a JSON object");
  TrainHyperparams hp;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") {
      hp.learning_rate = json_io::require_number(j, "learning_rate", "hyperparameters");
    } else if (key == "epochs") {
      hp.epochs = static_cast<int>(json_io::require_int(j, "epochs", "hyperparameters"));
    } else if (key == "batch_size") {
      hp.batch_size = static_cast<int>(json_io::require_int(j, "batch_size", "hyperparameters"));
    } else if (key == "beta") {
      hp.beta = json_io::require_number(j, "beta", "hyperparameters");
    } else if (key == "seed") {
      hp.seed = static_cast<std::uint64_t>(json_io::require_int(j, "seed", "hyperparameters"));
    } else {
      throw ParseError("hyperparameters: unknown key '" + key + "'");
    }
  }
  if (!(hp.learning_rate > 0.0) || hp.epochs < 0 || hp.batch_size < 1 || !(hp.beta > 0.0)) {
    throw RangeError("hyperparameters: learning_rate, batch_size, beta must be positive");
  }
  return hp;
}

json TrainHyperparams::to_json() const {
  return {{"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"beta", beta},
          {"seed", seed}};
}

namespace {

double mean_loss(const StageRegressor& stage, const std::vector<TrainPair>& pairs,
                 const std::vector<std::array<double, 4>>& targets, double beta) {
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto pred = as_array(stage.predict(pairs[i].feature));
    for (int c = 0; c < 4; ++c) total += smooth_l1(pred[c] - targets[i][c], beta).loss;
  }
  return total / (4.0 * static_cast<double>(pairs.size()));
}

StageRegressor train_stage(std::size_t stage_index, const std::vector<TrainPair>& pairs,
                           int dim, const TrainHyperparams& hp, double* final_loss) {
  StageRegressor stage;
  stage.iou_gate = kCascadeGates[stage_index];
  stage.feature_dim = dim;
  stage.weights.assign(4 * static_cast<std::size_t>(dim), 0.0);

  std::vector<std::array<double, 4>> targets;
  targets.reserve(pairs.size());
  for (const TrainPair& p : pairs) targets.push_back(as_array(encode_deltas(p.anchor, p.target)));

  // Gradient descent runs on standardized features; the result is folded back
  // into raw-feature weights. Constant features keep unit scale.
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (const TrainPair& p : pairs) {
    for (int d = 0; d < dim; ++d) mu[d] += p.feature[d];
  }
  for (double& m : mu) m /= static_cast<double>(pairs.size());
  for (const TrainPair& p : pairs) {
    for (int d = 0; d < dim; ++d) sd[d] += (p.feature[d] - mu[d]) * (p.feature[d] - mu[d]);
  }
  for (int d = 0; d < dim; ++d) {
    sd[d] = std::sqrt(sd[d] / static_cast<double>(pairs.size()));
    if (!std::isfinite(mu[d]) || !std::isfinite(sd[d])) {
      throw DivergedLoss("stage " + std::to_string(stage_index + 1) +
                         ": feature statistics overflow");
    }
    if (sd[d] < 1e-12) sd[d] = 1.0;
  }
  std::vector<std::vector<double>> z(pairs.size(), std::vector<double>(dim));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (int d = 0; d < dim; ++d) z[i][d] = (pairs[i].feature[d] - mu[d]) / sd[d];
  }

  std::mt19937_64 engine = seeded_rng(hp.seed, static_cast<std::uint64_t>(stage_index));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> grad_w(stage.weights.size());
  std::array<double, 4> grad_b{};
  const std::size_t batch = static_cast<std::size_t>(hp.batch_size);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), engine);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      grad_b.fill(0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const std::vector<double>& f = z[i];
        const auto pred = as_array(stage.predict(f));
        for (int c = 0; c < 4; ++c) {
          const SmoothL1 l = smooth_l1(pred[c] - targets[i][c], hp.beta);
          epoch_loss += l.loss;
          grad_b[c] += l.gradient;
          double* g = grad_w.data() + c * dim;
          for (int d = 0; d < dim; ++d) g[d] += l.gradient * f[d];
        }
      }
      const double scale = hp.learning_rate / (4.0 * static_cast<double>(end - start));
      for (std::size_t w = 0; w < grad_w.size(); ++w) stage.weights[w] -= scale * grad_w[w];
      for (int c = 0; c < 4; ++c) stage.bias[c] -= scale * grad_b[c];
    }
    if (!std::isfinite(epoch_loss)) {
      throw DivergedLoss("stage " + std::to_string(stage_index + 1) +
                         ": non-finite loss in epoch " + std::to_string(epoch));
    }
  }
  for (int c = 0; c < 4; ++c) {
    double* w = stage.weights.data() + c * dim;
    for (int d = 0; d < dim; ++d) {
      w[d] /= sd[d];
      stage.bias[c] -= w[d] * mu[d];
    }
  }
  const double loss = mean_loss(stage, pairs, targets, hp.beta);
  if (!std::isfinite(loss)) {
    throw DivergedLoss("stage " + std::to_string(stage_index + 1) +
                       ": non-finite final loss");
  }
  if (final_loss) *final_loss = loss;
  return stage;
}

}  // namespace

CascadeRegressor train_cascade(const StagePairs& pairs, const TrainHyperparams& hp,
                               TrainingSummary* summary) {
  if (!(hp.learning_rate > 0.0) || hp.batch_size < 1 || hp.epochs < 0 || !(hp.beta > 0.0)) {
    throw RangeError("train_cascade: invalid hyperparameters");
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (pairs[s].empty()) {
      throw EmptyStage("cascade stage " + std::to_string(s + 1) + " (IoU > " +
                       std::to_string(kCascadeGates[s]) + ") has no training pairs");
    }
  }
  const std::size_t dim = pairs[0].front().feature.size();
  if (dim == 0) throw DimensionMismatch("train_cascade: empty feature vectors");
  for (const auto& stage : pairs) {
    for (const TrainPair& p : stage) {
      if (p.feature.size() != dim) {
        throw DimensionMismatch("train_cascade: inconsistent feature dimension");
      }
    }
  }
  CascadeRegressor model;
  model.feature_dim = static_cast<int>(dim);
  for (std::size_t s = 0; s < 3; ++s) {
    double loss = 0.0;
    model.stages[s] = train_stage(s, pairs[s], model.feature_dim, hp, &loss);
    if (summary) {
      summary->pairs[s] = pairs[s].size();
      summary->final_loss[s] = loss;
    }
  }
  return model;
}

FeatureProvider FeatureProvider::from_static(
    std::map<DetectionId, std::vector<double>> features) {
  FeatureProvider fp;
  fp.mode_ = Mode::kStatic;
  fp.static_ = std::move(features);
  return fp;
}

FeatureProvider FeatureProvider::from_embeddings(const EmbeddingMatrix& m) {
  std::map<DetectionId, std::vector<double>> features;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const std::string& key = m.keys()[i];
    std::size_t used = 0;
    std::int64_t id = 0;
    try {
      id = std::stoll(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || key.empty()) {
      throw KeyError("feature key '" + key + "' is not a detection id");
    }
    auto row = m.row(i);
    features.emplace(DetectionId{id}, std::vector<double>(row.begin(), row.end()));
  }
  return from_static(std::move(features));
}

FeatureProvider FeatureProvider::from_oracle(OracleFn fn) {
  if (!fn) throw MissingFeature("oracle feature provider needs a box->vector function");
  FeatureProvider fp;
  fp.mode_ = Mode::kOracle;
  fp.oracle_ = std::move(fn);
  return fp;
}

std::vector<double> FeatureProvider::feature(const Detection& det, const Box& current) const {
  if (mode_ == Mode::kOracle) return oracle_(det, current);
  auto it = static_.find(det.id);
  if (it == static_.end()) {
    throw MissingFeature("no feature for detection " + std::to_string(to_int(det.id)));
  }
  return it->second;
}

CorrectionResult correct(const CascadeRegressor& model, const Detection& candidate,
                         const FeatureProvider& fp, ImageExtent extent) {
  CorrectionResult result{clip(candidate.box, extent), false};
  if (!result.box.has_positive_size()) {
    result.collapsed = true;
    return result;
  }
  Box current = candidate.box;
  for (const StageRegressor& stage : model.stages) {
    const std::vector<double> f = fp.feature(candidate, current);
    BoxDelta delta = stage.predict(f);
    delta.dw = std::clamp(delta.dw, -kMaxLogScale, kMaxLogScale);
    delta.dh = std::clamp(delta.dh, -kMaxLogScale, kMaxLogScale);
    const Box next = clip(decode_deltas(current, delta), extent);
    if (!next.has_positive_size() || !next.valid()) {
      result.collapsed = true;
      return result;
    }
    current = next;
    result.box = next;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

json model_to_json(const CascadeRegressor& model) {
  json stages = json::array();
  json gates = json::array();
  for (const StageRegressor& s : model.stages) {
    gates.push_back(s.iou_gate);
    stages.push_back({{"iou_gate", s.iou_gate},
                      {"weights", s.weights},
                      {"bias", s.bias}});
  }
  return {{"feature_dim", model.feature_dim}, {"gates", gates}, {"stages", stages}};
}

CascadeRegressor model_from_json(const json& j) {
  const std::string who = "corrector model";
  CascadeRegressor m;
  m.feature_dim = static_cast<int>(json_io::require_int(j, "feature_dim", who));
  if (m.feature_dim <= 0) throw ParseError(who + ": feature_dim must be positive");
  if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].size() != 3) {
    throw ParseError(who + ": expected exactly 3 stages");
  }
  for (std::size_t s = 0; s < 3; ++s) {
    const json& js = j["stages"][s];
    StageRegressor& stage = m.stages[s];
    stage.feature_dim = m.feature_dim;
    stage.iou_gate = json_io::require_number(js, "iou_gate", who);
    if (stage.iou_gate != kCascadeGates[s]) {
      throw ParseError(who + ": stage gates must be 0.3, 0.5, 0.7 in order");
    }
    try {
      stage.weights = js.at("weights").get<std::vector<double>>();
      stage.bias = js.at("bias").get<std::array<double, 4>>();
    } catch (const json::exception& e) {
      throw ParseError(who + ": " + e.what());
    }
    if (stage.weights.size() != 4 * static_cast<std::size_t>(m.feature_dim)) {
      throw ParseError(who + ": stage weights must hold 4 x feature_dim values");
    }
    for (double w : stage.weights) {
      if (!std::isfinite(w)) throw ParseError(who + ": non-finite weight");
    }
    for (double b : stage.bias) {
      if (!std::isfinite(b)) throw ParseError(who + ": non-finite bias");
    }
  }
  return m;
}

void save_model(const CascadeRegressor& model, const std::filesystem::path& path) {
  json_io::write_file(path, model_to_json(model), 2);
}

CascadeRegressor load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json_io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_train_pairs(const StagePairs& pairs, const std::filesystem::path& path) {
  json stages = json::array();
  for (const auto& stage : pairs) {
    json arr = json::array();
    for (const TrainPair& p : stage) {
      arr.push_back({{"feature", p.feature},
                     {"anchor", {p.anchor.x, p.anchor.y, p.anchor.w, p.anchor.h}},
                     {"target", {p.target.x, p.target.y, p.target.w, p.target.h}},
                     {"anchor_iou", p.anchor_iou}});
    }
    stages.push_back(std::move(arr));
  }
  json_io::write_file(path, json{{"gates", kCascadeGates}, {"stages", stages}});
}

StagePairs load_train_pairs(const std::filesystem::path& path) {
  const json root = json_io::read_file(path);
  const std::string who = path.string();
  if (!root.is_object() || !root.contains("stages") || !root["stages"].is_array() ||
      root["stages"].size() != 3) {
    throw ParseError(who + ": expected an object with 3 stage lists");
  }
  StagePairs out;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const json& jp : root["stages"][s]) {
      TrainPair p;
      try {
        p.feature = jp.at("feature").get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw ParseError(who + ": " + e.what());
      }
      p.anchor = json_io::require_box(jp, "anchor", who);
      p.target = json_io::require_box(jp, "target", who);
      p.anchor_iou = json_io::require_number(jp, "anchor_iou", who);
      if (!p.anchor.has_positive_size() || !p.target.has_positive_size()) {
        throw ParseError(who + ": train pairs need positive-size boxes");
      }
      out[s].push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace lvc
