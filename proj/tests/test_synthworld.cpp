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
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "lvc/errors.hpp"
#include "lvc/evaluator.hpp"
#include "lvc/synthworld.hpp"
#include "test_util.hpp"

namespace lvc {
namespace {

WorldConfig small_config() {
  WorldConfig c;
  c.n_images = 40;
  c.n_test_images = 20;
  return c;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(World, DeterministicPerSeed) {
  const WorldConfig c = small_config();
  const WorldTruth a = generate_world(c, 3), b = generate_world(c, 3), d = generate_world(c, 4);
  EXPECT_EQ(a.dataset, b.dataset);
  EXPECT_EQ(a.test_dataset, b.test_dataset);
  EXPECT_EQ(a.true_embeddings, b.true_embeddings);
  EXPECT_NE(a.dataset, d.dataset);
}

TEST(World, StructuralInvariants) {
  const WorldConfig c = small_config();
  const WorldTruth w = generate_world(c, 9);
  EXPECT_EQ(w.dataset.images.size(), 40u);
  EXPECT_EQ(w.test_dataset.images.size(), 20u);
  EXPECT_EQ(w.base_categories().size(), 5u);
  EXPECT_EQ(w.novel_categories().size(), 5u);
  w.dataset.validate();
  w.test_dataset.validate();

  // Centers: unit norm and pairwise at least the configured angle apart,
  // background included.
  std::vector<std::vector<double>> all;
  for (const auto& [cat, v] : w.centers) all.push_back(v);
  all.push_back(w.background_center);
  const double max_cos = std::cos(c.cluster_angle_min * M_PI / 180.0);
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_NEAR(dot(all[i], all[i]), 1.0, 1e-12);
    for (std::size_t j = i + 1; j < all.size(); ++j) EXPECT_LE(dot(all[i], all[j]), max_cos + 1e-12);
  }

  std::map<ImageId, int> per_image;
  for (const HiddenObject& o : w.objects) {
    const Dataset& ds = o.test ? w.test_dataset : w.dataset;
    const ImageExtent e = ds.images.at(o.image_id);
    EXPECT_GE(o.true_box.x, 0.0);
    EXPECT_LE(o.true_box.x2(), e.width);
    EXPECT_LE(o.true_box.y2(), e.height);
    ++per_image[o.image_id];
    // Embeddings stay near their class center.
    const auto row = w.true_embeddings.at(embedding_key(o.id));
    const std::vector<double> v(row.begin(), row.end());
    EXPECT_GT(dot(v, w.centers.at(o.true_class)), std::cos(0.6));
  }
  for (const auto& [im, n] : per_image) {
    EXPECT_GE(n, c.objects_min);
    EXPECT_LE(n, c.objects_max);
  }
}

TEST(World, ImpossibleCentersThrow) {
  WorldConfig c = small_config();
  c.emb_dim = 2;
  c.cluster_angle_min = 90.0;
  EXPECT_THROW(generate_world(c, 1), CenterPlacementFailure);
}

TEST(WorldConfigJson, RoundTripAndErrors) {
  WorldConfig c = small_config();
  c.shots = 3;
  EXPECT_EQ(WorldConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(WorldConfig::from_json({{"n_imgs", 3}}), ConfigError);
  EXPECT_THROW(WorldConfig::from_json({{"cluster_angle_min", 120}}), ConfigError);
  EXPECT_THROW(WorldConfig::from_json({{"objects_per_image", {5, 2}}}), ConfigError);
}

TEST(NoiseJson, ValidationAndRoundTrip) {
  DetectorNoise n;
  n.miss_rate_overrides[CategoryId{3}] = 0.9;
  const DetectorNoise back = DetectorNoise::from_json(n.to_json());
  EXPECT_EQ(back.to_json(), n.to_json());
  EXPECT_EQ(back.miss_rate_for(CategoryId{3}), 0.9);
  EXPECT_EQ(back.miss_rate_for(CategoryId{4}), 0.3);
  const auto m = n.confusion_matrix(4);
  EXPECT_DOUBLE_EQ(m[0][0], 0.7);
  EXPECT_DOUBLE_EQ(m[0][1], 0.1);
  DetectorNoise bad;
  bad.confusion = {{0.5, 0.4}, {0.0, 1.0}};
  EXPECT_THROW(bad.validate(2), ConfigError);
  EXPECT_THROW(DetectorNoise::from_json({{"miss", 0.1}}), ConfigError);
}

TEST(Detector, NoiselessIsPerfect) {
  const WorldTruth w = generate_world(small_config(), 5);
  const SimulatedDetections s = simulate_detector(w, DetectorNoise::noiseless(), 5);
  std::size_t train_objects = 0;
  for (const HiddenObject& o : w.objects) train_objects += o.test ? 0 : 1;
  ASSERT_EQ(s.detections.size(), train_objects);
  for (const Detection& d : s.detections) {
    const HiddenObject& o = w.object(s.source_object.at(d.id));
    EXPECT_EQ(d.category, o.true_class);
    EXPECT_EQ(d.box, o.true_box);
  }
  FewShotSplit split;
  split.novel_categories = w.novel_categories();
  split.base_categories = w.base_categories();
  const MetricsReport r = coco_map(s.detections, w.dataset, split);
  EXPECT_EQ(r.get("nAP"), 1.0);
  EXPECT_EQ(r.get("bAP"), 1.0);
}

TEST(Detector, DeterministicAndConsecutiveIds) {
  const WorldTruth w = generate_world(small_config(), 6);
  DetectorNoise n;
  n.false_positives_per_image = 0.5;
  const SimulatedDetections a = simulate_detector(w, n, 6), b = simulate_detector(w, n, 6);
  EXPECT_EQ(a.detections, b.detections);
  EXPECT_EQ(a.embeddings, b.embeddings);
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_EQ(a.detections[i].id, DetectionId{static_cast<std::int64_t>(i + 1)});
    EXPECT_TRUE(a.embeddings.find(embedding_key(a.detections[i].id)).has_value());
  }
  const SimulatedDetections test = simulate_detector(w, n, 6, ImageSet::kTest);
  for (const Detection& d : test.detections) EXPECT_TRUE(w.test_dataset.images.contains(d.image_id));
}

// Per-class recall equals one minus the miss fraction in the simulator log.
TEST(Detector, RecallMatchesLoggedMisses) {
  WorldConfig c = small_config();
  c.n_images = 200;
  const WorldTruth w = generate_world(c, 8);
  DetectorNoise n = DetectorNoise::noiseless();
  n.miss_rate = 0.2;
  n.miss_rate_overrides[CategoryId{7}] = 0.6;
  const SimulatedDetections s = simulate_detector(w, n, 8);
  std::map<CategoryId, double> objects, misses;
  for (const DetectorEvent& e : s.events) {
    if (e.kind == DetectorEvent::Kind::kFalsePositive) continue;
    objects[e.true_class] += 1.0;
    if (e.kind == DetectorEvent::Kind::kMiss) misses[e.true_class] += 1.0;
  }
  const RecallResult r = average_recall(s.detections, w.dataset.annotations, 0.5, 1000, false);
  for (const auto& [cat, total] : objects) {
    EXPECT_NEAR(r.per_class.at(cat), 1.0 - misses[cat] / total, 1e-12);
  }
  EXPECT_GT(misses[CategoryId{7}] / objects[CategoryId{7}], 0.4);
}

TEST(Detector, OracleFeatureLayout) {
  const WorldTruth w = generate_world(small_config(), 2);
  const HiddenObject& o = w.objects.front();
  const Box b{o.true_box.x + 3, o.true_box.y - 1, o.true_box.w * 1.1, o.true_box.h};
  const std::vector<double> f = oracle_feature(b, o, w);
  ASSERT_EQ(f.size(), 4u + 16u);
  const BoxDelta d = encode_deltas(b, o.true_box);
  EXPECT_EQ(f[0], d.dx);
  EXPECT_EQ(f[3], d.dh);
  EXPECT_EQ(std::vector<double>(f.begin() + 4, f.end()), w.centers.at(o.true_class));
}

TEST(Sphere, PerturbationKeepsUnitNormAndAngle) {
  std::mt19937_64 rng(1);
  std::vector<double> c(16, 0.0);
  c[0] = 1.0;
  double mean_angle = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const auto v = perturb_on_sphere(c, 0.1, rng);
    EXPECT_NEAR(dot(v, v), 1.0, 1e-12);
    mean_angle += std::acos(std::clamp(dot(v, c), -1.0, 1.0));
  }
  EXPECT_NEAR(mean_angle / 2000, 0.1, 0.02);
  EXPECT_EQ(perturb_on_sphere(c, 0.0, rng), c);
}

TEST(TruthLog, HeaderObjectsEvents) {
  testing::TempDir dir("sw");
  const WorldTruth w = generate_world(small_config(), 4);
  const SimulatedDetections s = simulate_detector(w, DetectorNoise{}, 4);
  write_truth_log(w, s, dir / "t.jsonl");
  std::ifstream in(dir / "t.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    EXPECT_NO_THROW((void)nlohmann::json::parse(line));
    ++lines;
  }
  EXPECT_EQ(lines, 1 + w.objects.size() + s.events.size());
}

}  // namespace
}  // namespace lvc
