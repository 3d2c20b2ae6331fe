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

#include <random>

#include "lvc/errors.hpp"
#include "lvc/verifier.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

namespace lvc {
namespace {

TEST(KForShots, ListedValues) {
  const std::vector<std::pair<int, int>> table = {{1, 1}, {2, 1}, {3, 2},
                                                  {5, 2}, {10, 4}, {30, 10}};
  for (const auto& [shots, k] : table) EXPECT_EQ(k_for_shots(shots), k) << "K=" << shots;
  EXPECT_EQ(k_for_shots(100), 10);
  EXPECT_THROW(k_for_shots(0), RangeError);
}

TEST(Knn, MajorityAndTieBreak) {
  // Two rows of label 1 near the query, one of label 2 nearest.
  const std::vector<std::vector<float>> rows = {{1, 0.1f}, {1, 0.2f}, {1, 0}, {0, 1}};
  const std::vector<CategoryId> labels = {CategoryId{1}, CategoryId{1}, CategoryId{2},
                                          CategoryId{3}};
  const std::vector<float> q = {1, 0};
  EXPECT_EQ(KnnClassifier(2, rows, labels, 1).classify(q), CategoryId{2});
  // k = 2: one vote each; label 2 ranks first.
  EXPECT_EQ(KnnClassifier(2, rows, labels, 2).classify(q), CategoryId{2});
  EXPECT_EQ(KnnClassifier(2, rows, labels, 3).classify(q), CategoryId{1});
}

TEST(Knn, EqualSimilarityPrefersEarlierRow) {
  const std::vector<std::vector<float>> rows = {{1, 0}, {2, 0}};
  const std::vector<CategoryId> labels = {CategoryId{7}, CategoryId{8}};
  const std::vector<float> q = {3, 0};
  EXPECT_EQ(KnnClassifier(2, rows, labels, 1).classify(q), CategoryId{7});
}

TEST(Knn, ScaleInvariant) {
  const std::vector<std::vector<float>> rows = {{1, 2, 3}, {-1, 0, 2}, {0, 5, -1}};
  const std::vector<CategoryId> labels = {CategoryId{1}, CategoryId{2}, CategoryId{3}};
  const KnnClassifier c(3, rows, labels, 1);
  EXPECT_EQ(c.classify(std::vector<float>{0.1f, 0.2f, 0.3f}),
            c.classify(std::vector<float>{10, 20, 30}));
}

TEST(Knn, Errors) {
  const std::vector<CategoryId> one = {CategoryId{1}};
  EXPECT_THROW(KnnClassifier(2, {{0, 0}}, one, 1), NormalizationError);
  EXPECT_THROW(KnnClassifier(2, {{1, 0}}, one, 2), BadK);
  EXPECT_THROW(KnnClassifier(2, {{1, 0}}, one, 0), BadK);
  const KnnClassifier c(2, {{1, 0}}, one, 1);
  EXPECT_THROW(c.classify(std::vector<float>{1, 0, 0}), DimensionMismatch);
  EXPECT_THROW(c.classify(std::vector<float>{0, 0}), ZeroVector);
}

TEST(Knn, MatchesBruteForceOracle) {
  std::mt19937_64 rng(17);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_int_distribution<int> dim_d(4, 64), rows_d(1, 100), label_d(1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = dim_d(rng), m = rows_d(rng);
    std::vector<std::vector<float>> rows(m, std::vector<float>(dim));
    std::vector<CategoryId> labels;
    for (auto& r : rows) {
      for (float& x : r) x = n(rng);
      labels.push_back(CategoryId{label_d(rng)});
    }
    const int k = std::uniform_int_distribution<int>(1, m)(rng);
    std::vector<float> q(dim);
    for (float& x : q) x = n(rng);
    EXPECT_EQ(KnnClassifier(dim, rows, labels, k).classify(q),
              oracle::knn_classify(rows, labels, k, q));
  }
}

TEST(Verify, AcceptsOnlyAgreeingLabels) {
  FewShotSplit split;
  split.novel_categories = {CategoryId{3}, CategoryId{4}};
  split.shots = 1;
  split.novel_annotations = {testing::ann(10, 1, {0, 0, 5, 5}, 3),
                             testing::ann(11, 1, {0, 0, 5, 5}, 4)};
  const EmbeddingMatrix shots(2, {"10", "11"}, {1, 0, 0, 1});
  const KnnClassifier knn = build_knn(split, shots, 1);
  CandidateSet cands;
  cands.candidates = {testing::det(1, 1, {0, 0, 5, 5}, 3, 0.9),
                      testing::det(2, 1, {0, 0, 5, 5}, 3, 0.9)};
  const EmbeddingMatrix emb(2, {"1", "2"}, {0.9f, 0.1f, 0.1f, 0.9f});
  const VerificationOutcome v = verify(cands, knn, emb);
  ASSERT_EQ(v.verified.size(), 1u);
  ASSERT_EQ(v.rejected.size(), 1u);
  EXPECT_EQ(v.verified[0].id, DetectionId{1});
  EXPECT_EQ(v.knn_label.at(DetectionId{2}), CategoryId{4});

  const EmbeddingMatrix missing(2, {"1"}, {1, 0});
  EXPECT_THROW(verify(cands, knn, missing), MissingEmbedding);
  EXPECT_THROW(build_knn(split, missing, 1), MissingEmbedding);
}

TEST(Verify, PartitionProperty) {
  std::mt19937_64 rng(23);
  std::normal_distribution<float> n(0.0f, 1.0f);
  FewShotSplit split;
  split.novel_categories = {CategoryId{1}, CategoryId{2}, CategoryId{3}};
  split.shots = 3;
  std::vector<std::string> keys;
  std::vector<float> values;
  for (int i = 0; i < 9; ++i) {
    split.novel_annotations.push_back(testing::ann(100 + i, 1, {0, 0, 5, 5}, 1 + i / 3));
    keys.push_back(std::to_string(100 + i));
    for (int d = 0; d < 8; ++d) values.push_back(n(rng));
  }
  CandidateSet cands;
  for (int i = 0; i < 50; ++i) {
    cands.candidates.push_back(testing::det(i, 1, {0, 0, 5, 5}, 1 + i % 3, 0.9));
    keys.push_back(std::to_string(i));
    for (int d = 0; d < 8; ++d) values.push_back(n(rng));
  }
  const EmbeddingMatrix emb(8, keys, values);
  const VerificationOutcome v = verify(cands, build_knn(split, emb, 2), emb);
  EXPECT_EQ(v.verified.size() + v.rejected.size(), cands.candidates.size());
  for (const Detection& d : v.verified) EXPECT_EQ(v.knn_label.at(d.id), d.category);
  for (const Detection& d : v.rejected) EXPECT_NE(v.knn_label.at(d.id), d.category);
}

}  // namespace
}  // namespace lvc
