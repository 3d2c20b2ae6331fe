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
#include "lvc/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "lvc/errors.hpp"
#include "lvc/json_io.hpp"

namespace lvc {

int k_for_shots(int shots) {
  if (shots < 1) throw RangeError("k_for_shots: K must be >= 1");
  return std::min(shots / 3 + 1, 10);
}

KnnClassifier::KnnClassifier(int dim, std::vector<std::vector<float>> rows,
                             std::vector<CategoryId> labels, int k)
    : dim_(dim), k_(k), labels_(std::move(labels)) {
  if (dim_ <= 0) throw DimensionMismatch("kNN: dim must be positive");
  if (rows.size() != labels_.size()) {
    throw DimensionMismatch("kNN: one label per training row required");
  }
  if (k_ < 1 || static_cast<std::size_t>(k_) > rows.size()) {
    throw BadK("kNN: k = " + std::to_string(k_) + " but there are " +
               std::to_string(rows.size()) + " training rows");
  }
  rows_.reserve(rows.size() * dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(dim_)) {
      throw DimensionMismatch("kNN: training row " + std::to_string(i) +
                              " has the wrong dimension");
    }
    double norm2 = 0.0;
    for (float x : rows[i]) norm2 += static_cast<double>(x) * x;
    if (!(norm2 > 0.0)) {
      throw NormalizationError("kNN: training row " + std::to_string(i) +
                               " is a zero vector");
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (float x : rows[i]) rows_.push_back(x * inv);
  }
}

CategoryId KnnClassifier::classify(std::span<const float> v) const {
  if (v.size() != static_cast<std::size_t>(dim_)) {
    throw DimensionMismatch("kNN: query has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(dim_));
  }
  double norm2 = 0.0;
  for (float x : v) norm2 += static_cast<double>(x) * x;
  if (!(norm2 > 0.0)) throw ZeroVector("kNN: query is a zero vector");
  const double norm = std::sqrt(norm2);

  const std::size_t n = labels_.size();
  std::vector<double> sim(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = rows_.data() + i * dim_;
    double dot = 0.0;
    for (int d = 0; d < dim_; ++d) dot += r[d] * v[d];
    sim[i] = dot / norm;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k_, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sim[a] != sim[b]) return sim[a] > sim[b];
                      return a < b;
                    });

  // Neighbours are visited in rank order, so the first label to reach the
  // best count under a strict comparison is the earliest-ranked one.
  std::vector<std::pair<CategoryId, int>> votes;
  for (int r = 0; r < k_; ++r) {
    const CategoryId label = labels_[order[r]];
    auto it = std::find_if(votes.begin(), votes.end(),
                           [&](const auto& p) { return p.first == label; });
    if (it == votes.end()) {
      votes.emplace_back(label, 1);
    } else {
      ++it->second;
    }
  }
  const auto* best = &votes.front();
  for (const auto& p : votes) {
    if (p.second > best->second) best = &p;
  }
  return best->first;
}

KnnClassifier build_knn(const FewShotSplit& split, const EmbeddingMatrix& emb,
                        int k) {
  std::vector<std::vector<float>> rows;
  std::vector<CategoryId> labels;
  for (const Annotation& a : split.novel_annotations) {
    auto idx = emb.find(embedding_key(a.id));
    if (!idx) {
      throw MissingEmbedding("few-shot annotation " + std::to_string(to_int(a.id)) +
                             " has no embedding row");
    }
    auto row = emb.row(*idx);
    rows.emplace_back(row.begin(), row.end());
    labels.push_back(a.category);
  }
  return KnnClassifier(emb.dim(), std::move(rows), std::move(labels), k);
}

VerificationOutcome verify(const CandidateSet& cands, const KnnClassifier& c,
                           const EmbeddingMatrix& cand_emb) {
  VerificationOutcome out;
  for (const Detection& det : cands.candidates) {
    auto idx = cand_emb.find(embedding_key(det.id));
    if (!idx) {
      throw MissingEmbedding("candidate detection " + std::to_string(to_int(det.id)) +
                             " has no embedding row");
    }
    const CategoryId label = c.classify(cand_emb.row(*idx));
    out.knn_label[det.id] = label;
    (label == det.category ? out.verified : out.rejected).push_back(det);
  }
  return out;
}

namespace {

void write_with_labels(std::span<const Detection> dets,
                       const std::map<DetectionId, CategoryId>& labels,
                       const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : dets) {
    nlohmann::json rec = {{"id", to_int(d.id)},
                          {"image_id", to_int(d.image_id)},
                          {"category_id", to_int(d.category)},
                          {"bbox", {d.box.x, d.box.y, d.box.w, d.box.h}},
                          {"score", d.score}};
    if (auto it = labels.find(d.id); it != labels.end()) {
      rec["knn_label"] = to_int(it->second);
    }
    arr.push_back(std::move(rec));
  }
  json_io::write_file(path, arr);
}

}  // namespace

void save_verification(const VerificationOutcome& outcome,
                       const std::filesystem::path& verified_path,
                       const std::filesystem::path& rejected_path) {
  write_with_labels(outcome.verified, outcome.knn_label, verified_path);
  write_with_labels(outcome.rejected, outcome.knn_label, rejected_path);
}

}  // namespace lvc
