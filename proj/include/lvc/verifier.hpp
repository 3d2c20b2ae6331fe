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
#ifndef LVC_VERIFIER_HPP_
#define LVC_VERIFIER_HPP_

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "lvc/datamodel.hpp"
#include "lvc/sourcing.hpp"

namespace lvc {

// Neighbour count used for label verification given K shots:
// min(floor(K/3) + 1, 10).
int k_for_shots(int shots);

// Cosine-similarity kNN over L2-normalized few-shot embeddings.
//
// classify() ranks training rows by descending cosine similarity (equal
// similarities: smaller row index first), takes the top k and returns the
// majority label. Equal vote counts go to the label whose best-ranked
// neighbour comes first.
class KnnClassifier {
 public:
  // Rows are normalized here; a zero row throws NormalizationError.
  // Throws BadK unless 1 <= k <= rows.
  KnnClassifier(int dim, std::vector<std::vector<float>> rows,
                std::vector<CategoryId> labels, int k);

  int dim() const { return dim_; }
  int k() const { return k_; }
  std::size_t rows() const { return labels_.size(); }
  const std::vector<CategoryId>& labels() const { return labels_; }
  std::span<const double> normalized_row(std::size_t i) const {
    return {rows_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }

  // Throws DimensionMismatch or ZeroVector.
  CategoryId classify(std::span<const float> v) const;

 private:
  int dim_;
  int k_;
  std::vector<double> rows_;
  std::vector<CategoryId> labels_;
};

// Classifier over exactly the split's few-shot annotations, looked up in
// `emb` by embedding_key(annotation id). Throws MissingEmbedding or BadK.
KnnClassifier build_knn(const FewShotSplit& split, const EmbeddingMatrix& emb,
                        int k);

struct VerificationOutcome {
  std::vector<Detection> verified;
  std::vector<Detection> rejected;
  std::map<DetectionId, CategoryId> knn_label;
};

// A candidate is verified iff the kNN label equals its detector label.
// Candidate embeddings are looked up by embedding_key(detection id).
VerificationOutcome verify(const CandidateSet& cands, const KnnClassifier& c,
                           const EmbeddingMatrix& cand_emb);

// Results-format files with an extra "knn_label" field per record.
void save_verification(const VerificationOutcome& outcome,
                       const std::filesystem::path& verified_path,
                       const std::filesystem::path& rejected_path);

}  // namespace lvc

#endif  // LVC_VERIFIER_HPP_
