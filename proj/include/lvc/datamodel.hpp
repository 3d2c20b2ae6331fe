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
#ifndef LVC_DATAMODEL_HPP_
#define LVC_DATAMODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lvc/geometry.hpp"

namespace lvc {

enum class ImageId : std::int64_t {};
enum class CategoryId : std::int64_t {};
enum class AnnotationId : std::int64_t {};
enum class DetectionId : std::int64_t {};

template <typename Id>
constexpr std::int64_t to_int(Id id) {
  return static_cast<std::int64_t>(id);
}

// Embedding-container key of an annotation or detection: its decimal id.
template <typename Id>
std::string embedding_key(Id id) {
  return std::to_string(to_int(id));
}

enum class AnnotationSource { kGroundTruth, kFewShot, kPseudo, kIgnore };

std::string_view to_string(AnnotationSource source);
std::optional<AnnotationSource> parse_annotation_source(std::string_view s);

struct Annotation {
  AnnotationId id{};
  ImageId image_id{};
  Box box;
  CategoryId category{};
  bool is_pseudo = false;
  // Ignore regions carry no trusted label for the classification loss.
  bool is_ignore = false;
  AnnotationSource source = AnnotationSource::kGroundTruth;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
  DetectionId id{};
  ImageId image_id{};
  Box box;
  CategoryId category{};
  double score = 0.0;  // confidence q in [0, 1]

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Dataset {
  std::map<ImageId, ImageExtent> images;
  std::map<CategoryId, std::string> categories;
  std::vector<Annotation> annotations;

  // Throws IntegrityError naming the first offending record: dangling image
  // or category reference, duplicate annotation id, invalid box or extent.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct FewShotSplit {
  std::set<CategoryId> base_categories;
  std::set<CategoryId> novel_categories;
  int shots = 0;
  // Exactly `shots` annotations per novel category, ordered by
  // (category, annotation id).
  std::vector<Annotation> novel_annotations;

  bool is_novel(CategoryId c) const { return novel_categories.contains(c); }
  bool is_base(CategoryId c) const { return base_categories.contains(c); }

  friend bool operator==(const FewShotSplit&, const FewShotSplit&) = default;
};

// Dense float32 rows bound to unique string keys.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Throws ShapeError when values.size() != keys.size() * dim, KeyError on a
  // duplicate key, and RangeError on a non-finite entry.
  EmbeddingMatrix(int dim, std::vector<std::string> keys,
                  std::vector<float> values);

  int dim() const { return dim_; }
  std::size_t rows() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<float>& values() const { return values_; }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  std::optional<std::size_t> find(const std::string& key) const;
  // Throws MissingEmbedding when the key is absent.
  std::span<const float> at(const std::string& key) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_ && a.values_ == b.values_;
  }

 private:
  int dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Locations of the two files of an embedding container.
struct EmbeddingPaths {
  std::filesystem::path data;
  std::filesystem::path manifest;

  // "<name>" expands to "<name>.f32" + "<name>.manifest.json"; an explicit
  // "data,manifest" pair is taken verbatim.
  static EmbeddingPaths parse(const std::string& spec);
};

Dataset load_dataset(const std::filesystem::path& path);
void save_annotations(const Dataset& d, const std::filesystem::path& path);

// A bare JSON array of annotation records, or any object whose
// "annotations" member is one. Image and category references are not
// checked here. Throws ParseError or IntegrityError on a duplicate id.
std::vector<Annotation> load_annotation_list(const std::filesystem::path& path);
void save_annotation_list(std::span<const Annotation> anns,
                          const std::filesystem::path& path);

std::vector<Detection> load_detections(const std::filesystem::path& path);
void save_detections(std::span<const Detection> dets,
                     const std::filesystem::path& path);

EmbeddingMatrix load_embeddings(const std::filesystem::path& data_path,
                                const std::filesystem::path& manifest_path);
void save_embeddings(const EmbeddingMatrix& m,
                     const std::filesystem::path& data_path,
                     const std::filesystem::path& manifest_path);

FewShotSplit load_split(const std::filesystem::path& path);
void save_split(const FewShotSplit& split, const std::filesystem::path& path);

// Seeded uniform sample of exactly `shots` annotations per novel category.
// Per category, the candidate ids are sorted ascending and a partial
// Fisher-Yates shuffle driven by std::mt19937_64 seeded from
// (seed, category) picks the first `shots` positions. Ignore
// annotations are never sampled. Base categories are the complement of
// `novel` within the dataset's category table.
FewShotSplit make_few_shot_split(const Dataset& d,
                                 const std::set<CategoryId>& novel, int shots,
                                 std::uint64_t seed);

// Builds a split from an explicit list of annotation ids (published shot
// lists); the list must name exactly `shots` annotations per novel category.
FewShotSplit make_few_shot_split_from_ids(
    const Dataset& d, const std::set<CategoryId>& novel, int shots,
    std::span<const AnnotationId> ids);

}  // namespace lvc

#endif  // LVC_DATAMODEL_HPP_
