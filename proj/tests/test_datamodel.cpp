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

#include <fstream>

#include "lvc/datamodel.hpp"
#include "lvc/errors.hpp"
#include "lvc/json_io.hpp"
#include "test_util.hpp"

namespace lvc {
namespace {

using testing::ann;
using testing::det;
using testing::TempDir;

Dataset sample_dataset() {
  Dataset d;
  d.images = {{ImageId{1}, ImageExtent{640, 480}}, {ImageId{2}, ImageExtent{320, 240}}};
  d.categories = {{CategoryId{1}, "cat"}, {CategoryId{2}, "dog"}, {CategoryId{3}, "emu"}};
  for (int i = 0; i < 12; ++i) {
    d.annotations.push_back(ann(i + 1, 1 + i % 2, {1.5 * i, 2.0, 10.25, 20.0}, 1 + i % 3));
  }
  d.annotations.push_back(ann(50, 1, {0, 0, 30, 30}, 2, true));
  return d;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(Dataset, RoundTrip) {
  TempDir dir("dm");
  const Dataset d = sample_dataset();
  save_annotations(d, dir / "d.json");
  EXPECT_EQ(load_dataset(dir / "d.json"), d);
}

TEST(Dataset, CrowdFlagBecomesIgnore) {
  TempDir dir("dm");
  write_text(dir / "d.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "categories":[{"id":1,"name":"a"}],
    "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[0,0,2,2],"iscrowd":1}]})");
  const Dataset d = load_dataset(dir / "d.json");
  ASSERT_EQ(d.annotations.size(), 1u);
  EXPECT_TRUE(d.annotations[0].is_ignore);
  EXPECT_EQ(d.annotations[0].source, AnnotationSource::kIgnore);
}

TEST(Dataset, IntegrityAndParseErrors) {
  TempDir dir("dm");
  write_text(dir / "dangling.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "categories":[{"id":1}],
    "annotations":[{"id":1,"image_id":9,"category_id":1,"bbox":[0,0,2,2]}]})");
  EXPECT_THROW(load_dataset(dir / "dangling.json"), IntegrityError);
  write_text(dir / "dup.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "categories":[{"id":1}],
    "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[0,0,2,2]},
                   {"id":1,"image_id":1,"category_id":1,"bbox":[0,0,3,2]}]})");
  EXPECT_THROW(load_dataset(dir / "dup.json"), IntegrityError);
  write_text(dir / "negbox.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "categories":[{"id":1}],
    "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[0,0,-2,2]}]})");
  EXPECT_THROW(load_dataset(dir / "negbox.json"), ParseError);
  write_text(dir / "broken.json", "{\"images\": [");
  EXPECT_THROW(load_dataset(dir / "broken.json"), ParseError);
  write_text(dir / "noarrays.json", "{}");
  EXPECT_THROW(load_dataset(dir / "noarrays.json"), ParseError);
  EXPECT_THROW(load_dataset(dir / "absent.json"), IoError);
}

TEST(Detections, RoundTripAndValidation) {
  TempDir dir("dm");
  const std::vector<Detection> dets = {det(3, 1, {1, 2, 3, 4}, 2, 0.25),
                                       det(9, 2, {0.5, 0, 7, 1}, 1, 1.0)};
  save_detections(dets, dir / "d.json");
  EXPECT_EQ(load_detections(dir / "d.json"), dets);

  write_text(dir / "noid.json", R"([{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":0.5},
    {"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":0.4}])");
  const auto implicit = load_detections(dir / "noid.json");
  EXPECT_EQ(implicit[0].id, DetectionId{1});
  EXPECT_EQ(implicit[1].id, DetectionId{2});

  write_text(dir / "score.json", R"([{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":1.5}])");
  EXPECT_THROW(load_detections(dir / "score.json"), RangeError);
  write_text(dir / "obj.json", R"({"image_id":1})");
  EXPECT_THROW(load_detections(dir / "obj.json"), ParseError);
}

TEST(AnnotationList, RoundTripAndDatasetInput) {
  TempDir dir("dm");
  const Dataset d = sample_dataset();
  save_annotation_list(d.annotations, dir / "a.json");
  EXPECT_EQ(load_annotation_list(dir / "a.json"), d.annotations);
  save_annotations(d, dir / "d.json");
  EXPECT_EQ(load_annotation_list(dir / "d.json"), d.annotations);
}

TEST(Embeddings, RoundTripAndPaths) {
  TempDir dir("dm");
  const EmbeddingMatrix m(3, {"1", "22", "5"}, {1, 2, 3, 4, 5, 6, -7, 8.5f, 9});
  save_embeddings(m, dir / "e.f32", dir / "e.manifest.json");
  const EmbeddingPaths p = EmbeddingPaths::parse((dir / "e").string());
  EXPECT_EQ(p.data, dir / "e.f32");
  EXPECT_EQ(p.manifest, dir / "e.manifest.json");
  const EmbeddingMatrix back = load_embeddings(p.data, p.manifest);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.at("22")[1], 5.0f);
  EXPECT_THROW(back.at("4"), MissingEmbedding);
  const EmbeddingPaths explicit_pair = EmbeddingPaths::parse("a.bin,b.json");
  EXPECT_EQ(explicit_pair.data, "a.bin");
  EXPECT_EQ(explicit_pair.manifest, "b.json");
}

TEST(Embeddings, ShapeAndKeyErrors) {
  EXPECT_THROW(EmbeddingMatrix(2, {"1"}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(EmbeddingMatrix(1, {"1", "1"}, {1, 2}), KeyError);
  EXPECT_THROW(EmbeddingMatrix(1, {"1"}, {std::numeric_limits<float>::quiet_NaN()}),
               RangeError);
  TempDir dir("dm");
  const EmbeddingMatrix m(2, {"1", "2"}, {1, 2, 3, 4});
  save_embeddings(m, dir / "e.f32", dir / "e.manifest.json");
  std::filesystem::resize_file(dir / "e.f32", 12);
  EXPECT_ANY_THROW(load_embeddings(dir / "e.f32", dir / "e.manifest.json"));
}

TEST(Split, SeededSampleIsExactAndDeterministic) {
  const Dataset d = sample_dataset();
  const std::set<CategoryId> novel = {CategoryId{2}, CategoryId{3}};
  const FewShotSplit a = make_few_shot_split(d, novel, 2, 42);
  const FewShotSplit b = make_few_shot_split(d, novel, 2, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.base_categories, (std::set<CategoryId>{CategoryId{1}}));
  std::map<CategoryId, int> per;
  for (const Annotation& x : a.novel_annotations) {
    ++per[x.category];
    EXPECT_FALSE(x.is_ignore);
  }
  EXPECT_EQ(per[CategoryId{2}], 2);
  EXPECT_EQ(per[CategoryId{3}], 2);

  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) {
    differs = make_few_shot_split(d, novel, 2, s) != a;
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(make_few_shot_split(d, novel, 5, 1), InsufficientShots);
}

TEST(Split, FromIdsAndFileRoundTrip) {
  TempDir dir("dm");
  const Dataset d = sample_dataset();
  const std::vector<AnnotationId> ids = {AnnotationId{2}, AnnotationId{3}};
  const FewShotSplit s =
      make_few_shot_split_from_ids(d, {CategoryId{2}, CategoryId{3}}, 1, ids);
  save_split(s, dir / "s.json");
  EXPECT_EQ(load_split(dir / "s.json"), s);
  const std::vector<AnnotationId> wrong = {AnnotationId{2}, AnnotationId{5}};
  EXPECT_ANY_THROW(make_few_shot_split_from_ids(d, {CategoryId{2}, CategoryId{3}}, 1, wrong));
}

}  // namespace
}  // namespace lvc
