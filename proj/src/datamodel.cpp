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
#include "lvc/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "lvc/errors.hpp"
#include "lvc/random.hpp"
#include "lvc/json_io.hpp"

namespace lvc {

using nlohmann::json;

std::string_view to_string(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::kGroundTruth:
      return "groundtruth";
    case AnnotationSource::kFewShot:
      return "fewshot";
    case AnnotationSource::kPseudo:
      return "pseudo";
    case AnnotationSource::kIgnore:
      return "ignore";
  }
  return "groundtruth";
}

std::optional<AnnotationSource> parse_annotation_source(std::string_view s) {
  if (s == "groundtruth") return AnnotationSource::kGroundTruth;
  if (s == "fewshot") return AnnotationSource::kFewShot;
  if (s == "pseudo") return AnnotationSource::kPseudo;
  if (s == "ignore") return AnnotationSource::kIgnore;
  return std::nullopt;
}

void Dataset::validate() const {
  for (const auto& [id, extent] : images) {
    if (!extent.valid()) {
      throw IntegrityError("image " + std::to_string(to_int(id)) +
                           " has a non-positive extent");
    }
  }
  std::unordered_set<std::int64_t> seen;
  for (const Annotation& a : annotations) {
    const std::string who = "annotation " + std::to_string(to_int(a.id));
    if (!images.contains(a.image_id)) {
      throw IntegrityError(who + " references missing image id " +
                           std::to_string(to_int(a.image_id)));
    }
    if (!categories.contains(a.category)) {
      throw IntegrityError(who + " references missing category id " +
                           std::to_string(to_int(a.category)));
    }
    if (!a.box.valid()) throw IntegrityError(who + " has an invalid box");
    if (!seen.insert(to_int(a.id)).second) {
      throw IntegrityError("duplicate annotation id " +
                           std::to_string(to_int(a.id)));
    }
  }
}

EmbeddingMatrix::EmbeddingMatrix(int dim, std::vector<std::string> keys,
                                 std::vector<float> values)
    : dim_(dim), keys_(std::move(keys)), values_(std::move(values)) {
  if (dim_ <= 0) throw ShapeError("embedding dim must be positive");
  if (values_.size() != keys_.size() * static_cast<std::size_t>(dim_)) {
    throw ShapeError("embedding values hold " + std::to_string(values_.size()) +
                     " floats, expected rows*dim = " +
                     std::to_string(keys_.size() * dim_));
  }
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!index_.emplace(keys_[i], i).second) {
      throw KeyError("duplicate embedding key '" + keys_[i] + "'");
    }
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw RangeError("non-finite embedding entry in row '" +
                       keys_[i / dim_] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingMatrix::find(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingMatrix::at(const std::string& key) const {
  auto i = find(key);
  if (!i) throw MissingEmbedding("no embedding row for key '" + key + "'");
  return row(*i);
}

EmbeddingPaths EmbeddingPaths::parse(const std::string& spec) {
  if (auto comma = spec.find(','); comma != std::string::npos) {
    return {spec.substr(0, comma), spec.substr(comma + 1)};
  }
  return {spec + ".f32", spec + ".manifest.json"};
}

// ---------------------------------------------------------------------------
// COCO-style annotation files

namespace {

json annotation_to_json(const Annotation& a) {
  return json{{"id", to_int(a.id)},
              {"image_id", to_int(a.image_id)},
              {"category_id", to_int(a.category)},
              {"bbox", json::array({a.box.x, a.box.y, a.box.w, a.box.h})},
              {"area", a.box.area()},
              {"iscrowd", a.is_ignore ? 1 : 0},
              {"is_pseudo", a.is_pseudo},
              {"is_ignore", a.is_ignore},
              {"source", std::string(to_string(a.source))}};
}

Annotation annotation_from_json(const json& j) {
  const std::string who =
      j.is_object() && j.contains("id") ? "annotation " + j["id"].dump()
                                        : "annotation";
  Annotation a;
  a.id = AnnotationId{json_io::require_int(j, "id", who)};
  a.image_id = ImageId{json_io::require_int(j, "image_id", who)};
  a.category = CategoryId{json_io::require_int(j, "category_id", who)};
  a.box = json_io::require_box(j, "bbox", who);
  const bool crowd = j.contains("iscrowd") && j["iscrowd"].is_number() &&
                     j["iscrowd"].get<int>() != 0;
  a.is_ignore = json_io::optional_bool(j, "is_ignore", who).value_or(crowd);
  a.is_pseudo = json_io::optional_bool(j, "is_pseudo", who).value_or(false);
  if (j.contains("source")) {
    if (!j["source"].is_string()) throw ParseError(who + ": 'source' must be a string");
    auto s = parse_annotation_source(j["source"].get<std::string>());
    if (!s) throw ParseError(who + ": unknown source " + j["source"].dump());
    a.source = *s;
  } else if (a.is_ignore) {
    a.source = AnnotationSource::kIgnore;
  } else if (a.is_pseudo) {
    a.source = AnnotationSource::kPseudo;
  }
  return a;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  const json root = json_io::read_file(path);
  const std::string where = path.string();
  if (!root.is_object()) throw ParseError(where + ": top level must be an object");
  for (const char* key : {"images", "categories", "annotations"}) {
    if (!root.contains(key) || !root[key].is_array()) {
      throw ParseError(where + ": missing array '" + key + "'");
    }
  }
  Dataset d;
  for (const json& im : root["images"]) {
    const std::string who =
        "image " + (im.is_object() && im.contains("id") ? im["id"].dump() : "");
    ImageId id{json_io::require_int(im, "id", who)};
    ImageExtent extent{
        static_cast<int>(json_io::require_int(im, "width", who)),
        static_cast<int>(json_io::require_int(im, "height", who))};
    if (!extent.valid()) throw ParseError(where + ": " + who + " has non-positive extent");
    if (!d.images.emplace(id, extent).second) {
      throw ParseError(where + ": duplicate " + who);
    }
  }
  for (const json& c : root["categories"]) {
    const std::string who =
        "category " + (c.is_object() && c.contains("id") ? c["id"].dump() : "");
    CategoryId id{json_io::require_int(c, "id", who)};
    if (to_int(id) < 1) throw ParseError(where + ": " + who + " id must be >= 1");
    std::string name = c.contains("name") && c["name"].is_string()
                           ? c["name"].get<std::string>()
                           : std::to_string(to_int(id));
    if (!d.categories.emplace(id, std::move(name)).second) {
      throw ParseError(where + ": duplicate " + who);
    }
  }
  d.annotations.reserve(root["annotations"].size());
  for (const json& a : root["annotations"]) {
    try {
      d.annotations.push_back(annotation_from_json(a));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  try {
    d.validate();
  } catch (const IntegrityError& e) {
    throw IntegrityError(where + ": " + e.what());
  }
  return d;
}

void save_annotations(const Dataset& d, const std::filesystem::path& path) {
  json images = json::array();
  for (const auto& [id, extent] : d.images) {
    images.push_back({{"id", to_int(id)},
                      {"width", extent.width},
                      {"height", extent.height},
                      {"file_name", std::to_string(to_int(id)) + ".jpg"}});
  }
  json categories = json::array();
  for (const auto& [id, name] : d.categories) {
    categories.push_back({{"id", to_int(id)}, {"name", name}});
  }
  json annotations = json::array();
  for (const Annotation& a : d.annotations) annotations.push_back(annotation_to_json(a));
  json_io::write_file(path, json{{"images", std::move(images)},
                                 {"categories", std::move(categories)},
                                 {"annotations", std::move(annotations)}});
}

std::vector<Annotation> load_annotation_list(const std::filesystem::path& path) {
  const json root = json_io::read_file(path);
  const std::string where = path.string();
  const json* list = &root;
  if (root.is_object() && root.contains("annotations")) list = &root["annotations"];
  if (!list->is_array()) {
    throw ParseError(where + ": expected an annotation array or an 'annotations' member");
  }
  std::vector<Annotation> out;
  out.reserve(list->size());
  std::set<AnnotationId> seen;
  for (const json& a : *list) {
    try {
      out.push_back(annotation_from_json(a));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!seen.insert(out.back().id).second) {
      throw IntegrityError(where + ": duplicate annotation id " +
                           std::to_string(to_int(out.back().id)));
    }
  }
  return out;
}

void save_annotation_list(std::span<const Annotation> anns, const std::filesystem::path& path) {
  json list = json::array();
  for (const Annotation& a : anns) list.push_back(annotation_to_json(a));
  json_io::write_file(path, list);
}

// ---------------------------------------------------------------------------
// COCO results-format detections

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  const json root = json_io::read_file(path);
  const std::string where = path.string();
  if (!root.is_array()) throw ParseError(where + ": detections must be a JSON array");
  std::vector<Detection> out;
  out.reserve(root.size());
  std::unordered_set<std::int64_t> ids;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& j = root[i];
    const std::string who = "detection #" + std::to_string(i);
    Detection det;
    det.id = DetectionId{j.is_object() && j.contains("id")
                             ? json_io::require_int(j, "id", who)
                             : static_cast<std::int64_t>(i + 1)};
    det.image_id = ImageId{json_io::require_int(j, "image_id", who)};
    det.category = CategoryId{json_io::require_int(j, "category_id", who)};
    det.box = json_io::require_box(j, "bbox", who);
    det.score = json_io::require_number(j, "score", who);
    if (!(det.score >= 0.0 && det.score <= 1.0)) {
      throw RangeError(where + ": " + who + " has score " +
                       std::to_string(det.score) + " outside [0,1]");
    }
    if (!ids.insert(to_int(det.id)).second) {
      throw ParseError(where + ": duplicate detection id " +
                       std::to_string(to_int(det.id)));
    }
    out.push_back(det);
  }
  return out;
}

void save_detections(std::span<const Detection> dets,
                     const std::filesystem::path& path) {
  json arr = json::array();
  for (const Detection& d : dets) {
    arr.push_back({{"id", to_int(d.id)},
                   {"image_id", to_int(d.image_id)},
                   {"category_id", to_int(d.category)},
                   {"bbox", json::array({d.box.x, d.box.y, d.box.w, d.box.h})},
                   {"score", d.score}});
  }
  json_io::write_file(path, arr);
}

// ---------------------------------------------------------------------------
// Embedding container: raw little-endian float32 rows + JSON manifest.

EmbeddingMatrix load_embeddings(const std::filesystem::path& data_path,
                                const std::filesystem::path& manifest_path) {
  const json manifest = json_io::read_file(manifest_path);
  const std::string where = manifest_path.string();
  if (!manifest.is_object()) throw ParseError(where + ": manifest must be an object");
  const std::int64_t dim = json_io::require_int(manifest, "dim", where);
  const std::int64_t rows = json_io::require_int(manifest, "rows", where);
  if (dim <= 0 || rows < 0) throw ShapeError(where + ": dim must be > 0 and rows >= 0");
  if (!manifest.contains("keys") || !manifest["keys"].is_array()) {
    throw ParseError(where + ": missing array 'keys'");
  }
  std::vector<std::string> keys;
  for (const json& k : manifest["keys"]) {
    if (k.is_string()) {
      keys.push_back(k.get<std::string>());
    } else if (k.is_number_integer()) {
      keys.push_back(std::to_string(k.get<std::int64_t>()));
    } else {
      throw ParseError(where + ": keys must be strings or integers");
    }
  }
  if (static_cast<std::int64_t>(keys.size()) != rows) {
    throw ShapeError(where + ": manifest lists " + std::to_string(keys.size()) +
                     " keys for " + std::to_string(rows) + " rows");
  }

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + data_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const std::size_t expected = static_cast<std::size_t>(rows * dim) * 4;
  if (bytes.size() != expected) {
    throw ShapeError(data_path.string() + ": byte length " +
                     std::to_string(bytes.size()) + " != rows*dim*4 = " +
                     std::to_string(expected));
  }
  std::vector<float> values(static_cast<std::size_t>(rows * dim));
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = (bits >> 24) | ((bits >> 8) & 0xff00u) | ((bits << 8) & 0xff0000u) |
             (bits << 24);
    }
    values[i] = std::bit_cast<float>(bits);
  }
  return EmbeddingMatrix(static_cast<int>(dim), std::move(keys), std::move(values));
}

void save_embeddings(const EmbeddingMatrix& m,
                     const std::filesystem::path& data_path,
                     const std::filesystem::path& manifest_path) {
  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + data_path.string());
  for (float v : m.values()) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    const char le[4] = {static_cast<char>(bits & 0xff),
                        static_cast<char>((bits >> 8) & 0xff),
                        static_cast<char>((bits >> 16) & 0xff),
                        static_cast<char>((bits >> 24) & 0xff)};
    out.write(le, 4);
  }
  if (!out) throw IoError("short write to " + data_path.string());
  json_io::write_file(manifest_path, json{{"dim", m.dim()},
                                          {"rows", m.rows()},
                                          {"keys", m.keys()}});
}

// ---------------------------------------------------------------------------
// Few-shot splits

FewShotSplit load_split(const std::filesystem::path& path) {
  const json root = json_io::read_file(path);
  const std::string where = path.string();
  if (!root.is_object()) throw ParseError(where + ": split must be an object");
  FewShotSplit s;
  s.shots = static_cast<int>(json_io::require_int(root, "shots", where));
  for (const char* key : {"base_categories", "novel_categories", "novel_annotations"}) {
    if (!root.contains(key) || !root[key].is_array()) {
      throw ParseError(where + ": missing array '" + key + "'");
    }
  }
  for (const json& c : root["base_categories"]) {
    if (!c.is_number_integer()) throw ParseError(where + ": category ids must be integers");
    s.base_categories.insert(CategoryId{c.get<std::int64_t>()});
  }
  for (const json& c : root["novel_categories"]) {
    if (!c.is_number_integer()) throw ParseError(where + ": category ids must be integers");
    s.novel_categories.insert(CategoryId{c.get<std::int64_t>()});
  }
  for (const json& a : root["novel_annotations"]) {
    s.novel_annotations.push_back(annotation_from_json(a));
  }
  for (CategoryId c : s.novel_categories) {
    if (s.base_categories.contains(c)) {
      throw IntegrityError(where + ": category " + std::to_string(to_int(c)) +
                           " is both base and novel");
    }
  }
  std::map<CategoryId, int> per_class;
  for (const Annotation& a : s.novel_annotations) {
    if (!s.is_novel(a.category)) {
      throw IntegrityError(where + ": shot annotation " +
                           std::to_string(to_int(a.id)) +
                           " is not of a novel category");
    }
    ++per_class[a.category];
  }
  for (CategoryId c : s.novel_categories) {
    if (per_class[c] != s.shots) {
      throw IntegrityError(where + ": novel category " + std::to_string(to_int(c)) +
                           " has " + std::to_string(per_class[c]) + " shots, expected " +
                           std::to_string(s.shots));
    }
  }
  return s;
}

void save_split(const FewShotSplit& split, const std::filesystem::path& path) {
  json base = json::array();
  for (CategoryId c : split.base_categories) base.push_back(to_int(c));
  json novel = json::array();
  for (CategoryId c : split.novel_categories) novel.push_back(to_int(c));
  json anns = json::array();
  for (const Annotation& a : split.novel_annotations) anns.push_back(annotation_to_json(a));
  json_io::write_file(path, json{{"shots", split.shots},
                                 {"base_categories", std::move(base)},
                                 {"novel_categories", std::move(novel)},
                                 {"novel_annotations", std::move(anns)}});
}

namespace {

FewShotSplit split_skeleton(const Dataset& d, const std::set<CategoryId>& novel,
                            int shots) {
  if (shots < 1) throw RangeError("shots K must be >= 1");
  FewShotSplit split;
  split.shots = shots;
  for (CategoryId c : novel) {
    if (!d.categories.contains(c)) {
      throw IntegrityError("novel category " + std::to_string(to_int(c)) +
                           " is not in the dataset");
    }
  }
  split.novel_categories = novel;
  for (const auto& [c, name] : d.categories) {
    if (!novel.contains(c)) split.base_categories.insert(c);
  }
  return split;
}

std::map<CategoryId, std::vector<const Annotation*>> shot_pool(
    const Dataset& d, const std::set<CategoryId>& novel) {
  std::map<CategoryId, std::vector<const Annotation*>> pool;
  for (CategoryId c : novel) pool[c];
  for (const Annotation& a : d.annotations) {
    if (novel.contains(a.category) && !a.is_ignore) pool[a.category].push_back(&a);
  }
  for (auto& [c, anns] : pool) {
    std::sort(anns.begin(), anns.end(), [](const Annotation* l, const Annotation* r) {
      return to_int(l->id) < to_int(r->id);
    });
  }
  return pool;
}

Annotation as_shot(const Annotation& a) {
  Annotation shot = a;
  shot.is_pseudo = false;
  shot.is_ignore = false;
  shot.source = AnnotationSource::kFewShot;
  return shot;
}

}  // namespace

FewShotSplit make_few_shot_split(const Dataset& d,
                                 const std::set<CategoryId>& novel, int shots,
                                 std::uint64_t seed) {
  FewShotSplit split = split_skeleton(d, novel, shots);
  for (auto& [category, anns] : shot_pool(d, novel)) {
    const std::size_t n = anns.size();
    if (n < static_cast<std::size_t>(shots)) {
      throw InsufficientShots("novel category " + std::to_string(to_int(category)) +
                              " has " + std::to_string(n) + " annotations, K = " +
                              std::to_string(shots));
    }
    const auto cat = static_cast<std::uint64_t>(to_int(category));
    std::mt19937_64 engine = seeded_rng(seed, cat);
    for (std::size_t i = 0; i < static_cast<std::size_t>(shots); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(anns[i], anns[pick(engine)]);
    }
    std::vector<const Annotation*> chosen(anns.begin(), anns.begin() + shots);
    std::sort(chosen.begin(), chosen.end(), [](const Annotation* l, const Annotation* r) {
      return to_int(l->id) < to_int(r->id);
    });
    for (const Annotation* a : chosen) split.novel_annotations.push_back(as_shot(*a));
  }
  return split;
}

FewShotSplit make_few_shot_split_from_ids(
    const Dataset& d, const std::set<CategoryId>& novel, int shots,
    std::span<const AnnotationId> ids) {
  FewShotSplit split = split_skeleton(d, novel, shots);
  std::set<std::int64_t> wanted;
  for (AnnotationId id : ids) wanted.insert(to_int(id));
  std::map<CategoryId, int> per_class;
  for (auto& [category, anns] : shot_pool(d, novel)) {
    for (const Annotation* a : anns) {
      if (wanted.erase(to_int(a->id))) {
        split.novel_annotations.push_back(as_shot(*a));
        ++per_class[category];
      }
    }
    if (per_class[category] != shots) {
      throw InsufficientShots("shot list names " + std::to_string(per_class[category]) +
                              " annotations of novel category " +
                              std::to_string(to_int(category)) + ", K = " +
                              std::to_string(shots));
    }
  }
  if (!wanted.empty()) {
    throw IntegrityError("shot list names annotation " +
                         std::to_string(*wanted.begin()) +
                         " which is not a novel-category annotation");
  }
  return split;
}

}  // namespace lvc
