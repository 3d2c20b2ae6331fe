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
#include "lvc/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "lvc/errors.hpp"
#include "lvc/random.hpp"

namespace lvc {

namespace {

using nlohmann::json;

constexpr int kCenterAttempts = 10000;
constexpr int kJitterAttempts = 100;

double read_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("'" + key + "' must be a number");
  return j.get<double>();
}

int read_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return j.get<int>();
}

std::vector<double> random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (double& x : v) {
      x = n(rng);
      norm2 += x * x;
    }
    if (norm2 < 1e-12) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double angle_deg(const std::vector<double>& a, const std::vector<double>& b) {
  return std::acos(std::clamp(dot(a, b), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

std::vector<double> perturb_on_sphere(const std::vector<double>& center, double sigma,
                                      std::mt19937_64& rng) {
  const std::size_t d = center.size();
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> t(d);
  for (double& x : t) x = n(rng);
  if (sigma <= 0.0 || d < 2) return center;
  const double along = dot(t, center);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    t[i] -= along * center[i];
    norm2 += t[i] * t[i];
  }
  if (norm2 < 1e-24) return center;
  const double scale = sigma / std::sqrt(static_cast<double>(d - 1));
  const double theta = std::sqrt(norm2) * scale;
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<double> out(d);
  double out2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = std::cos(theta) * center[i] + std::sin(theta) * t[i] * inv;
    out2 += out[i] * out[i];
  }
  const double r = 1.0 / std::sqrt(out2);
  for (double& x : out) x *= r;
  return out;
}

Box random_object_box(const WorldConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(cfg.box_min_frac, cfg.box_max_frac);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = frac(rng) * cfg.extent.width;
  const double h = frac(rng) * cfg.extent.height;
  const double x = unit(rng) * (cfg.extent.width - w);
  const double y = unit(rng) * (cfg.extent.height - h);
  return Box{x, y, w, h};
}

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must lie in [0, 1]");
}

}  // namespace

void WorldConfig::validate() const {
  if (n_base < 1 || n_novel < 1 || emb_dim < 2 || n_images < 1 || n_test_images < 1 ||
      objects_min < 1 || objects_max < objects_min || shots < 1) {
    throw ConfigError("world config: counts must be positive (emb_dim >= 2)");
  }
  if (!(cluster_angle_min > 0.0 && cluster_angle_min <= 90.0)) {
    throw ConfigError("world config: cluster_angle_min must lie in (0, 90]");
  }
  if (!(intra_sigma >= 0.0) || !std::isfinite(intra_sigma)) {
    throw ConfigError("world config: intra_sigma must be finite and non-negative");
  }
  if (!extent.valid()) throw ConfigError("world config: extent must be positive");
  if (!(box_min_frac > 0.0 && box_min_frac <= box_max_frac && box_max_frac <= 1.0)) {
    throw ConfigError("world config: need 0 < box_min_frac <= box_max_frac <= 1");
  }
}

WorldConfig WorldConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("world config must be a JSON object");
  WorldConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "n_base") c.n_base = read_int(v, key);
    else if (key == "n_novel") c.n_novel = read_int(v, key);
    else if (key == "emb_dim") c.emb_dim = read_int(v, key);
    else if (key == "cluster_angle_min") c.cluster_angle_min = read_number(v, key);
    else if (key == "intra_sigma") c.intra_sigma = read_number(v, key);
    else if (key == "n_images") c.n_images = read_int(v, key);
    else if (key == "n_test_images") c.n_test_images = read_int(v, key);
    else if (key == "objects_per_image") {
      if (!v.is_array() || v.size() != 2) {
        throw ConfigError("'objects_per_image' must be [min, max]");
      }
      c.objects_min = read_int(v[0], key);
      c.objects_max = read_int(v[1], key);
    } else if (key == "extent") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("'extent' must be [width, height]");
      c.extent = ImageExtent{read_int(v[0], key), read_int(v[1], key)};
    } else if (key == "box_frac") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("'box_frac' must be [min, max]");
      c.box_min_frac = read_number(v[0], key);
      c.box_max_frac = read_number(v[1], key);
    } else if (key == "K" || key == "shots") {
      c.shots = read_int(v, key);
    } else {
      throw ConfigError("world config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json WorldConfig::to_json() const {
  return {{"n_base", n_base},
          {"n_novel", n_novel},
          {"emb_dim", emb_dim},
          {"cluster_angle_min", cluster_angle_min},
          {"intra_sigma", intra_sigma},
          {"n_images", n_images},
          {"n_test_images", n_test_images},
          {"objects_per_image", {objects_min, objects_max}},
          {"extent", {extent.width, extent.height}},
          {"box_frac", {box_min_frac, box_max_frac}},
          {"K", shots}};
}

void DetectorNoise::validate(int n_classes) const {
  check_probability(miss_rate, "miss_rate");
  check_probability(confusion_offdiag, "confusion_offdiag");
  for (const auto& [c, p] : miss_rate_overrides) {
    check_probability(p, "miss rate of class " + std::to_string(to_int(c)));
  }
  if (!(box_jitter_sigma >= 0.0) || !std::isfinite(box_jitter_sigma)) {
    throw ConfigError("box_jitter_sigma must be finite and non-negative");
  }
  if (!(score.sigma >= 0.0) || !std::isfinite(score.tp_mean) ||
      !std::isfinite(score.fp_mean) || !std::isfinite(score.sigma)) {
    throw ConfigError("score model must be finite with sigma >= 0");
  }
  if (!(false_positives_per_image >= 0.0) || !std::isfinite(false_positives_per_image)) {
    throw ConfigError("false_positives_per_image must be finite and non-negative");
  }
  if (confusion.empty()) return;
  if (static_cast<int>(confusion.size()) != n_classes) {
    throw ConfigError("confusion matrix must have one row per class");
  }
  for (std::size_t r = 0; r < confusion.size(); ++r) {
    if (static_cast<int>(confusion[r].size()) != n_classes) {
      throw ConfigError("confusion row " + std::to_string(r) + " has the wrong length");
    }
    double sum = 0.0;
    for (double p : confusion[r]) {
      check_probability(p, "confusion entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("confusion row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

std::vector<std::vector<double>> DetectorNoise::confusion_matrix(int n_classes) const {
  if (!confusion.empty()) return confusion;
  const auto n = static_cast<std::size_t>(n_classes);
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    if (n == 1) {
      m[r][r] = 1.0;
      continue;
    }
    for (std::size_t c = 0; c < n; ++c) {
      m[r][c] = r == c ? 1.0 - confusion_offdiag
                       : confusion_offdiag / static_cast<double>(n - 1);
    }
  }
  return m;
}

double DetectorNoise::miss_rate_for(CategoryId c) const {
  auto it = miss_rate_overrides.find(c);
  return it == miss_rate_overrides.end() ? miss_rate : it->second;
}

DetectorNoise DetectorNoise::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("noise config must be a JSON object");
  DetectorNoise n;
  for (const auto& [key, v] : j.items()) {
    if (key == "miss_rate") {
      n.miss_rate = read_number(v, key);
    } else if (key == "confusion_offdiag") {
      n.confusion_offdiag = read_number(v, key);
    } else if (key == "confusion") {
      if (!v.is_array()) throw ConfigError("'confusion' must be a matrix");
      for (const json& row : v) {
        if (!row.is_array()) throw ConfigError("'confusion' must be a matrix");
        std::vector<double> r;
        for (const json& x : row) r.push_back(read_number(x, key));
        n.confusion.push_back(std::move(r));
      }
    } else if (key == "miss_rate_overrides") {
      if (!v.is_object()) throw ConfigError("'miss_rate_overrides' must map ids to rates");
      for (const auto& [id, rate] : v.items()) {
        try {
          n.miss_rate_overrides[CategoryId{std::stoll(id)}] = read_number(rate, key);
        } catch (const std::logic_error&) {
          throw ConfigError("'miss_rate_overrides' key '" + id + "' is not a category id");
        }
      }
    } else if (key == "box_jitter_sigma") {
      n.box_jitter_sigma = read_number(v, key);
    } else if (key == "score_model") {
      if (!v.is_object()) throw ConfigError("'score_model' must be an object");
      for (const auto& [sk, sv] : v.items()) {
        if (sk == "tp_mean") n.score.tp_mean = read_number(sv, sk);
        else if (sk == "fp_mean") n.score.fp_mean = read_number(sv, sk);
        else if (sk == "sigma") n.score.sigma = read_number(sv, sk);
        else throw ConfigError("score_model: unknown key '" + sk + "'");
      }
    } else if (key == "false_positives_per_image") {
      n.false_positives_per_image = read_number(v, key);
    } else {
      throw ConfigError("noise config: unknown key '" + key + "'");
    }
  }
  return n;
}

json DetectorNoise::to_json() const {
  json j = {{"miss_rate", miss_rate},
            {"confusion_offdiag", confusion_offdiag},
            {"box_jitter_sigma", box_jitter_sigma},
            {"score_model",
             {{"tp_mean", score.tp_mean}, {"fp_mean", score.fp_mean}, {"sigma", score.sigma}}},
            {"false_positives_per_image", false_positives_per_image}};
  if (!confusion.empty()) j["confusion"] = confusion;
  if (!miss_rate_overrides.empty()) {
    json o = json::object();
    for (const auto& [c, p] : miss_rate_overrides) o[std::to_string(to_int(c))] = p;
    j["miss_rate_overrides"] = o;
  }
  return j;
}

DetectorNoise DetectorNoise::noiseless() {
  DetectorNoise n;
  n.miss_rate = 0.0;
  n.confusion_offdiag = 0.0;
  n.box_jitter_sigma = 0.0;
  n.score = ScoreModel{1.0, 1.0, 0.0};
  return n;
}

std::set<CategoryId> WorldTruth::base_categories() const {
  std::set<CategoryId> out;
  for (int c = 1; c <= cfg.n_base; ++c) out.insert(CategoryId{c});
  return out;
}

std::set<CategoryId> WorldTruth::novel_categories() const {
  std::set<CategoryId> out;
  for (int c = cfg.n_base + 1; c <= cfg.n_classes(); ++c) out.insert(CategoryId{c});
  return out;
}

const HiddenObject& WorldTruth::object(AnnotationId id) const {
  auto it = object_index.find(id);
  if (it == object_index.end()) {
    throw KeyError("no hidden object with id " + std::to_string(to_int(id)));
  }
  return objects[it->second];
}

WorldTruth generate_world(const WorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WorldTruth w;
  w.cfg = cfg;
  w.seed = seed;

  // Class centers, then the background center, all mutually separated.
  std::mt19937_64 center_rng = seeded_rng(seed, 1);
  std::vector<std::vector<double>> placed;
  const int n_centers = cfg.n_classes() + 1;
  for (int i = 0; i < n_centers; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < kCenterAttempts && !ok; ++attempt) {
      std::vector<double> v = random_unit(center_rng, cfg.emb_dim);
      ok = std::all_of(placed.begin(), placed.end(), [&](const std::vector<double>& p) {
        return angle_deg(v, p) >= cfg.cluster_angle_min;
      });
      if (ok) placed.push_back(std::move(v));
    }
    if (!ok) {
      throw CenterPlacementFailure("could not place center " + std::to_string(i + 1) +
                                   " of " + std::to_string(n_centers) + " at >= " +
                                   std::to_string(cfg.cluster_angle_min) + " degrees in " +
                                   std::to_string(cfg.emb_dim) + " dimensions");
    }
  }
  for (int c = 1; c <= cfg.n_classes(); ++c) {
    w.centers[CategoryId{c}] = placed[static_cast<std::size_t>(c - 1)];
    const std::string name = (c <= cfg.n_base ? "base_" : "novel_") + std::to_string(c);
    w.dataset.categories[CategoryId{c}] = name;
    w.test_dataset.categories[CategoryId{c}] = name;
  }
  w.background_center = placed.back();

  std::mt19937_64 rng = seeded_rng(seed, 2);
  std::uniform_int_distribution<int> n_objects(cfg.objects_min, cfg.objects_max);
  std::uniform_int_distribution<int> klass(1, cfg.n_classes());
  std::vector<std::string> keys;
  std::vector<float> values;
  std::int64_t next_ann = 1;
  const int total_images = cfg.n_images + cfg.n_test_images;
  for (int i = 1; i <= total_images; ++i) {
    const bool test = i > cfg.n_images;
    const ImageId image{i};
    Dataset& target = test ? w.test_dataset : w.dataset;
    target.images[image] = cfg.extent;
    const int count = n_objects(rng);
    for (int k = 0; k < count; ++k) {
      HiddenObject obj;
      obj.id = AnnotationId{next_ann++};
      obj.image_id = image;
      obj.true_class = CategoryId{klass(rng)};
      obj.true_box = random_object_box(cfg, rng);
      obj.test = test;
      const std::vector<double> e =
          perturb_on_sphere(w.centers.at(obj.true_class), cfg.intra_sigma, rng);
      keys.push_back(embedding_key(obj.id));
      for (double x : e) values.push_back(static_cast<float>(x));

      Annotation a;
      a.id = obj.id;
      a.image_id = image;
      a.box = obj.true_box;
      a.category = obj.true_class;
      target.annotations.push_back(a);
      w.object_index[obj.id] = w.objects.size();
      w.objects.push_back(obj);
    }
  }
  w.true_embeddings = EmbeddingMatrix(cfg.emb_dim, std::move(keys), std::move(values));
  w.dataset.validate();
  w.test_dataset.validate();
  return w;
}

SimulatedDetections simulate_detector(const WorldTruth& world, const DetectorNoise& noise,
                                      std::uint64_t seed, ImageSet images) {
  const WorldConfig& cfg = world.cfg;
  noise.validate(cfg.n_classes());
  const auto confusion = noise.confusion_matrix(cfg.n_classes());
  const bool want_test = images == ImageSet::kTest;
  std::mt19937_64 rng = seeded_rng(seed, want_test ? 11 : 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimulatedDetections out;
  std::vector<std::string> keys;
  std::vector<float> values;
  std::int64_t next_det = 1;
  auto draw_score = [&](double mean) {
    return std::clamp(mean + noise.score.sigma * normal(rng), 0.0, 1.0);
  };

  for (const HiddenObject& obj : world.objects) {
    if (obj.test != want_test) continue;
    DetectorEvent ev;
    ev.object = obj.id;
    ev.image_id = obj.image_id;
    ev.true_class = obj.true_class;
    if (unit(rng) < noise.miss_rate_for(obj.true_class)) {
      ev.kind = DetectorEvent::Kind::kMiss;
      ev.box = obj.true_box;
      out.events.push_back(ev);
      continue;
    }
    const auto& row = confusion[static_cast<std::size_t>(to_int(obj.true_class) - 1)];
    std::discrete_distribution<int> label_dist(row.begin(), row.end());
    const CategoryId label{label_dist(rng) + 1};

    // Corner offsets scale with the box size; sizes jitter log-normally, so
    // a box only degenerates when clipping pushes it off the image.
    const double s = noise.box_jitter_sigma;
    Box box = obj.true_box;
    int draws = 0;
    for (; draws < kJitterAttempts; ++draws) {
      const double zx = normal(rng), zy = normal(rng), zw = normal(rng), zh = normal(rng);
      if (s == 0.0) break;
      Box j{obj.true_box.x + s * obj.true_box.w * zx, obj.true_box.y + s * obj.true_box.h * zy,
            obj.true_box.w * std::exp(s * zw), obj.true_box.h * std::exp(s * zh)};
      j = clip(j, cfg.extent);
      if (j.has_positive_size()) {
        box = j;
        break;
      }
    }
    const bool confused = label != obj.true_class;
    Detection d;
    d.id = DetectionId{next_det++};
    d.image_id = obj.image_id;
    d.box = box;
    d.category = label;
    d.score = draw_score(confused ? noise.score.fp_mean : noise.score.tp_mean);
    out.detections.push_back(d);
    out.source_object[d.id] = obj.id;
    keys.push_back(embedding_key(d.id));
    const auto emb = world.true_embeddings.at(embedding_key(obj.id));
    values.insert(values.end(), emb.begin(), emb.end());

    ev.kind = DetectorEvent::Kind::kDetection;
    ev.detection = d.id;
    ev.label = label;
    ev.box = box;
    ev.score = d.score;
    ev.confused = confused;
    ev.jitter_draws = draws + 1;
    out.events.push_back(ev);
  }

  if (noise.false_positives_per_image > 0.0) {
    std::poisson_distribution<int> n_fp(noise.false_positives_per_image);
    std::uniform_int_distribution<int> klass(1, cfg.n_classes());
    const Dataset& ds = want_test ? world.test_dataset : world.dataset;
    for (const auto& [image, extent] : ds.images) {
      const int count = n_fp(rng);
      for (int k = 0; k < count; ++k) {
        Detection d;
        d.id = DetectionId{next_det++};
        d.image_id = image;
        d.box = random_object_box(cfg, rng);
        d.category = CategoryId{klass(rng)};
        d.score = draw_score(noise.score.fp_mean);
        const std::vector<double> e =
            perturb_on_sphere(world.background_center, cfg.intra_sigma, rng);
        keys.push_back(embedding_key(d.id));
        for (double x : e) values.push_back(static_cast<float>(x));
        out.detections.push_back(d);

        DetectorEvent ev;
        ev.kind = DetectorEvent::Kind::kFalsePositive;
        ev.detection = d.id;
        ev.image_id = image;
        ev.label = d.category;
        ev.box = d.box;
        ev.score = d.score;
        ev.confused = true;
        out.events.push_back(ev);
      }
    }
  }
  out.embeddings = EmbeddingMatrix(cfg.emb_dim, std::move(keys), std::move(values));
  return out;
}

std::vector<double> oracle_feature(const Box& box, const HiddenObject& hidden,
                                   const WorldTruth& world) {
  const BoxDelta d = encode_deltas(box, hidden.true_box);
  std::vector<double> f = {d.dx, d.dy, d.dw, d.dh};
  const auto& c = world.centers.at(hidden.true_class);
  f.insert(f.end(), c.begin(), c.end());
  return f;
}

void write_truth_log(const WorldTruth& world, const SimulatedDetections& sim,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  auto box_json = [](const Box& b) { return json::array({b.x, b.y, b.w, b.h}); };

  json centers = json::object();
  for (const auto& [c, v] : world.centers) centers[std::to_string(to_int(c))] = v;
  json header = {{"type", "header"},
                 {"config", world.cfg.to_json()},
                 {"seed", world.seed},
                 {"centers", centers},
                 {"background_center", world.background_center}};
  out << header.dump() << '\n';
  for (const HiddenObject& o : world.objects) {
    json j = {{"type", "object"},
              {"id", to_int(o.id)},
              {"image_id", to_int(o.image_id)},
              {"true_class", to_int(o.true_class)},
              {"true_box", box_json(o.true_box)},
              {"split", o.test ? "test" : "train"}};
    out << j.dump() << '\n';
  }
  for (const DetectorEvent& e : sim.events) {
    json j = {{"type", "event"}, {"image_id", to_int(e.image_id)}};
    switch (e.kind) {
      case DetectorEvent::Kind::kMiss:
        j["kind"] = "miss";
        break;
      case DetectorEvent::Kind::kDetection:
        j["kind"] = "detection";
        break;
      case DetectorEvent::Kind::kFalsePositive:
        j["kind"] = "false_positive";
        break;
    }
    if (e.object) {
      j["object"] = to_int(*e.object);
      j["true_class"] = to_int(e.true_class);
    }
    if (e.detection) {
      j["detection"] = to_int(*e.detection);
      j["label"] = to_int(e.label);
      j["box"] = box_json(e.box);
      j["score"] = e.score;
      j["confused"] = e.confused;
      j["jitter_draws"] = e.jitter_draws;
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace lvc
