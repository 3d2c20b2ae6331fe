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
#include "lvc/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "lvc/errors.hpp"
#include "lvc/random.hpp"
#include "lvc/retrain_prep.hpp"

namespace lvc {

namespace {

using nlohmann::json;

constexpr int kBoxAttempts = 1000;
constexpr double kBackgroundMaxIou = 0.3;
constexpr CategoryId kBackground{0};

Box jitter_box(const Box& b, double s, ImageExtent extent, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < kBoxAttempts; ++attempt) {
    const double zx = normal(rng), zy = normal(rng), zw = normal(rng), zh = normal(rng);
    if (s == 0.0) return b;
    Box j = clip(Box{b.x + s * b.w * zx, b.y + s * b.h * zy, b.w * std::exp(s * zw),
                     b.h * std::exp(s * zh)},
                 extent);
    if (j.has_positive_size()) return j;
  }
  return b;
}

void append_unit(std::vector<double>& rows, const std::vector<double>& v) {
  rows.insert(rows.end(), v.begin(), v.end());
}

// Row indices ordered by descending similarity to q, smaller index first on
// ties. Only the first `keep` entries are guaranteed sorted.
std::vector<std::pair<double, std::size_t>> ranked(const std::vector<double>& rows, int dim,
                                                   const std::vector<double>& q,
                                                   std::size_t keep) {
  const std::size_t n = rows.size() / static_cast<std::size_t>(dim);
  std::vector<std::pair<double, std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = rows.data() + i * static_cast<std::size_t>(dim);
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += r[d] * q[static_cast<std::size_t>(d)];
    out[i] = {s, i};
  }
  auto cmp = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  keep = std::min(keep, n);
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    cmp);
  out.resize(keep);
  return out;
}

int read_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return v.get<int>();
}

double read_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

SurrogateConfig SurrogateConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("surrogate config must be a JSON object");
  SurrogateConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "proposals_per_object") c.proposals_per_object = read_int(v, key);
    else if (key == "proposal_jitter") c.proposal_jitter = read_number(v, key);
    else if (key == "proposal_emb_sigma") c.proposal_emb_sigma = read_number(v, key);
    else if (key == "background_proposals") c.background_proposals = read_int(v, key);
    else if (key == "k_cls") c.k_cls = read_int(v, key);
    else if (key == "k_obj") c.k_obj = read_int(v, key);
    else if (key == "k_reg") c.k_reg = read_int(v, key);
    else if (key == "nms_iou") c.nms_iou = read_number(v, key);
    else if (key == "max_dets") c.max_dets = read_int(v, key);
    else throw ConfigError("surrogate config: unknown key '" + key + "'");
  }
  if (c.proposals_per_object < 1 || c.background_proposals < 0 || c.k_cls < 1 ||
      c.k_obj < 1 || c.k_reg < 1 || c.max_dets < 1 || !(c.proposal_jitter >= 0.0) ||
      !(c.proposal_emb_sigma >= 0.0) || !(c.nms_iou > 0.0 && c.nms_iou <= 1.0)) {
    throw ConfigError("surrogate config: parameter out of range");
  }
  return c;
}

json SurrogateConfig::to_json() const {
  return {{"proposals_per_object", proposals_per_object},
          {"proposal_jitter", proposal_jitter},
          {"proposal_emb_sigma", proposal_emb_sigma},
          {"background_proposals", background_proposals},
          {"k_cls", k_cls},
          {"k_obj", k_obj},
          {"k_reg", k_reg},
          {"nms_iou", nms_iou},
          {"max_dets", max_dets}};
}

std::vector<SurrogateProposal> generate_proposals(const WorldTruth& world, ImageSet images,
                                                  const SurrogateConfig& cfg,
                                                  std::uint64_t seed) {
  const bool want_test = images == ImageSet::kTest;
  std::mt19937_64 rng = seeded_rng(seed, want_test ? 21 : 20);
  std::map<ImageId, std::vector<const HiddenObject*>> by_image;
  for (const HiddenObject& o : world.objects) {
    if (o.test == want_test) by_image[o.image_id].push_back(&o);
  }
  const Dataset& ds = want_test ? world.test_dataset : world.dataset;

  std::vector<SurrogateProposal> out;
  for (const auto& [image, extent] : ds.images) {
    const auto it = by_image.find(image);
    if (it != by_image.end()) {
      for (const HiddenObject* o : it->second) {
        std::vector<double> emb;
        for (float x : world.true_embeddings.at(embedding_key(o->id))) emb.push_back(x);
        for (int p = 0; p < cfg.proposals_per_object; ++p) {
          SurrogateProposal sp;
          sp.image_id = image;
          sp.box = jitter_box(o->true_box, cfg.proposal_jitter, extent, rng);
          sp.object = o->id;
          sp.embedding = perturb_on_sphere(emb, cfg.proposal_emb_sigma, rng);
          out.push_back(std::move(sp));
        }
      }
    }
    for (int p = 0; p < cfg.background_proposals; ++p) {
      for (int attempt = 0; attempt < kBoxAttempts; ++attempt) {
        const Box b = random_object_box(world.cfg, rng);
        bool clear = true;
        if (it != by_image.end()) {
          for (const HiddenObject* o : it->second) {
            if (iou(b, o->true_box) >= kBackgroundMaxIou) clear = false;
          }
        }
        if (!clear) continue;
        SurrogateProposal sp;
        sp.image_id = image;
        sp.box = b;
        sp.embedding =
            perturb_on_sphere(world.background_center, world.cfg.intra_sigma, rng);
        out.push_back(std::move(sp));
        break;
      }
    }
  }
  return out;
}

RetrainedDetector RetrainedDetector::train(const WorldTruth& world, const Dataset& train_set,
                                           std::span<const SurrogateProposal> proposals,
                                           const SurrogateConfig& cfg) {
  RetrainedDetector det;
  det.cfg_ = cfg;
  det.dim_ = world.cfg.emb_dim;

  std::map<ImageId, std::vector<Annotation>> gts;
  std::map<ImageId, std::vector<Annotation>> ignores;
  for (const Annotation& a : train_set.annotations) {
    (a.is_ignore ? ignores : gts)[a.image_id].push_back(a);
  }
  static const std::vector<Annotation> kNone;
  auto lookup = [](const auto& m, ImageId id) -> const std::vector<Annotation>& {
    auto it = m.find(id);
    return it == m.end() ? kNone : it->second;
  };

  for (const SurrogateProposal& p : proposals) {
    const auto& image_gts = lookup(gts, p.image_id);
    const auto& image_ign = lookup(ignores, p.image_id);

    const RoiAssignment roi = assign_roi(p.box, image_gts, image_ign);
    if (roi.positive()) {
      std::optional<BoxDelta> residual;
      if (p.object) {
        const Box& truth = world.object(*p.object).true_box;
        const Box& label = image_gts[*roi.matched_index].box;
        if (label.has_positive_size()) {
          const BoxDelta m = encode_deltas(p.box, truth);
          const BoxDelta a = encode_deltas(p.box, label);
          residual = BoxDelta{a.dx - m.dx, a.dy - m.dy, a.dw - m.dw, a.dh - m.dh};
        }
      }
      append_unit(det.cls_rows_, p.embedding);
      det.cls_labels_.push_back(*roi.category);
      det.cls_residual_.push_back(residual);
    } else if (roi.negative()) {
      append_unit(det.cls_rows_, p.embedding);
      det.cls_labels_.push_back(kBackground);
      det.cls_residual_.push_back(std::nullopt);
    }

    const RoiAssignment rpn = assign_rpn(p.box, image_gts, image_ign);
    if (!rpn.ignored()) {
      append_unit(det.obj_rows_, p.embedding);
      det.obj_fg_.push_back(rpn.positive());
    }
  }
  return det;
}

std::vector<Detection> RetrainedDetector::detect(
    const WorldTruth& world, std::span<const SurrogateProposal> proposals) const {
  struct Scored {
    ImageId image;
    CategoryId category;
    Box box;
    double score;
  };
  std::map<std::pair<ImageId, CategoryId>, std::vector<Scored>> per_slice;
  const std::size_t n_cls = cls_labels_.size();

  for (const SurrogateProposal& p : proposals) {
    if (n_cls == 0 || obj_fg_.empty()) break;
    const auto obj_ranked =
        ranked(obj_rows_, dim_, p.embedding, static_cast<std::size_t>(cfg_.k_obj));
    double obj_total = 0.0;
    double obj_fg = 0.0;
    for (const auto& [sim, i] : obj_ranked) {
      const double w = std::max(sim, 0.0);
      obj_total += w;
      if (obj_fg_[i]) obj_fg += w;
    }
    if (!(obj_total > 0.0) || !(obj_fg > 0.0)) continue;
    const double objectness = obj_fg / obj_total;

    const auto cls_ranked = ranked(cls_rows_, dim_, p.embedding, n_cls);
    std::map<CategoryId, double> votes;
    double total = 0.0;
    for (std::size_t r = 0; r < cls_ranked.size() && r < static_cast<std::size_t>(cfg_.k_cls);
         ++r) {
      const double w = std::max(cls_ranked[r].first, 0.0);
      total += w;
      const CategoryId label = cls_labels_[cls_ranked[r].second];
      if (label != kBackground) votes[label] += w;
    }
    if (!(total > 0.0)) continue;

    BoxDelta misalignment;
    const ImageExtent extent = world.cfg.extent;
    if (p.object) misalignment = encode_deltas(p.box, world.object(*p.object).true_box);
    for (const auto& [category, v] : votes) {
      if (!(v > 0.0)) continue;
      BoxDelta mean;
      int used = 0;
      for (const auto& [sim, i] : cls_ranked) {
        if (used >= cfg_.k_reg) break;
        if (cls_labels_[i] != category || !cls_residual_[i]) continue;
        mean.dx += cls_residual_[i]->dx;
        mean.dy += cls_residual_[i]->dy;
        mean.dw += cls_residual_[i]->dw;
        mean.dh += cls_residual_[i]->dh;
        ++used;
      }
      if (used > 0) {
        mean.dx /= used;
        mean.dy /= used;
        mean.dw /= used;
        mean.dh /= used;
      }
      const BoxDelta d{misalignment.dx + mean.dx, misalignment.dy + mean.dy,
                       misalignment.dw + mean.dw, misalignment.dh + mean.dh};
      const Box box = clip(decode_deltas(p.box, d), extent);
      if (!box.has_positive_size()) continue;
      per_slice[{p.image_id, category}].push_back(
          {p.image_id, category, box, v / total * objectness});
    }
  }

  std::map<ImageId, std::vector<Scored>> per_image;
  for (auto& [key, items] : per_slice) {
    std::stable_sort(items.begin(), items.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    std::vector<Scored> kept;
    for (const Scored& s : items) {
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Scored& k) {
        return iou(k.box, s.box) > cfg_.nms_iou;
      });
      if (!suppressed) kept.push_back(s);
    }
    auto& dst = per_image[key.first];
    dst.insert(dst.end(), kept.begin(), kept.end());
  }

  std::vector<Detection> out;
  std::int64_t next = 1;
  for (auto& [image, items] : per_image) {
    std::stable_sort(items.begin(), items.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    if (items.size() > static_cast<std::size_t>(cfg_.max_dets)) {
      items.resize(static_cast<std::size_t>(cfg_.max_dets));
    }
    for (const Scored& s : items) {
      out.push_back(Detection{DetectionId{next++}, s.image, s.box, s.category, s.score});
    }
  }
  return out;
}

}  // namespace lvc
