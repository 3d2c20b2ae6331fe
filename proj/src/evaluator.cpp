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
#include "lvc/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lvc/errors.hpp"

namespace lvc {

namespace {

std::vector<std::size_t> by_descending_score(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

struct RankedOutcome {
  double score;
  bool is_tp;
};

struct ClassRanking {
  std::vector<RankedOutcome> outcomes;  // non-ignored detections, ranked
  std::size_t num_gt = 0;
};

ClassRanking rank_class(std::span<const Detection> dets, std::span<const Annotation> gts,
                        double iou_t, CategoryId category, const EvalOptions& opts) {
  std::map<ImageId, std::vector<Detection>> det_by_image;
  std::map<ImageId, std::vector<Annotation>> gt_by_image;
  for (const Detection& d : dets) {
    if (d.category == category) det_by_image[d.image_id].push_back(d);
  }
  for (const Annotation& a : gts) {
    if (a.category == category) gt_by_image[a.image_id].push_back(a);
  }
  std::set<ImageId> images;
  for (const auto& [id, v] : det_by_image) images.insert(id);
  for (const auto& [id, v] : gt_by_image) images.insert(id);

  ClassRanking out;
  static const std::vector<Detection> kNoDets;
  static const std::vector<Annotation> kNoGts;
  for (ImageId image : images) {
    auto dit = det_by_image.find(image);
    auto git = gt_by_image.find(image);
    const auto& image_dets = dit == det_by_image.end() ? kNoDets : dit->second;
    const auto& image_gts = git == gt_by_image.end() ? kNoGts : git->second;

    std::vector<Detection> kept;
    for (std::size_t i : by_descending_score(image_dets)) {
      if (static_cast<int>(kept.size()) >= opts.max_dets) break;
      kept.push_back(image_dets[i]);
    }
    const MatchResult m = match(kept, image_gts, iou_t, opts.area);
    out.num_gt += m.num_gt;
    for (const DetectionMatch& dm : m.detections) {
      if (!dm.is_ignored) out.outcomes.push_back({dm.score, dm.is_tp});
    }
  }
  // Images were appended in ascending id order, so a stable sort ranks
  // equal scores by image, then by rank within the image.
  std::stable_sort(out.outcomes.begin(), out.outcomes.end(),
                   [](const RankedOutcome& a, const RankedOutcome& b) {
                     return a.score > b.score;
                   });
  return out;
}

std::vector<PrPoint> curve_from(const ClassRanking& r) {
  std::vector<PrPoint> curve;
  curve.reserve(r.outcomes.size());
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const RankedOutcome& o : r.outcomes) {
    (o.is_tp ? tp : fp) += 1;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(r.num_gt),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MatchResult match(std::span<const Detection> dets, std::span<const Annotation> gts,
                  double iou_t, std::optional<AreaRange> area) {
  MatchResult out;
  out.iou_threshold = iou_t;
  out.gt_matched.assign(gts.size(), false);

  auto ignored_gt = [&](std::size_t g) {
    return gts[g].is_ignore || (area && !area->contains(gts[g].box.area()));
  };
  // Regular annotations are visited before ignore-flagged ones.
  std::vector<std::size_t> gt_order;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!ignored_gt(g)) gt_order.push_back(g);
  }
  out.num_gt = gt_order.size();
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (ignored_gt(g)) gt_order.push_back(g);
  }

  for (std::size_t d : by_descending_score(dets)) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g : gt_order) {
      const bool g_ignored = ignored_gt(g);
      if (out.gt_matched[g] && !g_ignored) continue;
      if (best && !ignored_gt(*best) && g_ignored) break;
      const double v = iou(dets[d].box, gts[g].box);
      if (v < iou_t) continue;
      if (best && v <= best_iou) continue;
      best = g;
      best_iou = v;
    }
    DetectionMatch dm;
    dm.det_index = d;
    dm.score = dets[d].score;
    if (best) {
      dm.matched_gt = gts[*best].id;
      if (ignored_gt(*best)) {
        dm.is_ignored = true;
      } else {
        dm.is_tp = true;
        out.gt_matched[*best] = true;
      }
    } else if (area && !area->contains(dets[d].box.area())) {
      dm.is_ignored = true;
    }
    out.detections.push_back(dm);
  }
  return out;
}

std::vector<PrPoint> pr_curve(std::span<const Detection> dets,
                              std::span<const Annotation> gts, double iou_t,
                              CategoryId category, const EvalOptions& opts) {
  const ClassRanking r = rank_class(dets, gts, iou_t, category, opts);
  if (r.num_gt == 0) {
    throw NoGroundTruth("class " + std::to_string(to_int(category)) +
                        " has no ground truth");
  }
  return curve_from(r);
}

double interpolated_ap(std::span<const PrPoint> curve) {
  if (curve.empty()) return 0.0;
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double total = 0.0;
  std::size_t idx = 0;
  for (int k = 0; k < kRecallPoints; ++k) {
    const double threshold = k / 100.0;
    while (idx < curve.size() && curve[idx].recall < threshold) ++idx;
    if (idx < curve.size()) total += envelope[idx];
  }
  return total / kRecallPoints;
}

std::optional<double> average_precision(std::span<const Detection> dets,
                                        std::span<const Annotation> gts, double iou_t,
                                        CategoryId category, const EvalOptions& opts) {
  const ClassRanking r = rank_class(dets, gts, iou_t, category, opts);
  if (r.num_gt == 0) return std::nullopt;
  return interpolated_ap(curve_from(r));
}

RecallResult average_recall(std::span<const Detection> proposals,
                            std::span<const Annotation> gts, double iou_t, int top_n,
                            bool class_agnostic, const std::set<CategoryId>& classes) {
  std::map<CategoryId, std::size_t> total;
  std::map<CategoryId, std::size_t> hit;
  for (const Annotation& a : gts) {
    if (!a.is_ignore && (classes.empty() || classes.contains(a.category))) {
      ++total[a.category];
    }
  }

  std::map<ImageId, std::vector<Detection>> props_by_image;
  std::map<ImageId, std::vector<Annotation>> gts_by_image;
  for (const Detection& p : proposals) props_by_image[p.image_id].push_back(p);
  for (const Annotation& a : gts) gts_by_image[a.image_id].push_back(a);

  for (const auto& [image, image_gts] : gts_by_image) {
    std::vector<Detection> kept;
    if (auto it = props_by_image.find(image); it != props_by_image.end()) {
      for (std::size_t i : by_descending_score(it->second)) {
        if (static_cast<int>(kept.size()) >= top_n) break;
        kept.push_back(it->second[i]);
      }
    }
    auto count = [&](std::span<const Detection> ds, std::span<const Annotation> as) {
      const MatchResult m = match(ds, as, iou_t);
      for (std::size_t g = 0; g < as.size(); ++g) {
        if (m.gt_matched[g] && total.contains(as[g].category)) ++hit[as[g].category];
      }
    };
    if (class_agnostic) {
      count(kept, image_gts);
    } else {
      std::set<CategoryId> cats;
      for (const Annotation& a : image_gts) cats.insert(a.category);
      for (CategoryId c : cats) {
        std::vector<Detection> ds;
        std::vector<Annotation> as;
        for (const Detection& d : kept) {
          if (d.category == c) ds.push_back(d);
        }
        for (const Annotation& a : image_gts) {
          if (a.category == c) as.push_back(a);
        }
        count(ds, as);
      }
    }
  }

  RecallResult out;
  std::vector<double> values;
  for (const auto& [c, n] : total) {
    const double r = static_cast<double>(hit[c]) / static_cast<double>(n);
    out.per_class[c] = r;
    values.push_back(r);
  }
  out.average = mean_of(values);
  if (!values.empty()) out.minimum = *std::min_element(values.begin(), values.end());
  return out;
}

double ClassMetrics::ap_mean() const {
  return std::accumulate(ap.begin(), ap.end(), 0.0) / static_cast<double>(ap.size());
}

std::optional<double> MetricsReport::get(const std::string& name) const {
  auto it = metrics.find(name);
  if (it == metrics.end()) return std::nullopt;
  return it->second;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  return j;
}

MetricsReport coco_map(std::span<const Detection> dets, const Dataset& gts,
                       const FewShotSplit& split, const EvalOptions& opts) {
  MetricsReport report;
  std::vector<double> n_ap, n_ap50, n_ap75, b_ap, b_ap50, b_ap75;
  for (const auto& [category, name] : gts.categories) {
    ClassMetrics cm;
    cm.category = category;
    cm.novel = split.is_novel(category);
    bool has_gt = true;
    for (std::size_t t = 0; t < kCocoIouThresholds.size(); ++t) {
      const ClassRanking r = rank_class(dets, gts.annotations, kCocoIouThresholds[t],
                                        category, opts);
      if (r.num_gt == 0) {
        has_gt = false;
        break;
      }
      cm.num_gt = r.num_gt;
      cm.ap[t] = interpolated_ap(curve_from(r));
    }
    if (!has_gt) continue;
    const std::string id = std::to_string(to_int(category));
    report.metrics["AP/" + id] = cm.ap_mean();
    report.metrics["AP50/" + id] = cm.ap50();
    report.metrics["AP75/" + id] = cm.ap75();
    if (cm.novel) {
      n_ap.push_back(cm.ap_mean());
      n_ap50.push_back(cm.ap50());
      n_ap75.push_back(cm.ap75());
    } else if (split.is_base(category)) {
      b_ap.push_back(cm.ap_mean());
      b_ap50.push_back(cm.ap50());
      b_ap75.push_back(cm.ap75());
    }
    report.classes.push_back(cm);
  }
  const std::string suffix = opts.area ? "s" : "";
  auto put = [&](const std::string& name, const std::vector<double>& v) {
    if (auto m = mean_of(v)) report.metrics[name] = *m;
  };
  put("nAP" + suffix, n_ap);
  put("nAP50" + suffix, n_ap50);
  put("nAP75" + suffix, n_ap75);
  put("bAP" + suffix, b_ap);
  put("bAP50" + suffix, b_ap50);
  put("bAP75" + suffix, b_ap75);
  return report;
}

void add_recall_metrics(MetricsReport& report, std::span<const Detection> proposals,
                        const Dataset& gts, const FewShotSplit& split,
                        std::span<const int> top_ns, double iou_t) {
  const int pct = static_cast<int>(iou_t * 100.0 + 0.5);
  for (int n : top_ns) {
    const std::string tag = std::to_string(pct) + "@" + std::to_string(n);
    const RecallResult all = average_recall(proposals, gts.annotations, iou_t, n);
    if (all.average) report.metrics["AR" + tag] = *all.average;
    for (const auto& [c, r] : all.per_class) {
      report.metrics["R" + tag + "/" + std::to_string(to_int(c))] = r;
    }
    const RecallResult novel =
        average_recall(proposals, gts.annotations, iou_t, n, true, split.novel_categories);
    if (novel.average) {
      report.metrics["nAR" + tag] = *novel.average;
      report.metrics["min_nR" + tag] = *novel.minimum;
    }
    const RecallResult base =
        average_recall(proposals, gts.annotations, iou_t, n, true, split.base_categories);
    if (base.average) report.metrics["bAR" + tag] = *base.average;
  }
}

void write_pr_csv(std::span<const PrPoint> curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "recall,precision\n";
  char line[64];
  for (const PrPoint& p : curve) {
    std::snprintf(line, sizeof(line), "%.6f,%.6f\n", p.recall, p.precision);
    out << line;
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace lvc
