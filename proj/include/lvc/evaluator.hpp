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
#ifndef LVC_EVALUATOR_HPP_
#define LVC_EVALUATOR_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvc/datamodel.hpp"

namespace lvc {

// 0.50, 0.55, ..., 0.95
inline constexpr std::array<double, 10> kCocoIouThresholds = {
    0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
inline constexpr int kRecallPoints = 101;
inline constexpr int kDefaultMaxDets = 100;
// COCO "small" objects: area < 32^2.
inline constexpr double kSmallAreaMax = 32.0 * 32.0;

// Half-open area interval [min, max).
struct AreaRange {
  double min = 0.0;
  double max = 1e10;
  bool contains(double area) const { return area >= min && area < max; }
};

struct DetectionMatch {
  std::size_t det_index = 0;  // index into the input detections
  double score = 0.0;
  std::optional<AnnotationId> matched_gt;
  bool is_tp = false;
  // Matched an ignore-flagged annotation (or fell outside the area range):
  // neither TP nor FP.
  bool is_ignored = false;
};

struct MatchResult {
  // In processing order: descending score, input order on ties.
  std::vector<DetectionMatch> detections;
  std::vector<bool> gt_matched;  // parallel to the input annotations
  std::size_t num_gt = 0;        // annotations that count toward recall
  double iou_threshold = 0.0;
};

// Greedy COCO matching over a single (image, class) slice. Each detection
// takes the unmatched regular annotation of highest IoU >= iou_t (earliest on
// ties) and falls back to an ignore-flagged one, which may absorb any number
// of detections. With an area range, annotations outside it behave like
// ignore regions and unmatched detections outside it are ignored.
MatchResult match(std::span<const Detection> dets, std::span<const Annotation> gts,
                  double iou_t, std::optional<AreaRange> area = std::nullopt);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct EvalOptions {
  int max_dets = kDefaultMaxDets;  // per image and class
  std::optional<AreaRange> area;
};

// Cumulative (recall, precision) after each non-ignored detection of one
// class, ranked across images by descending score. Throws NoGroundTruth.
std::vector<PrPoint> pr_curve(std::span<const Detection> dets,
                              std::span<const Annotation> gts, double iou_t,
                              CategoryId category, const EvalOptions& opts = {});

// 101-point interpolated AP of a PR curve: the precision envelope sampled at
// recall 0.00, 0.01, ..., 1.00 and averaged.
double interpolated_ap(std::span<const PrPoint> curve);

// AP of one class slice across images; nullopt when the slice has no
// ground truth (such classes are excluded from aggregates). Detections and
// annotations of other categories are ignored.
std::optional<double> average_precision(std::span<const Detection> dets,
                                        std::span<const Annotation> gts, double iou_t,
                                        CategoryId category,
                                        const EvalOptions& opts = {});

struct RecallResult {
  std::optional<double> average;  // mean over classes with ground truth
  std::optional<double> minimum;
  std::map<CategoryId, double> per_class;
};

// Fraction of each class's ground truth recovered at iou_t by at most top_n
// proposals per image (one-to-one greedy matching by score). Class-agnostic
// proposals may match ground truth of any class. `classes`, when non-empty,
// restricts which classes are reported.
RecallResult average_recall(std::span<const Detection> proposals,
                            std::span<const Annotation> gts, double iou_t, int top_n,
                            bool class_agnostic = true,
                            const std::set<CategoryId>& classes = {});

struct ClassMetrics {
  CategoryId category{};
  bool novel = false;
  std::size_t num_gt = 0;
  std::array<double, 10> ap{};  // per kCocoIouThresholds entry

  double ap_mean() const;
  double ap50() const { return ap[0]; }
  double ap75() const { return ap[5]; }
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;  // classes with ground truth only
  // Flat metric name -> value in [0,1]: nAP, nAP50, nAP75, bAP, bAP50,
  // bAP75, AP/<id>, ... Aggregates with no contributing class are absent.
  std::map<std::string, double> metrics;

  std::optional<double> get(const std::string& name) const;
  nlohmann::json to_json() const;
};

// AP over IoU 0.50:0.95 per class, aggregated over the split's novel (nAP*)
// and base (bAP*) classes. With an area range the aggregates also appear
// with an "s" suffix (nAPs, bAPs).
MetricsReport coco_map(std::span<const Detection> dets, const Dataset& gts,
                       const FewShotSplit& split, const EvalOptions& opts = {});

// Adds AR50@N, nAR50@N, bAR50@N, min_nR50@N and R50@N/<id> for each N.
void add_recall_metrics(MetricsReport& report, std::span<const Detection> proposals,
                        const Dataset& gts, const FewShotSplit& split,
                        std::span<const int> top_ns, double iou_t = 0.5);

// "recall,precision" header then one line per point, 6 decimal places.
void write_pr_csv(std::span<const PrPoint> curve, const std::filesystem::path& path);

}  // namespace lvc

#endif  // LVC_EVALUATOR_HPP_
