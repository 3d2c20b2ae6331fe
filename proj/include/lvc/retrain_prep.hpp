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
#ifndef LVC_RETRAIN_PREP_HPP_
#define LVC_RETRAIN_PREP_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lvc/datamodel.hpp"
#include "lvc/verifier.hpp"

namespace lvc {

// RoIs overlapping an ignore region by more than this are never sampled.
inline constexpr double kIgnoreRegionIou = 0.5;
inline constexpr double kDefaultFgIou = 0.5;
inline constexpr double kDefaultBgIou = 0.5;

struct RoiAssignment {
  enum class Outcome { kPositive, kNegative, kIgnored };

  Outcome outcome = Outcome::kNegative;
  // Set for positives matched to a ground truth; empty for the
  // class-agnostic objectness positives produced by ignore regions.
  std::optional<CategoryId> category;
  double matched_iou = 0.0;
  // Index into the gts (ground-truth positive) or ignores (ignore-driven
  // outcome) list of the matched annotation.
  std::optional<std::size_t> matched_index;

  bool positive() const { return outcome == Outcome::kPositive; }
  bool negative() const { return outcome == Outcome::kNegative; }
  bool ignored() const { return outcome == Outcome::kIgnored; }
};

// Every novel-class detection that is not in the verified set, including
// detections that never passed the sourcing threshold. Annotations take the
// detection's id, image, box and category and are flagged is_ignore.
std::vector<Annotation> emit_ignore_regions(std::span<const Detection> all_novel_dets,
                                            const VerificationOutcome& verified);
// Same, restricted to detections of the split's novel categories.
std::vector<Annotation> emit_ignore_regions(std::span<const Detection> all_dets,
                                            const FewShotSplit& split,
                                            const VerificationOutcome& verified);

// Pseudo-annotations (is_pseudo) taking each detection's id, image, box and
// category.
std::vector<Annotation> to_pseudo_annotations(std::span<const Detection> dets);

// Second-stage sampling rule. IoU > 0.5 with any ignore region gives
// Ignored; otherwise the best ground truth (earliest on ties) gives Positive
// when IoU >= fg_iou and Negative when IoU < bg_iou. IoUs in [bg_iou, fg_iou)
// are Ignored; with the default fg = bg = 0.5 that band is empty.
RoiAssignment assign_roi(const Box& proposal, std::span<const Annotation> gts,
                         std::span<const Annotation> ignores,
                         double fg_iou = kDefaultFgIou, double bg_iou = kDefaultBgIou);

// RPN rule: as assign_roi, except that IoU > 0.5 with an ignore region gives
// a class-agnostic Positive.
RoiAssignment assign_rpn(const Box& proposal, std::span<const Annotation> gts,
                         std::span<const Annotation> ignores,
                         double fg_iou = kDefaultFgIou, double bg_iou = kDefaultBgIou);

// Base-category annotations of `base_gt`, the split's K-shot annotations,
// then pseudo-annotations and ignore regions. Base and shot annotations keep
// their ids; pseudo and ignore annotations are renumbered consecutively after
// the largest kept id. Throws IntegrityError on duplicate ids or dangling
// image/category references.
Dataset assemble_retrain_set(const Dataset& base_gt, const FewShotSplit& split,
                             std::span<const Annotation> pseudo,
                             std::span<const Annotation> ignores);

}  // namespace lvc

#endif  // LVC_RETRAIN_PREP_HPP_
