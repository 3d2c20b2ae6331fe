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
#include "lvc/retrain_prep.hpp"

#include <algorithm>
#include <set>

#include "lvc/errors.hpp"

namespace lvc {

namespace {

Annotation from_detection(const Detection& d) {
  Annotation a;
  a.id = AnnotationId{to_int(d.id)};
  a.image_id = d.image_id;
  a.box = d.box;
  a.category = d.category;
  return a;
}

struct BestMatch {
  double iou = 0.0;
  std::optional<std::size_t> index;
};

BestMatch best_overlap(const Box& proposal, std::span<const Annotation> anns) {
  BestMatch best;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const double v = iou(proposal, anns[i].box);
    if (!best.index || v > best.iou) {
      best.iou = v;
      best.index = i;
    }
  }
  return best;
}

RoiAssignment assign_by_gt(const Box& proposal, std::span<const Annotation> gts,
                           double fg_iou, double bg_iou) {
  if (fg_iou < bg_iou) throw RangeError("assignment requires fg_iou >= bg_iou");
  const BestMatch gt = best_overlap(proposal, gts);
  RoiAssignment out;
  out.matched_iou = gt.iou;
  if (gt.index && gt.iou >= fg_iou) {
    out.outcome = RoiAssignment::Outcome::kPositive;
    out.category = gts[*gt.index].category;
    out.matched_index = gt.index;
  } else if (gt.iou < bg_iou) {
    out.outcome = RoiAssignment::Outcome::kNegative;
  } else {
    out.outcome = RoiAssignment::Outcome::kIgnored;
    out.matched_index = gt.index;
  }
  return out;
}

}  // namespace

std::vector<Annotation> emit_ignore_regions(std::span<const Detection> all_novel_dets,
                                            const VerificationOutcome& verified) {
  std::set<std::int64_t> kept;
  for (const Detection& d : verified.verified) kept.insert(to_int(d.id));
  std::vector<Annotation> out;
  for (const Detection& d : all_novel_dets) {
    if (kept.contains(to_int(d.id))) continue;
    Annotation a = from_detection(d);
    a.is_ignore = true;
    a.source = AnnotationSource::kIgnore;
    out.push_back(a);
  }
  return out;
}

std::vector<Annotation> emit_ignore_regions(std::span<const Detection> all_dets,
                                            const FewShotSplit& split,
                                            const VerificationOutcome& verified) {
  std::vector<Detection> novel;
  for (const Detection& d : all_dets) {
    if (split.is_novel(d.category)) novel.push_back(d);
  }
  return emit_ignore_regions(novel, verified);
}

std::vector<Annotation> to_pseudo_annotations(std::span<const Detection> dets) {
  std::vector<Annotation> out;
  out.reserve(dets.size());
  for (const Detection& d : dets) {
    Annotation a = from_detection(d);
    a.is_pseudo = true;
    a.source = AnnotationSource::kPseudo;
    out.push_back(a);
  }
  return out;
}

RoiAssignment assign_roi(const Box& proposal, std::span<const Annotation> gts,
                         std::span<const Annotation> ignores, double fg_iou,
                         double bg_iou) {
  const BestMatch ign = best_overlap(proposal, ignores);
  if (ign.index && ign.iou > kIgnoreRegionIou) {
    RoiAssignment out;
    out.outcome = RoiAssignment::Outcome::kIgnored;
    out.matched_iou = ign.iou;
    out.matched_index = ign.index;
    return out;
  }
  return assign_by_gt(proposal, gts, fg_iou, bg_iou);
}

RoiAssignment assign_rpn(const Box& proposal, std::span<const Annotation> gts,
                         std::span<const Annotation> ignores, double fg_iou,
                         double bg_iou) {
  const BestMatch ign = best_overlap(proposal, ignores);
  if (ign.index && ign.iou > kIgnoreRegionIou) {
    RoiAssignment out;
    out.outcome = RoiAssignment::Outcome::kPositive;
    out.matched_iou = ign.iou;
    out.matched_index = ign.index;
    return out;
  }
  return assign_by_gt(proposal, gts, fg_iou, bg_iou);
}

Dataset assemble_retrain_set(const Dataset& base_gt, const FewShotSplit& split,
                             std::span<const Annotation> pseudo,
                             std::span<const Annotation> ignores) {
  Dataset out;
  out.images = base_gt.images;
  out.categories = base_gt.categories;
  std::int64_t max_id = 0;
  for (const Annotation& a : base_gt.annotations) {
    if (!split.is_base(a.category)) continue;
    // Base crowd regions stay ignore regions.
    Annotation kept = a;
    kept.is_pseudo = false;
    kept.source = a.is_ignore ? AnnotationSource::kIgnore : AnnotationSource::kGroundTruth;
    out.annotations.push_back(kept);
    max_id = std::max(max_id, to_int(a.id));
  }
  for (const Annotation& a : split.novel_annotations) {
    out.annotations.push_back(a);
    max_id = std::max(max_id, to_int(a.id));
  }
  std::int64_t next = max_id + 1;
  for (const Annotation& a : pseudo) {
    Annotation p = a;
    p.id = AnnotationId{next++};
    p.is_pseudo = true;
    p.is_ignore = false;
    p.source = AnnotationSource::kPseudo;
    out.annotations.push_back(p);
  }
  for (const Annotation& a : ignores) {
    Annotation g = a;
    g.id = AnnotationId{next++};
    g.is_ignore = true;
    g.is_pseudo = false;
    g.source = AnnotationSource::kIgnore;
    out.annotations.push_back(g);
  }
  out.validate();
  return out;
}

}  // namespace lvc
