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
#ifndef LVC_SOURCING_HPP_
#define LVC_SOURCING_HPP_

#include <optional>
#include <span>
#include <vector>

#include "lvc/datamodel.hpp"

namespace lvc {

inline constexpr double kDefaultSourcingThreshold = 0.8;

// High-confidence novel-class detections harvested as pseudo-annotation
// candidates. Ordered by ascending category, then descending score.
struct CandidateSet {
  std::vector<Detection> candidates;
  double threshold_q = kDefaultSourcingThreshold;
  std::optional<int> per_class_cap;
};

// Keeps the novel-category detections with score strictly greater than q.
// With a cap, only the top-cap per class survive; ties on score are broken
// by image id, then input order. Throws RangeError when q is outside [0,1]
// or the cap is not positive.
CandidateSet source_candidates(std::span<const Detection> dets,
                               const FewShotSplit& split, double q,
                               std::optional<int> cap = std::nullopt);

}  // namespace lvc

#endif  // LVC_SOURCING_HPP_
