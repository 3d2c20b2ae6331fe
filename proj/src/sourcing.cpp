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
#include "lvc/sourcing.hpp"

#include <algorithm>
#include <map>

#include "lvc/errors.hpp"

namespace lvc {

CandidateSet source_candidates(std::span<const Detection> dets,
                               const FewShotSplit& split, double q,
                               std::optional<int> cap) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw RangeError("sourcing threshold q must lie in [0,1]");
  }
  if (cap && *cap < 1) throw RangeError("per-class cap must be positive");

  // Input order is the final tie-break, so keep indices alongside.
  std::map<CategoryId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (split.is_novel(dets[i].category) && dets[i].score > q) {
      by_class[dets[i].category].push_back(i);
    }
  }

  CandidateSet out;
  out.threshold_q = q;
  out.per_class_cap = cap;
  for (auto& [category, idx] : by_class) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
      return to_int(dets[a].image_id) < to_int(dets[b].image_id);
    });
    std::size_t keep = idx.size();
    if (cap) keep = std::min(keep, static_cast<std::size_t>(*cap));
    for (std::size_t i = 0; i < keep; ++i) out.candidates.push_back(dets[idx[i]]);
  }
  return out;
}

}  // namespace lvc
