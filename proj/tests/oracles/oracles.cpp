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
#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace lvc::oracle {

double iou(const Box& a, const Box& b) {
  const double ix1 = std::max(a.x, b.x), iy1 = std::max(a.y, b.y);
  const double ix2 = std::min(a.x + a.w, b.x + b.w), iy2 = std::min(a.y + a.h, b.y + b.h);
  const double inter = std::max(0.0, ix2 - ix1) * std::max(0.0, iy2 - iy1);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

CategoryId knn_classify(const std::vector<std::vector<float>>& rows,
                        const std::vector<CategoryId>& labels, int k,
                        const std::vector<float>& query) {
  auto norm = [](const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
  };
  const double qn = norm(query);
  std::vector<std::pair<double, std::size_t>> sims;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double dot = 0.0;
    const double rn = norm(rows[i]);
    for (std::size_t d = 0; d < query.size(); ++d) {
      dot += (static_cast<double>(rows[i][d]) / rn) * (static_cast<double>(query[d]) / qn);
    }
    sims.emplace_back(-dot, i);
  }
  std::sort(sims.begin(), sims.end());
  std::map<CategoryId, int> votes;
  std::map<CategoryId, int> first_rank;
  for (int r = 0; r < k; ++r) {
    const CategoryId c = labels[sims[r].second];
    ++votes[c];
    first_rank.try_emplace(c, r);
  }
  CategoryId best{};
  int best_votes = -1, best_rank = 0;
  for (const auto& [c, v] : votes) {
    if (v > best_votes || (v == best_votes && first_rank[c] < best_rank)) {
      best = c;
      best_votes = v;
      best_rank = first_rank[c];
    }
  }
  return best;
}

RoiAssignment::Outcome assign(const Box& proposal, const std::vector<Annotation>& gts,
                              const std::vector<Annotation>& ignores, bool rpn,
                              double fg_iou, double bg_iou,
                              std::optional<CategoryId>* category) {
  using O = RoiAssignment::Outcome;
  if (category != nullptr) category->reset();
  bool hits_ignore = false;
  for (const Annotation& g : ignores) hits_ignore = hits_ignore || oracle::iou(proposal, g.box) > 0.5;
  if (hits_ignore) return rpn ? O::kPositive : O::kIgnored;
  // No ground truth counts as overlap 0.
  double best = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const double v = oracle::iou(proposal, gts[i].box);
    if (i == 0 || v > best) {
      best = v;
      if (category != nullptr) *category = gts[i].category;
    }
  }
  if (!gts.empty() && best >= fg_iou) return O::kPositive;
  if (category != nullptr) category->reset();
  if (best < bg_iou) return O::kNegative;
  return O::kIgnored;
}

namespace {

struct Outcome {
  double score;
  int label;  // +1 TP, 0 FP, -1 ignored
};

bool in_area(const Box& b, const std::optional<std::pair<double, double>>& area) {
  return !area || (b.area() >= area->first && b.area() < area->second);
}

// Greedy matching in the given detection order.
std::vector<int> match_in_order(const std::vector<Detection>& dets,
                                const std::vector<Annotation>& gts, double iou_t,
                                const std::optional<std::pair<double, double>>& area) {
  std::vector<bool> used(gts.size(), false);
  std::vector<int> out;
  for (const Detection& d : dets) {
    int best = -1;
    double best_iou = iou_t;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const bool regular = !gts[g].is_ignore && in_area(gts[g].box, area);
      if (!regular || used[g]) continue;
      const double v = oracle::iou(d.box, gts[g].box);
      if (v >= iou_t && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      used[best] = true;
      out.push_back(1);
      continue;
    }
    bool absorbed = false;
    for (const Annotation& g : gts) {
      const bool regular = !g.is_ignore && in_area(g.box, area);
      if (!regular && oracle::iou(d.box, g.box) >= iou_t) absorbed = true;
    }
    if (absorbed || !in_area(d.box, area)) {
      out.push_back(-1);
    } else {
      out.push_back(0);
    }
  }
  return out;
}

std::vector<Detection> by_score(std::vector<Detection> dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return dets;
}

}  // namespace

std::vector<int> greedy_labels(const std::vector<Detection>& dets,
                               const std::vector<Annotation>& gts, double iou_t) {
  // Label each detection in input order; matching itself runs by score.
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<Detection> sorted;
  for (std::size_t i : order) sorted.push_back(dets[i]);
  const std::vector<int> labels = match_in_order(sorted, gts, iou_t, std::nullopt);
  std::vector<int> out(dets.size());
  for (std::size_t r = 0; r < order.size(); ++r) out[order[r]] = labels[r];
  return out;
}

std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<Annotation>& gts, double iou_t,
                                        CategoryId category, int max_dets,
                                        std::optional<std::pair<double, double>> area) {
  std::set<std::int64_t> images;
  std::size_t num_gt = 0;
  for (const Annotation& g : gts) {
    if (g.category != category) continue;
    images.insert(to_int(g.image_id));
    if (!g.is_ignore && in_area(g.box, area)) ++num_gt;
  }
  for (const Detection& d : dets) {
    if (d.category == category) images.insert(to_int(d.image_id));
  }
  if (num_gt == 0) return std::nullopt;

  std::vector<Outcome> all;
  for (std::int64_t im : images) {
    std::vector<Detection> di;
    std::vector<Annotation> gi;
    for (const Detection& d : dets) {
      if (d.category == category && to_int(d.image_id) == im) di.push_back(d);
    }
    for (const Annotation& g : gts) {
      if (g.category == category && to_int(g.image_id) == im) gi.push_back(g);
    }
    di = by_score(di);
    if (static_cast<int>(di.size()) > max_dets) di.resize(max_dets);
    const std::vector<int> labels = match_in_order(di, gi, iou_t, area);
    for (std::size_t i = 0; i < di.size(); ++i) all.push_back({di[i].score, labels[i]});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Outcome& a, const Outcome& b) { return a.score > b.score; });
  std::vector<double> recall, precision;
  double tp = 0.0, fp = 0.0;
  for (const Outcome& o : all) {
    if (o.label < 0) continue;
    (o.label == 1 ? tp : fp) += 1.0;
    recall.push_back(tp / static_cast<double>(num_gt));
    precision.push_back(tp / (tp + fp));
  }
  double total = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double p = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r) p = std::max(p, precision[i]);
    }
    total += p;
  }
  return total / 101.0;
}

std::map<CategoryId, double> class_recall(const std::vector<Detection>& proposals,
                                          const std::vector<Annotation>& gts, double iou_t,
                                          int top_n, bool class_agnostic) {
  std::map<CategoryId, double> found, total;
  std::set<std::int64_t> images;
  for (const Annotation& g : gts) {
    if (g.is_ignore) continue;
    total[g.category] += 1.0;
    found[g.category] += 0.0;
    images.insert(to_int(g.image_id));
  }
  for (std::int64_t im : images) {
    std::vector<Detection> pi;
    for (const Detection& p : proposals) {
      if (to_int(p.image_id) == im) pi.push_back(p);
    }
    pi = by_score(pi);
    if (static_cast<int>(pi.size()) > top_n) pi.resize(std::max(top_n, 0));
    std::vector<Annotation> gi;
    for (const Annotation& g : gts) {
      if (!g.is_ignore && to_int(g.image_id) == im) gi.push_back(g);
    }
    std::vector<bool> used(gi.size(), false);
    for (const Detection& p : pi) {
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gi.size(); ++g) {
        if (used[g] || (!class_agnostic && gi[g].category != p.category)) continue;
        const double v = oracle::iou(p.box, gi[g].box);
        if (v >= iou_t && (best < 0 || v > best_iou)) {
          best = static_cast<int>(g);
          best_iou = v;
        }
      }
      if (best >= 0) {
        used[best] = true;
        found[gi[best].category] += 1.0;
      }
    }
  }
  std::map<CategoryId, double> out;
  for (const auto& [c, n] : total) out[c] = found[c] / n;
  return out;
}

std::vector<std::vector<double>> least_squares_deltas(const std::vector<TrainPair>& pairs) {
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  const Eigen::Index d = static_cast<Eigen::Index>(pairs.front().feature.size());
  Eigen::MatrixXd x(n, d + 1);
  Eigen::MatrixXd y(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TrainPair& p = pairs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = p.feature[static_cast<std::size_t>(j)];
    x(i, d) = 1.0;
    const BoxDelta t{(p.target.cx() - p.anchor.cx()) / p.anchor.w,
                     (p.target.cy() - p.anchor.cy()) / p.anchor.h,
                     std::log(p.target.w / p.anchor.w), std::log(p.target.h / p.anchor.h)};
    y(i, 0) = t.dx;
    y(i, 1) = t.dy;
    y(i, 2) = t.dw;
    y(i, 3) = t.dh;
  }
  // Ridge term keeps the system solvable when features are collinear.
  const Eigen::MatrixXd gram =
      x.transpose() * x + 1e-9 * Eigen::MatrixXd::Identity(d + 1, d + 1);
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
  std::vector<std::vector<double>> out(4, std::vector<double>(static_cast<std::size_t>(d + 1)));
  for (int c = 0; c < 4; ++c) {
    for (Eigen::Index j = 0; j <= d; ++j) out[c][static_cast<std::size_t>(j)] = w(j, c);
  }
  return out;
}

Box random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  const double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  return Box::from_corners(std::min(x1, x2), std::min(y1, y2), std::max(x1, x2),
                           std::max(y1, y2));
}

EvalInstance random_eval_instance(std::mt19937_64& rng, bool with_ignores, int max_dets,
                                  int max_gts) {
  std::uniform_int_distribution<int> nd(0, max_dets), ng(0, max_gts), img(1, 3), cat(1, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EvalInstance r;
  const int n_gt = ng(rng), n_det = nd(rng);
  for (int i = 0; i < n_gt; ++i) {
    Annotation a;
    a.id = AnnotationId{i + 1};
    a.image_id = ImageId{img(rng)};
    a.box = random_box(rng, 40);
    a.category = CategoryId{cat(rng)};
    a.is_ignore = with_ignores && u(rng) < 0.25;
    r.gts.push_back(a);
  }
  for (int i = 0; i < n_det; ++i) {
    Detection d;
    d.id = DetectionId{i + 1};
    d.box = random_box(rng, 40);
    d.image_id = ImageId{img(rng)};
    d.category = CategoryId{cat(rng)};
    if (!r.gts.empty() && u(rng) < 0.5) {
      const Annotation& g = r.gts[static_cast<std::size_t>(u(rng) * r.gts.size())];
      d.box = Box{g.box.x + 3 * (u(rng) - 0.5), g.box.y + 3 * (u(rng) - 0.5), g.box.w, g.box.h};
      d.image_id = g.image_id;
      d.category = g.category;
    }
    d.score = std::round(u(rng) * 10) / 10;
    r.dets.push_back(d);
  }
  return r;
}

}  // namespace lvc::oracle
