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
#include "lvc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lvc/errors.hpp"

namespace lvc {

namespace {

std::string describe(const Box& b) {
  std::ostringstream os;
  os << "(" << b.x << ", " << b.y << ", " << b.w << ", " << b.h << ")";
  return os.str();
}

}  // namespace

bool Box::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
         std::isfinite(h) && w >= 0.0 && h >= 0.0;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoxDelta encode_deltas(const Box& anchor, const Box& target) {
  if (!anchor.has_positive_size()) {
    throw ZeroSizeAnchor("encode_deltas: anchor " + describe(anchor) +
                         " has zero width or height");
  }
  if (!target.has_positive_size()) {
    throw DegenerateBox("encode_deltas: target " + describe(target) +
                        " has zero width or height");
  }
  return BoxDelta{(target.cx() - anchor.cx()) / anchor.w,
                  (target.cy() - anchor.cy()) / anchor.h,
                  std::log(target.w / anchor.w), std::log(target.h / anchor.h)};
}

Box decode_deltas(const Box& anchor, const BoxDelta& delta) {
  if (!anchor.has_positive_size()) {
    throw ZeroSizeAnchor("decode_deltas: anchor " + describe(anchor) +
                         " has zero width or height");
  }
  const double cx = anchor.cx() + delta.dx * anchor.w;
  const double cy = anchor.cy() + delta.dy * anchor.h;
  const double w = anchor.w * std::exp(delta.dw);
  const double h = anchor.h * std::exp(delta.dh);
  return Box{cx - 0.5 * w, cy - 0.5 * h, w, h};
}

Box clip(const Box& b, ImageExtent extent) {
  const double width = extent.width;
  const double height = extent.height;
  const double x1 = std::clamp(b.x, 0.0, width);
  const double y1 = std::clamp(b.y, 0.0, height);
  const double x2 = std::clamp(b.x2(), 0.0, width);
  const double y2 = std::clamp(b.y2(), 0.0, height);
  if (x1 == b.x && y1 == b.y && x2 == b.x2() && y2 == b.y2()) return b;
  return Box::from_corners(x1, y1, x2, y2);
}

IouMatrix pairwise_iou(std::span<const Box> a, std::span<const Box> b) {
  IouMatrix out(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out(i, j) = iou(a[i], b[j]);
  }
  return out;
}

}  // namespace lvc
