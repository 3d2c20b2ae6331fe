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
#ifndef LVC_GEOMETRY_HPP_
#define LVC_GEOMETRY_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace lvc {

// Axis-aligned box in image coordinates, stored as (x, y, w, h) like COCO.
// Zero-area boxes are legal values; they are never legal anchors.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  bool has_positive_size() const { return w > 0.0 && h > 0.0; }
  // w >= 0, h >= 0 and all coordinates finite.
  bool valid() const;

  static Box from_corners(double x1, double y1, double x2, double y2) {
    return Box{x1, y1, x2 - x1, y2 - y1};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

// Standard two-stage detector parameterization: center offsets normalized by
// the anchor size and log-scale size ratios.
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

struct ImageExtent {
  int width = 0;
  int height = 0;

  bool valid() const { return width > 0 && height > 0; }
  friend bool operator==(const ImageExtent&, const ImageExtent&) = default;
};

// Intersection over union; 0 when the union is empty.
double iou(const Box& a, const Box& b);

// Throws ZeroSizeAnchor if the anchor has no area and DegenerateBox if the
// target has no area.
BoxDelta encode_deltas(const Box& anchor, const Box& target);
Box decode_deltas(const Box& anchor, const BoxDelta& delta);

// Clamps the box to [0,width]x[0,height]. Boxes fully outside collapse onto
// the nearest boundary with zero width and/or height.
Box clip(const Box& b, ImageExtent extent);

// Dense row-major |rows| x |cols| matrix of IoU values.
class IouMatrix {
 public:
  IouMatrix() = default;
  IouMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return values_[i * cols_ + j];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

IouMatrix pairwise_iou(std::span<const Box> a, std::span<const Box> b);

}  // namespace lvc

#endif  // LVC_GEOMETRY_HPP_
