// Copyright 2026 The ETS Authors. All Rights Reserved.
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
#ifndef ETS_BOX_HPP_
#define ETS_BOX_HPP_

#include <algorithm>

namespace ets {

// Axis-aligned box in pixel units, COCO xywh convention.
struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0 && h > 0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Intersection of two boxes; w/h are zero when they do not overlap.
inline BBox Intersect(const BBox& a, const BBox& b) {
  const double x1 = std::max(a.x, b.x);
  const double y1 = std::max(a.y, b.y);
  const double x2 = std::min(a.right(), b.right());
  const double y2 = std::min(a.bottom(), b.bottom());
  return BBox{x1, y1, std::max(0.0, x2 - x1), std::max(0.0, y2 - y1)};
}

}  // namespace ets

#endif  // ETS_BOX_HPP_
