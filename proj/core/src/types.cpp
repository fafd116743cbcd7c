/* Copyright 2026 The SpotNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "spotnet/types.hpp"

#include <cmath>

namespace spotnet {

namespace {

template <typename BoxRange, typename GetBox>
SegMask rasterize(int height, int width, const BoxRange& boxes, GetBox get) {
  SegMask mask(height, width, 0);
  for (const auto& item : boxes) {
    const Box& b = get(item);
    // Pixel x is covered when x + 0.5 lies in [x1, x2].
    const int x_lo = std::max(0, static_cast<int>(std::ceil(b.x1 - 0.5)));
    const int x_hi = std::min(width - 1, static_cast<int>(std::floor(b.x2 - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(b.y1 - 0.5)));
    const int y_hi = std::min(height - 1, static_cast<int>(std::floor(b.y2 - 0.5)));
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        mask.at(y, x) = 1;
      }
    }
  }
  return mask;
}

}  // namespace

SegMask box_union_mask(int height, int width, std::span<const Box> boxes) {
  return rasterize(height, width, boxes, [](const Box& b) -> const Box& { return b; });
}

SegMask box_union_mask(int height, int width, std::span<const LabeledBox> boxes) {
  return rasterize(height, width, boxes,
                   [](const LabeledBox& b) -> const Box& { return b.box; });
}

double mask_iou(const SegMask& a, const SegMask& b) {
  if (!a.same_shape(b)) {
    throw InvalidArgument("mask_iou: shape mismatch");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool fa = a.values[i] != 0;
    const bool fb = b.values[i] != 0;
    inter += (fa && fb) ? 1 : 0;
    uni += (fa || fb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace spotnet
