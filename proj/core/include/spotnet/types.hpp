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

#ifndef SPOTNET_TYPES_HPP_
#define SPOTNET_TYPES_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spotnet {

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for I/O and other environment failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in continuous pixel coordinates. Pixel (x, y) covers
/// [x, x+1) x [y, y+1), so a box (0,0,10,10) spans exactly 100 pixels.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  /// True when the center of pixel (x, y) lies inside the closed box.
  bool covers_pixel(int x, int y) const {
    const double cx = x + 0.5;
    const double cy = y + 0.5;
    return cx >= x1 && cx <= x2 && cy >= y1 && cy <= y2;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct LabeledBox {
  int class_id = 0;
  Box box;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

/// 8-bit image with interleaved channels (HWC).
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary per-pixel foreground label, values in {0, 1}.
struct SegMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  SegMask() = default;
  SegMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
  }
  bool same_shape(const SegMask& other) const {
    return height == other.height && width == other.width;
  }

  friend bool operator==(const SegMask&, const SegMask&) = default;
};

/// Foreground probability per pixel in [0, 1].
struct ProbabilityMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  ProbabilityMap() = default;
  ProbabilityMap(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Union of box interiors rasterized on an h x w grid.
SegMask box_union_mask(int height, int width, std::span<const Box> boxes);
SegMask box_union_mask(int height, int width, std::span<const LabeledBox> boxes);

/// Intersection over union of two masks; 1 when both are empty.
double mask_iou(const SegMask& a, const SegMask& b);

}  // namespace spotnet

#endif  // SPOTNET_TYPES_HPP_
