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

#include "spotnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "spotnet/types.hpp"

namespace spotnet {

std::string Shape::str() const {
  return "[" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) +
         ", " + std::to_string(w) + "]";
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw InvalidArgument("Tensor::add_: shape " + other.shape_.str() + " vs " + shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] += other.data_[i];
  }
}

Tensor Tensor::slice_batch(int n) const {
  Tensor out(Shape{1, shape_.c, shape_.h, shape_.w});
  const std::size_t stride = static_cast<std::size_t>(shape_.c) * shape_.plane();
  std::memcpy(out.raw(), data_.data() + n * stride, stride * sizeof(float));
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

float Tensor::max_abs() const {
  float m = 0.0f;
  for (float v : data_) {
    m = std::max(m, std::abs(v));
  }
  return m;
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) {
    throw InvalidArgument("stack_batch: no items");
  }
  const Shape& s0 = items.front().shape();
  Tensor out(Shape{static_cast<int>(items.size()), s0.c, s0.h, s0.w});
  const std::size_t stride = static_cast<std::size_t>(s0.c) * s0.plane();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Shape& s = items[i].shape();
    if (s.n != 1 || s.c != s0.c || s.h != s0.h || s.w != s0.w) {
      throw InvalidArgument("stack_batch: item " + std::to_string(i) + " has shape " + s.str());
    }
    std::memcpy(out.raw() + i * stride, items[i].raw(), stride * sizeof(float));
  }
  return out;
}

}  // namespace spotnet
