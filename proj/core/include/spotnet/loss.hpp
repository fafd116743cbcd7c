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

// Training losses. All functions take double-precision views and, when a
// non-empty `grad` span is supplied, write d(loss)/d(pred) into it
// (overwriting its contents).

#ifndef SPOTNET_LOSS_HPP_
#define SPOTNET_LOSS_HPP_

#include <array>
#include <span>
#include <vector>

#include "spotnet/net.hpp"
#include "spotnet/types.hpp"

namespace spotnet {

/// Probability clamp shared by the cross-entropy style losses.
inline constexpr double kProbEps = 1e-7;

/// Mean binary cross-entropy between predicted probabilities and labels.
double bce_seg(std::span<const double> pred, std::span<const double> target,
               std::span<double> grad = {});
/// Mean squared error alternative for the segmentation head.
double mse_seg(std::span<const double> pred, std::span<const double> target,
               std::span<double> grad = {});

/// Per-class center heatmap at output resolution, layout [class][y][x].
struct TargetHeatmap {
  int n_classes = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

struct CenterTarget {
  int batch = 0;
  int y = 0;
  int x = 0;
  std::array<double, 2> wh{};      // box width, height in input px
  std::array<double, 2> offset{};  // center / stride - cell
};

struct DetectionTargets {
  TargetHeatmap heatmap;
  std::vector<double> wh_map;      // [2][h][w], set at center cells only
  std::vector<double> offset_map;  // [2][h][w]
  std::vector<CenterTarget> centers;
};

/// Gaussian radius (output cells) from the corner min-overlap rule.
double gaussian_radius(double box_h, double box_w, double min_overlap = 0.7);

/// Splat one image's boxes onto an out_h x out_w grid (stride 4). Centers in
/// the same cell keep the last box's regression targets.
DetectionTargets splat_targets(std::span<const LabeledBox> boxes, int out_h, int out_w,
                               int n_classes, double min_overlap = 0.7, int batch = 0);

/// Penalty-reduced focal loss (alpha 2, beta 4) normalized by the number of
/// target cells equal to 1 (at least 1).
double focal_heatmap(std::span<const double> pred, std::span<const double> target,
                     std::span<double> grad = {});

/// N x 2 x H x W regression output.
struct RegressionMap {
  std::span<const double> values;
  int n = 1;
  int height = 0;
  int width = 0;

  std::size_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * 2 + c) * height + y) * width + x;
  }
};

/// Which field of CenterTarget an L1 term regresses.
enum class RegressionKind { wh, offset };

/// Mean |pred - target| over the listed centers and both channels.
double l1_sparse(const RegressionMap& pred, std::span<const CenterTarget> centers,
                 RegressionKind kind, std::span<double> grad = {});

struct LossTerms {
  double heat = 0.0;
  double off = 0.0;
  double seg = 0.0;
  double wh = 0.0;
};

struct LossWeights {
  double seg = 1.0;
  double wh = 0.1;
};

struct LossBreakdown {
  double heat = 0.0;
  double off = 0.0;
  double seg = 0.0;
  double wh = 0.0;
  double total = 0.0;
};

/// total = heat + off + seg_weight * seg + wh_weight * wh. The seg term (and
/// its reported value) is zero when multi-task learning is disabled. Throws
/// on non-finite or negative terms.
LossBreakdown total_loss(const LossTerms& parts, const ModelConfig& config,
                         const LossWeights& weights = {});

}  // namespace spotnet

#endif  // SPOTNET_LOSS_HPP_
