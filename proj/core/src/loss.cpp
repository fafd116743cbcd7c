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

#include "spotnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spotnet {

namespace {

void check_sizes(std::size_t a, std::size_t b, std::span<double> grad, const char* op) {
  if (a != b) {
    throw InvalidArgument(std::string(op) + ": prediction has " + std::to_string(a) +
                          " values, target has " + std::to_string(b));
  }
  if (!grad.empty() && grad.size() != a) {
    throw InvalidArgument(std::string(op) + ": gradient buffer size mismatch");
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

}  // namespace

double bce_seg(std::span<const double> pred, std::span<const double> target,
               std::span<double> grad) {
  check_sizes(pred.size(), target.size(), grad, "bce_seg");
  if (pred.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = clamp_prob(pred[i]);
    const double y = target[i];
    sum += y * std::log(x) + (1.0 - y) * std::log(1.0 - x);
    if (!grad.empty()) {
      const bool clamped = pred[i] != x;
      grad[i] = clamped ? 0.0 : -inv_n * (y / x - (1.0 - y) / (1.0 - x));
    }
  }
  return -sum * inv_n;
}

double mse_seg(std::span<const double> pred, std::span<const double> target,
               std::span<double> grad) {
  check_sizes(pred.size(), target.size(), grad, "mse_seg");
  if (pred.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    if (!grad.empty()) grad[i] = 2.0 * d * inv_n;
  }
  return sum * inv_n;
}

double gaussian_radius(double box_h, double box_w, double min_overlap) {
  // Three placements of a corner-shifted box that still reach min_overlap
  // IoU with the ground truth; the tightest one bounds the radius.
  const double a1 = 1.0;
  const double b1 = box_h + box_w;
  const double c1 = box_w * box_h * (1.0 - min_overlap) / (1.0 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * a1 * c1)) / 2.0;

  const double a2 = 4.0;
  const double b2 = 2.0 * (box_h + box_w);
  const double c2 = (1.0 - min_overlap) * box_w * box_h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0;

  const double a3 = 4.0 * min_overlap;
  const double b3 = -2.0 * min_overlap * (box_h + box_w);
  const double c3 = (min_overlap - 1.0) * box_w * box_h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;
  return std::min({r1, r2, r3});
}

DetectionTargets splat_targets(std::span<const LabeledBox> boxes, int out_h, int out_w,
                               int n_classes, double min_overlap, int batch) {
  if (out_h <= 0 || out_w <= 0 || n_classes <= 0) {
    throw InvalidArgument("splat_targets: invalid output shape");
  }
  DetectionTargets t;
  t.heatmap = TargetHeatmap{n_classes, out_h, out_w,
                            std::vector<double>(static_cast<std::size_t>(n_classes) * out_h * out_w, 0.0)};
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  t.wh_map.assign(2 * plane, 0.0);
  t.offset_map.assign(2 * plane, 0.0);
  const double img_h = static_cast<double>(out_h) * kOutputStride;
  const double img_w = static_cast<double>(out_w) * kOutputStride;

  for (const LabeledBox& lb : boxes) {
    const Box& b = lb.box;
    if (lb.class_id < 0 || lb.class_id >= n_classes) {
      throw InvalidArgument("splat_targets: class id " + std::to_string(lb.class_id) +
                            " out of range");
    }
    if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > img_w || b.y2 > img_h || b.x2 < b.x1 || b.y2 < b.y1) {
      throw InvalidArgument("splat_targets: box outside the image");
    }
    const double cx = b.center_x() / kOutputStride;
    const double cy = b.center_y() / kOutputStride;
    const int cell_x = std::min(static_cast<int>(std::floor(cx)), out_w - 1);
    const int cell_y = std::min(static_cast<int>(std::floor(cy)), out_h - 1);

    const double r = gaussian_radius(b.height() / kOutputStride, b.width() / kOutputStride,
                                     min_overlap);
    const int radius = std::max(0, static_cast<int>(r));
    const double sigma = (2.0 * radius + 1.0) / 6.0;
    double* hm = t.heatmap.values.data() + static_cast<std::size_t>(lb.class_id) * plane;
    for (int dy = -radius; dy <= radius; ++dy) {
      const int y = cell_y + dy;
      if (y < 0 || y >= out_h) continue;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int x = cell_x + dx;
        if (x < 0 || x >= out_w) continue;
        double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        if (g < std::numeric_limits<double>::epsilon()) g = 0.0;
        double& v = hm[static_cast<std::size_t>(y) * out_w + x];
        v = std::max(v, g);
      }
    }

    CenterTarget ct;
    ct.batch = batch;
    ct.y = cell_y;
    ct.x = cell_x;
    ct.wh = {b.width(), b.height()};
    ct.offset = {cx - cell_x, cy - cell_y};
    const std::size_t cell = static_cast<std::size_t>(cell_y) * out_w + cell_x;
    t.wh_map[cell] = ct.wh[0];
    t.wh_map[plane + cell] = ct.wh[1];
    t.offset_map[cell] = ct.offset[0];
    t.offset_map[plane + cell] = ct.offset[1];
    auto same_cell = [&](const CenterTarget& o) { return o.y == ct.y && o.x == ct.x; };
    auto it = std::find_if(t.centers.begin(), t.centers.end(), same_cell);
    if (it != t.centers.end()) {
      *it = ct;
    } else {
      t.centers.push_back(ct);
    }
  }
  return t;
}

double focal_heatmap(std::span<const double> pred, std::span<const double> target,
                     std::span<double> grad) {
  check_sizes(pred.size(), target.size(), grad, "focal_heatmap");
  std::size_t n_pos = 0;
  for (double t : target) n_pos += (t == 1.0) ? 1 : 0;
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(n_pos, 1));

  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred[i]);
    const bool clamped = p != pred[i];
    const double t = target[i];
    double d = 0.0;
    if (t == 1.0) {
      const double q = 1.0 - p;
      sum += q * q * std::log(p);
      d = -2.0 * q * std::log(p) + q * q / p;
    } else {
      const double w = std::pow(1.0 - t, 4);
      sum += w * p * p * std::log(1.0 - p);
      d = w * (2.0 * p * std::log(1.0 - p) - p * p / (1.0 - p));
    }
    if (!grad.empty()) grad[i] = clamped ? 0.0 : -d * norm;
  }
  return -sum * norm;
}

double l1_sparse(const RegressionMap& pred, std::span<const CenterTarget> centers,
                 RegressionKind kind, std::span<double> grad) {
  const std::size_t expected = static_cast<std::size_t>(pred.n) * 2 * pred.height * pred.width;
  if (pred.values.size() != expected) {
    throw InvalidArgument("l1_sparse: prediction size does not match its shape");
  }
  if (!grad.empty()) {
    if (grad.size() != expected) throw InvalidArgument("l1_sparse: gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  if (centers.empty()) return 0.0;
  const double inv = 1.0 / (2.0 * static_cast<double>(centers.size()));
  double sum = 0.0;
  for (const CenterTarget& ct : centers) {
    if (ct.batch < 0 || ct.batch >= pred.n || ct.y < 0 || ct.y >= pred.height || ct.x < 0 ||
        ct.x >= pred.width) {
      throw InvalidArgument("l1_sparse: center index out of bounds");
    }
    const auto& target = kind == RegressionKind::wh ? ct.wh : ct.offset;
    for (int c = 0; c < 2; ++c) {
      const std::size_t i = pred.index(ct.batch, c, ct.y, ct.x);
      const double d = pred.values[i] - target[c];
      sum += std::abs(d);
      if (!grad.empty()) grad[i] += (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv;
    }
  }
  return sum * inv;
}

LossBreakdown total_loss(const LossTerms& parts, const ModelConfig& config,
                         const LossWeights& weights) {
  for (double v : {parts.heat, parts.off, parts.seg, parts.wh}) {
    if (!std::isfinite(v)) throw InvalidArgument("total_loss: non-finite loss term");
    if (v < 0.0) throw InvalidArgument("total_loss: negative loss term");
  }
  LossBreakdown out;
  out.heat = parts.heat;
  out.off = parts.off;
  out.seg = config.multitask_enabled ? parts.seg : 0.0;
  out.wh = parts.wh;
  out.total = out.heat + out.off + weights.seg * out.seg + weights.wh * out.wh;
  return out;
}

}  // namespace spotnet
