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
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

namespace spotnet {
namespace {

using LossFn = std::function<double(std::span<const double>, std::span<double>)>;

// Relative error between the analytic gradient and central differences,
// max over coordinates, scaled by the largest gradient magnitude.
double grad_rel_error(const LossFn& f, std::vector<double> x, double h = 1e-4) {
  std::vector<double> g(x.size());
  f(x, g);
  double worst = 0.0;
  double scale = 1e-8;
  for (double v : g) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x, {});
    x[i] = keep - h;
    const double fm = f(x, {});
    x[i] = keep;
    worst = std::max(worst, std::abs((fp - fm) / (2.0 * h) - g[i]) / scale);
  }
  return worst;
}

TEST(BceTest, HandValues) {
  const std::vector<double> y{1.0, 0.0};
  EXPECT_NEAR(bce_seg(std::vector<double>{0.5, 0.5}, y), 0.693147, 1e-6);
  EXPECT_LT(bce_seg(std::vector<double>{1.0 - kProbEps, kProbEps}, y), 1e-6);
  EXPECT_NEAR(bce_seg(std::vector<double>{kProbEps}, std::vector<double>{1.0}), -std::log(1e-7),
              1e-3);
  EXPECT_NEAR(bce_seg(std::vector<double>{0.0}, std::vector<double>{1.0}), 16.118, 1e-3);
}

TEST(BceTest, ShapeMismatchAndPermutationInvariance) {
  EXPECT_THROW(bce_seg(std::vector<double>{0.5}, std::vector<double>{1.0, 0.0}), InvalidArgument);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> x(16);
  std::vector<double> y(16);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = static_cast<double>(rng() % 2);
  }
  const double a = bce_seg(x, y);
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> xs(16);
  std::vector<double> ys(16);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  EXPECT_NEAR(bce_seg(xs, ys), a, 1e-12);
}

TEST(MseTest, HandValue) {
  EXPECT_DOUBLE_EQ(mse_seg(std::vector<double>{0.5, 0.25}, std::vector<double>{1.0, 0.0}),
                   (0.25 + 0.0625) / 2.0);
}

TEST(FocalTest, HandValues) {
  // Center cell with p = 0.5, everything else exact.
  const std::vector<double> t{1.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(focal_heatmap(std::vector<double>{0.5, 0.0, 0.0, 0.0}, t), 0.173287, 1e-5);
  // Object predicted perfectly, a t = 0 cell at p = 0.5.
  EXPECT_NEAR(focal_heatmap(std::vector<double>{1.0, 0.5, 0.0, 0.0}, t), 0.173287, 1e-5);
  // Perfect prediction at the clamp.
  EXPECT_LT(focal_heatmap(std::vector<double>{1.0 - kProbEps, kProbEps, kProbEps, kProbEps}, t),
            1e-6);
}

TEST(FocalTest, PenaltyReductionNearCenters) {
  const std::vector<double> p{1.0, 0.5};
  const double far = focal_heatmap(p, std::vector<double>{1.0, 0.0});
  const double near = focal_heatmap(p, std::vector<double>{1.0, 0.5});
  EXPECT_NEAR(near, far * std::pow(0.5, 4), 1e-12);
}

TEST(FocalTest, DecreasesAsCenterScoreRises) {
  const std::vector<double> t{0.3, 1.0, 0.6};
  double prev = std::numeric_limits<double>::infinity();
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double l = focal_heatmap(std::vector<double>{0.2, p, 0.1}, t);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(FocalTest, NormalizesByObjectCount) {
  const std::vector<double> p{0.5, 0.5, 0.0};
  EXPECT_NEAR(focal_heatmap(p, std::vector<double>{1.0, 1.0, 0.0}), 0.173287, 1e-5);
  // No objects: divide by one.
  EXPECT_NEAR(focal_heatmap(std::vector<double>{0.5}, std::vector<double>{0.0}), 0.173287, 1e-5);
}

TEST(L1Test, HandValues) {
  const std::vector<double> pred(2 * 4 * 4, 0.0);
  std::vector<double> p = pred;
  RegressionMap m{p, 1, 4, 4};
  CenterTarget c;
  c.y = 1;
  c.x = 2;
  c.wh = {0.0, 0.0};
  p[m.index(0, 0, 1, 2)] = 3.0;
  p[m.index(0, 1, 1, 2)] = 4.0;
  const std::vector<CenterTarget> cs{c};
  EXPECT_DOUBLE_EQ(l1_sparse(m, cs, RegressionKind::wh), 3.5);
  EXPECT_DOUBLE_EQ(l1_sparse(m, {}, RegressionKind::wh), 0.0);
  c.wh = {3.0, 4.0};
  const std::vector<CenterTarget> exact{c};
  EXPECT_DOUBLE_EQ(l1_sparse(m, exact, RegressionKind::wh), 0.0);
  c.y = 4;
  const std::vector<CenterTarget> bad{c};
  EXPECT_THROW(l1_sparse(m, bad, RegressionKind::wh), InvalidArgument);
}

TEST(TotalLossTest, WeightedSum) {
  const ModelConfig mt;
  const LossBreakdown a = total_loss({1.0, 1.0, 1.0, 1.0}, mt);
  EXPECT_EQ(a.total, 3.1);
  EXPECT_EQ(total_loss({0.0, 0.0, 0.0, 0.0}, mt).total, 0.0);
  ModelConfig base;
  base.attention_enabled = false;
  base.multitask_enabled = false;
  const LossBreakdown b = total_loss({1.0, 1.0, 5.0, 1.0}, base);
  EXPECT_DOUBLE_EQ(b.total, 2.1);
  EXPECT_EQ(b.seg, 0.0);
}

TEST(TotalLossTest, RejectsNanAndNegative) {
  const ModelConfig mt;
  EXPECT_THROW(total_loss({std::nan(""), 0.0, 0.0, 0.0}, mt), InvalidArgument);
  EXPECT_THROW(total_loss({0.0, 0.0, 0.0, std::numeric_limits<double>::infinity()}, mt),
               InvalidArgument);
  EXPECT_THROW(total_loss({0.0, -1.0, 0.0, 0.0}, mt), InvalidArgument);
}

TEST(TotalLossTest, WidthHeightTermIsLinear) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const ModelConfig mt;
  for (int i = 0; i < 100; ++i) {
    const LossTerms p{u(rng), u(rng), u(rng), u(rng)};
    const double k = u(rng);
    LossTerms q = p;
    q.wh = k * p.wh;
    const LossTerms z{p.heat, p.off, p.seg, 0.0};
    const double base = total_loss(z, mt).total;
    EXPECT_NEAR(total_loss(q, mt).total - base, 0.1 * k * p.wh, 1e-12);
  }
}

TEST(GaussianRadiusTest, ReferenceValues) {
  // Reference values of the corner min-overlap rule (overlap 0.7).
  EXPECT_NEAR(gaussian_radius(10, 10), 2.7332005306815113, 1e-12);
  EXPECT_NEAR(gaussian_radius(5, 8), 1.689346597454362, 1e-12);
  EXPECT_NEAR(gaussian_radius(2.5, 6), 0.9783836498854477, 1e-12);
}

// Oracle: every cell evaluated against every box directly.
std::vector<double> brute_heatmap(const std::vector<LabeledBox>& boxes, int oh, int ow, int nc) {
  std::vector<double> hm(static_cast<std::size_t>(nc) * oh * ow, 0.0);
  for (const LabeledBox& lb : boxes) {
    const double cx = (lb.box.x1 + lb.box.x2) / 8.0;
    const double cy = (lb.box.y1 + lb.box.y2) / 8.0;
    const int ccx = static_cast<int>(cx);
    const int ccy = static_cast<int>(cy);
    const int r = static_cast<int>(
        gaussian_radius((lb.box.y2 - lb.box.y1) / 4.0, (lb.box.x2 - lb.box.x1) / 4.0));
    const double sigma = (2.0 * r + 1.0) / 6.0;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        if (std::abs(y - ccy) > r || std::abs(x - ccx) > r) continue;
        const double d2 = (y - ccy) * (y - ccy) + (x - ccx) * (x - ccx);
        double& v = hm[(static_cast<std::size_t>(lb.class_id) * oh + y) * ow + x];
        double g = std::exp(-d2 / (2.0 * sigma * sigma));
        if (g < std::numeric_limits<double>::epsilon()) g = 0.0;
        v = std::max(v, g);
      }
    }
  }
  return hm;
}

TEST(SplatTest, AlignedCenterHasZeroOffset) {
  // Center (20, 24) lands exactly on cell (5, 6).
  const std::vector<LabeledBox> boxes{{0, Box{10, 14, 30, 34}}};
  const DetectionTargets t = splat_targets(boxes, 16, 16, 2);
  ASSERT_EQ(t.centers.size(), 1u);
  EXPECT_EQ(t.centers[0].x, 5);
  EXPECT_EQ(t.centers[0].y, 6);
  EXPECT_DOUBLE_EQ(t.centers[0].offset[0], 0.0);
  EXPECT_DOUBLE_EQ(t.centers[0].offset[1], 0.0);
}

TEST(SplatTest, WidthHeightTargetAndPeak) {
  const std::vector<LabeledBox> boxes{{1, Box{3, 5, 43, 25}}};  // 40 x 20, center (23, 15)
  const DetectionTargets t = splat_targets(boxes, 16, 16, 2);
  ASSERT_EQ(t.centers.size(), 1u);
  const CenterTarget& c = t.centers[0];
  EXPECT_EQ(c.x, 5);
  EXPECT_EQ(c.y, 3);
  EXPECT_DOUBLE_EQ(c.wh[0], 40.0);
  EXPECT_DOUBLE_EQ(c.wh[1], 20.0);
  EXPECT_DOUBLE_EQ(c.offset[0], 23.0 / 4.0 - 5.0);
  EXPECT_DOUBLE_EQ(c.offset[1], 15.0 / 4.0 - 3.0);
  EXPECT_EQ(t.heatmap.at(1, 3, 5), 1.0);
  double mx = 0.0;
  for (double v : t.heatmap.values) mx = std::max(mx, v);
  EXPECT_EQ(mx, 1.0);
  EXPECT_EQ(t.wh_map[3 * 16 + 5], 40.0);
  EXPECT_EQ(t.wh_map[256 + 3 * 16 + 5], 20.0);
}

TEST(SplatTest, MatchesBruteForceOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int oh = 4 + static_cast<int>(rng() % 13);
    const int ow = 4 + static_cast<int>(rng() % 13);
    std::vector<LabeledBox> boxes;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
      const double w = 4.0 + u(rng) * (ow * 4 - 4);
      const double h = 4.0 + u(rng) * (oh * 4 - 4);
      const double x1 = u(rng) * (ow * 4 - w);
      const double y1 = u(rng) * (oh * 4 - h);
      boxes.push_back({static_cast<int>(rng() % 2), Box{x1, y1, x1 + w, y1 + h}});
    }
    const DetectionTargets t = splat_targets(boxes, oh, ow, 2);
    const std::vector<double> oracle = brute_heatmap(boxes, oh, ow, 2);
    ASSERT_EQ(t.heatmap.values, oracle) << "trial " << trial;
  }
}

TEST(SplatTest, OverlappingSameClassKeepsBothPeaks) {
  const std::vector<LabeledBox> boxes{{0, Box{0, 0, 40, 40}}, {0, Box{12, 8, 52, 48}}};
  const DetectionTargets t = splat_targets(boxes, 16, 16, 1);
  EXPECT_EQ(t.heatmap.at(0, 5, 5), 1.0);
  EXPECT_EQ(t.heatmap.at(0, 7, 8), 1.0);
  EXPECT_EQ(t.heatmap.values, brute_heatmap(boxes, 16, 16, 1));
  EXPECT_EQ(t.centers.size(), 2u);
}

TEST(SplatTest, RejectsBoxesOutsideTheImage) {
  const std::vector<LabeledBox> out{{0, Box{-1, 0, 10, 10}}};
  EXPECT_THROW(splat_targets(out, 16, 16, 1), InvalidArgument);
  const std::vector<LabeledBox> wide{{0, Box{0, 0, 65, 10}}};
  EXPECT_THROW(splat_targets(wide, 16, 16, 1), InvalidArgument);
  const std::vector<LabeledBox> cls{{3, Box{0, 0, 10, 10}}};
  EXPECT_THROW(splat_targets(cls, 16, 16, 2), InvalidArgument);
}

TEST(GradientOracleTest, AnalyticMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> prob(0.02, 0.98);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 8);
    const int w = 1 + static_cast<int>(rng() % 8);
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> x(n);
    std::vector<double> y(n);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = prob(rng);
      y[i] = static_cast<double>(rng() % 2);
      t[i] = rng() % 5 == 0 ? 1.0 : prob(rng) * 0.9;
    }
    EXPECT_LT(grad_rel_error([&](auto p, auto g) { return bce_seg(p, y, g); }, x), 1e-3);
    EXPECT_LT(grad_rel_error([&](auto p, auto g) { return mse_seg(p, y, g); }, x), 1e-3);
    EXPECT_LT(grad_rel_error([&](auto p, auto g) { return focal_heatmap(p, t, g); }, x), 1e-3);

    // Sparse L1 over a 1 x 2 x h x w map with a few random centers; keep the
    // prediction away from the kink at pred == target.
    std::vector<double> r(2 * n);
    for (double& v : r) v = prob(rng) * 10.0;
    std::vector<CenterTarget> centers;
    for (int k = 0; k < 3; ++k) {
      CenterTarget c;
      c.y = static_cast<int>(rng() % h);
      c.x = static_cast<int>(rng() % w);
      c.wh = {prob(rng) * 10.0, prob(rng) * 10.0};
      c.offset = {prob(rng), prob(rng)};
      centers.push_back(c);
    }
    for (RegressionKind kind : {RegressionKind::wh, RegressionKind::offset}) {
      EXPECT_LT(grad_rel_error(
                    [&](auto p, auto g) {
                      return l1_sparse(RegressionMap{p, 1, h, w}, centers, kind, g);
                    },
                    r, 1e-6),
                1e-3);
    }
  }
}

}  // namespace
}  // namespace spotnet
