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

#include "spotnet/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "spotnet/image_io.hpp"
#include "test_util.hpp"

namespace spotnet {
namespace {

TEST(IouTest, HandValuesAndSymmetry) {
  const Box a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{20, 20, 30, 30}), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{5, 0, 15, 10}), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{3, 3, 3, 8}), 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 100; ++i) {
    const Box p{u(rng), u(rng), u(rng) + 50, u(rng) + 50};
    const Box q{u(rng), u(rng), u(rng) + 50, u(rng) + 50};
    EXPECT_EQ(iou(p, q), iou(q, p));
    EXPECT_GE(iou(p, q), 0.0);
    EXPECT_LE(iou(p, q), 1.0);
  }
}

// Oracle: enumerate every injective assignment of score-ordered detections
// to same-frame, same-class truths with IoU >= iou_min and keep the
// assignment whose per-detection (IoU, -truth index) sequence is
// lexicographically largest. Then 11-point AP from first principles.
struct FlatDet {
  int frame;
  Detection det;
};

double oracle_ap(const std::vector<FlatDet>& dets_in, const std::vector<FrameTruth>& gts,
                 double iou_min) {
  std::vector<FlatDet> dets = dets_in;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const FlatDet& a, const FlatDet& b) { return a.det.score > b.det.score; });
  std::vector<std::pair<int, LabeledBox>> truths;
  for (const FrameTruth& f : gts) {
    for (const LabeledBox& b : f.objects) truths.emplace_back(f.frame, b);
  }
  const int n_gt = static_cast<int>(truths.size());

  using Key = std::vector<std::pair<double, int>>;
  Key best_key;
  std::vector<int> best_assign;
  std::vector<int> assign(dets.size(), -1);
  std::vector<bool> used(truths.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == dets.size()) {
      Key key;
      for (std::size_t d = 0; d < dets.size(); ++d) {
        key.emplace_back(assign[d] < 0 ? -1.0 : iou(dets[d].det.box, truths[assign[d]].second.box),
                         assign[d] < 0 ? 0 : -assign[d]);
      }
      if (best_assign.empty() || key > best_key) {
        best_key = key;
        best_assign = assign;
      }
      return;
    }
    assign[i] = -1;
    rec(i + 1);
    for (std::size_t g = 0; g < truths.size(); ++g) {
      if (used[g] || truths[g].first != dets[i].frame ||
          truths[g].second.class_id != dets[i].det.class_id ||
          iou(dets[i].det.box, truths[g].second.box) < iou_min) {
        continue;
      }
      used[g] = true;
      assign[i] = static_cast<int>(g);
      rec(i + 1);
      used[g] = false;
      assign[i] = -1;
    }
  };
  rec(0);

  std::vector<double> recall;
  std::vector<double> precision;
  int tp = 0;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    tp += best_assign[d] >= 0 ? 1 : 0;
    recall.push_back(static_cast<double>(tp) / n_gt);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(d + 1));
  }
  double sum = 0.0;
  for (int i = 0; i <= 10; ++i) {
    double p = 0.0;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (recall[d] >= i / 10.0) p = std::max(p, precision[d]);
    }
    sum += p;
  }
  return sum / 11.0;
}

std::vector<FrameDetections> group(const std::vector<FlatDet>& flat, int n_frames) {
  std::vector<FrameDetections> out(n_frames);
  for (int f = 0; f < n_frames; ++f) out[f].frame = f;
  for (const FlatDet& d : flat) out[d.frame].detections.push_back(d.det);
  return out;
}

TEST(AveragePrecisionTest, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_frames = 1 + static_cast<int>(rng() % 2);
    std::vector<FrameTruth> gts(n_frames);
    for (int f = 0; f < n_frames; ++f) {
      gts[f].frame = f;
      const int n = static_cast<int>(rng() % 4);
      for (int i = 0; i < n; ++i) {
        const double x = u(rng) * 30;
        const double y = u(rng) * 30;
        gts[f].objects.push_back({0, Box{x, y, x + 8 + u(rng) * 8, y + 8 + u(rng) * 8}});
      }
    }
    if (std::all_of(gts.begin(), gts.end(), [](const FrameTruth& f) { return f.objects.empty(); })) {
      gts[0].objects.push_back({0, Box{1, 1, 11, 11}});
    }
    // Up to five detections, mostly jittered copies of truths.
    std::vector<FlatDet> flat;
    const int n_det = static_cast<int>(rng() % 6);
    for (int i = 0; i < n_det; ++i) {
      const int f = static_cast<int>(rng() % n_frames);
      Box b{u(rng) * 30, u(rng) * 30, 0, 0};
      b.x2 = b.x1 + 10;
      b.y2 = b.y1 + 10;
      if (!gts[f].objects.empty() && u(rng) < 0.8) {
        const Box& g = gts[f].objects[rng() % gts[f].objects.size()].box;
        const double j = 3.0 * u(rng);
        b = Box{g.x1 + j * (u(rng) - 0.5), g.y1 + j * (u(rng) - 0.5), g.x2 + j * (u(rng) - 0.5),
                g.y2 + j * (u(rng) - 0.5)};
      }
      flat.push_back({f, Detection{0, u(rng), b}});
    }
    for (double iou_min : {0.5, 0.7}) {
      const PRCurve c = average_precision(group(flat, n_frames), gts, iou_min);
      ASSERT_EQ(c.ap, oracle_ap(flat, gts, iou_min)) << "trial " << trial << " iou " << iou_min;
    }
  }
}

TEST(AveragePrecisionTest, HandComputedMixedCase) {
  std::vector<FrameTruth> gts{{0, {{0, Box{0, 0, 10, 10}}, {0, Box{20, 0, 30, 10}},
                                   {0, Box{40, 0, 50, 10}}}}};
  std::vector<FrameDetections> dets{{0,
                                     {{0, 0.9, Box{0, 0, 10, 10}},
                                      {0, 0.85, Box{60, 60, 70, 70}},
                                      {0, 0.8, Box{20, 0, 30, 10}}}}};
  const PRCurve c = average_precision(dets, gts, 0.7);
  // Recall/precision: (1/3, 1), (1/3, 1/2), (2/3, 2/3).
  EXPECT_DOUBLE_EQ(c.ap, 6.0 / 11.0);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_DOUBLE_EQ(c.points[1].precision, 0.5);
  EXPECT_EQ(c.n_gt, 3);
}

TEST(AveragePrecisionTest, PerfectEmptyAndGreedy) {
  const std::vector<FrameTruth> gts{{0, {{0, Box{0, 0, 10, 10}}}}, {1, {{0, Box{5, 5, 20, 20}}}}};
  std::vector<FrameDetections> perfect;
  for (const FrameTruth& f : gts) {
    FrameDetections fd{f.frame, {}};
    for (const LabeledBox& b : f.objects) fd.detections.push_back({b.class_id, 0.9, b.box});
    perfect.push_back(fd);
  }
  EXPECT_DOUBLE_EQ(average_precision(perfect, gts, 0.7).ap, 1.0);
  EXPECT_DOUBLE_EQ(mean_average_precision(perfect, gts, 0.7).map, 1.0);
  EXPECT_DOUBLE_EQ(average_precision({}, gts, 0.7).ap, 0.0);

  // A duplicate detection of one truth is a false positive.
  std::vector<FrameDetections> dup{{0, {{0, 0.9, Box{0, 0, 10, 10}}, {0, 0.8, Box{0, 0, 10, 10}}}}};
  const PRCurve c = average_precision(dup, gts, 0.7);
  EXPECT_DOUBLE_EQ(c.points.back().precision, 0.5);
  EXPECT_DOUBLE_EQ(c.points.back().recall, 0.5);
}

TEST(AveragePrecisionTest, LowestScoreFalsePositiveNeverHelps) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FrameTruth> gts{{0, {}}};
    for (int i = 0; i < 3; ++i) {
      const double x = 40.0 * i;
      gts[0].objects.push_back({0, Box{x, 0, x + 10, 10}});
    }
    std::vector<FrameDetections> dets{{0, {}}};
    for (int i = 0; i < 3; ++i) {
      if (u(rng) < 0.7) dets[0].detections.push_back({0, 0.2 + u(rng) * 0.8, gts[0].objects[i].box});
    }
    const double before = average_precision(dets, gts, 0.7).ap;
    dets[0].detections.push_back({0, 0.1, Box{200, 200, 210, 210}});
    EXPECT_LE(average_precision(dets, gts, 0.7).ap, before);
  }
}

TEST(AveragePrecisionTest, ContinuousMode) {
  std::vector<FrameTruth> gts{{0, {{0, Box{0, 0, 10, 10}}, {0, Box{20, 0, 30, 10}}}}};
  std::vector<FrameDetections> dets{{0,
                                     {{0, 0.9, Box{0, 0, 10, 10}},
                                      {0, 0.8, Box{60, 60, 70, 70}},
                                      {0, 0.7, Box{20, 0, 30, 10}}}}};
  // Envelope: precision 1 up to recall 0.5, then 2/3 up to recall 1.
  EXPECT_DOUBLE_EQ(average_precision(dets, gts, 0.7, std::nullopt, ApMode::continuous).ap,
                   0.5 + 0.5 * 2.0 / 3.0);
}

TEST(MeanAveragePrecisionTest, ClassAveraging) {
  const std::vector<FrameTruth> gts{{0, {{0, Box{0, 0, 10, 10}}, {1, Box{20, 20, 30, 30}}}}};
  // Class 0 perfect; class 1 detected with the wrong label only.
  std::vector<FrameDetections> dets{{0, {{0, 0.9, Box{0, 0, 10, 10}}, {0, 0.8, Box{20, 20, 30, 30}}}}};
  const MapResult r = mean_average_precision(dets, gts, 0.7);
  EXPECT_DOUBLE_EQ(r.per_class.at(0).ap, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class.at(1).ap, 0.0);
  EXPECT_DOUBLE_EQ(r.map, 0.5);

  const std::vector<FrameTruth> single{{0, {{0, Box{0, 0, 10, 10}}}}};
  EXPECT_DOUBLE_EQ(mean_average_precision(dets, single, 0.7).map,
                   average_precision(dets, single, 0.7, 0).ap);
  EXPECT_THROW(mean_average_precision(dets, std::vector<FrameTruth>{{0, {}}}, 0.7), InvalidArgument);
}

TEST(BinarizeTest, Examples) {
  const ProbabilityMap ones(16, 16, 1.0f);
  EXPECT_EQ(binarize_and_mask(ones, {}).count(), 0u);
  const std::vector<Detection> dets{{0, 0.9, Box{2, 2, 6, 8}}};
  const SegMask m = binarize_and_mask(ones, dets);
  const std::vector<Box> boxes{dets[0].box};
  EXPECT_EQ(m, box_union_mask(16, 16, std::span<const Box>(boxes)));

  std::mt19937_64 rng(5);
  ProbabilityMap att(16, 16);
  for (float& v : att.values) v = static_cast<float>(rng() % 100) / 100.0f;
  const SegMask r = binarize_and_mask(att, dets, 0.5);
  const SegMask u = box_union_mask(16, 16, std::span<const Box>(boxes));
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      EXPECT_EQ(r.at(y, x), (att.at(y, x) >= 0.5f && u.at(y, x)) ? 1 : 0);
    }
  }
}

TEST(FMeasureTest, Examples) {
  SegMask gt(1, 4);
  gt.at(0, 0) = gt.at(0, 1) = gt.at(0, 2) = 1;
  const FMeasure same = f_measure(gt, gt);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f, 1.0);

  SegMask pred(1, 4);
  pred.at(0, 0) = pred.at(0, 1) = pred.at(0, 3) = 1;  // TP 2, FP 1, FN 1
  const FMeasure fm = f_measure(pred, gt);
  EXPECT_NEAR(fm.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(fm.recall, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(fm.f, 2.0 / 3.0, 1e-9);

  const FMeasure empty = f_measure(SegMask(1, 4), gt);
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f, 0.0);
  EXPECT_THROW(f_measure(SegMask(2, 2), gt), InvalidArgument);
}

TEST(PrExportTest, CsvAndPlot) {
  testing::TempDir dir;
  PRCurve c;
  c.points = {{0.5, 1.0}, {1.0, 0.5}};
  write_pr_csv(dir.path() / "pr.csv", {{"a", c}});
  const std::string csv = read_text_file(dir.path() / "pr.csv");
  EXPECT_EQ(csv.rfind("name,recall,precision\n", 0), 0u);
  EXPECT_NE(csv.find("a,0.500000,1.000000\n"), std::string::npos);
  render_pr_plot(dir.path() / "pr.png", {{"a", c}});
  const Image img = read_png(dir.path() / "pr.png");
  EXPECT_GT(img.width, 0);
}

}  // namespace
}  // namespace spotnet
