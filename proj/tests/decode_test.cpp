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

#include "spotnet/decode.hpp"

#include <algorithm>
#include <random>
#include <tuple>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace spotnet {
namespace {

// Oracle: explicit neighbour scan over every cell, then a full sort.
std::vector<Peak> brute_peaks(const Tensor& hm, int k) {
  const Shape& s = hm.shape();
  std::vector<Peak> all;
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const float v = hm.at(0, c, y, x);
        bool keep = true;
        for (int dy = -1; dy <= 1 && keep; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= s.h || xx >= s.w) continue;
            if (hm.at(0, c, yy, xx) > v) {
              keep = false;
              break;
            }
          }
        }
        if (keep) all.push_back(Peak{c, y, x, v});
      }
    }
  }
  std::sort(all.begin(), all.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.class_id, a.y, a.x) < std::tie(b.class_id, b.y, b.x);
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

TEST(ExtractPeaksTest, MatchesBruteForceOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 32);
    const int w = 1 + static_cast<int>(rng() % 32);
    const int c = 1 + static_cast<int>(rng() % 3);
    Tensor hm(Shape{1, c, h, w});
    // Every third trial uses a handful of levels to force plateaus and ties.
    const int levels = trial % 3 == 0 ? 4 : 0;
    std::uniform_real_distribution<float> u(0.001f, 0.999f);
    for (float& v : hm.data()) {
      v = levels > 0 ? static_cast<float>(1 + rng() % levels) / (levels + 1) : u(rng);
    }
    const int k = 1 + static_cast<int>(rng() % 100);
    ASSERT_EQ(extract_peaks(hm, k), brute_peaks(hm, k)) << "trial " << trial;
  }
}

TEST(ExtractPeaksTest, IsolatedPeak) {
  Tensor hm(Shape{1, 2, 12, 12}, 0.01f);
  hm.at(0, 1, 7, 3) = 0.9f;
  const auto peaks = extract_peaks(hm, 10);
  // The 0.01 field itself is a plateau of 3x3 maxima away from the peak.
  ASSERT_FALSE(peaks.empty());
  EXPECT_EQ(peaks[0], (Peak{1, 7, 3, 0.9f}));
  int above = 0;
  for (const Peak& p : peaks) above += p.score > 0.01f ? 1 : 0;
  EXPECT_EQ(above, 1);
}

TEST(ExtractPeaksTest, UniformPlateauUsesTieOrder) {
  const Tensor hm(Shape{1, 1, 4, 4}, 0.5f);
  const auto peaks = extract_peaks(hm, 5);
  ASSERT_EQ(peaks.size(), 5u);
  EXPECT_EQ(peaks[0], (Peak{0, 0, 0, 0.5f}));
  EXPECT_EQ(peaks[4], (Peak{0, 1, 0, 0.5f}));
}

TEST(ExtractPeaksTest, TopOneAndBadK) {
  Tensor hm(Shape{1, 1, 9, 9}, 0.0f);
  hm.at(0, 0, 1, 1) = 0.8f;
  hm.at(0, 0, 6, 6) = 0.9f;
  const auto peaks = extract_peaks(hm, 1);
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_EQ(peaks[0], (Peak{0, 6, 6, 0.9f}));
  EXPECT_THROW(extract_peaks(hm, 0), InvalidArgument);
}

struct Maps {
  Tensor wh{Shape{1, 2, 16, 16}};
  Tensor offset{Shape{1, 2, 16, 16}};
};

TEST(AssembleBoxesTest, HandArithmetic) {
  Maps m;
  m.wh.at(0, 0, 5, 5) = 8.0f;
  m.wh.at(0, 1, 5, 5) = 8.0f;
  const auto dets = assemble_boxes({Peak{0, 5, 5, 0.9f}}, m.wh, m.offset, 4, 0.25, 64, 64);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].box, (Box{16, 16, 24, 24}));
  EXPECT_EQ(dets[0].class_id, 0);
}

TEST(AssembleBoxesTest, OffsetShiftsAndClipping) {
  Maps m;
  m.offset.at(0, 0, 0, 0) = 0.5f;
  m.offset.at(0, 1, 0, 0) = 0.25f;
  m.wh.at(0, 0, 0, 0) = 10.0f;
  m.wh.at(0, 1, 0, 0) = 4.0f;
  const auto dets = assemble_boxes({Peak{1, 0, 0, 0.5f}}, m.wh, m.offset, 4, 0.25, 64, 64);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].box, (Box{0, 0, 7, 3}));
}

TEST(AssembleBoxesTest, NegativeSizesAndThresholds) {
  Maps m;
  m.wh.at(0, 0, 2, 2) = -3.0f;
  m.wh.at(0, 1, 2, 2) = 5.0f;
  m.wh.at(0, 0, 8, 8) = 6.0f;
  m.wh.at(0, 1, 8, 8) = 6.0f;
  const std::vector<Peak> peaks{{0, 2, 2, 0.9f}, {0, 8, 8, 0.6f}};
  EXPECT_EQ(assemble_boxes(peaks, m.wh, m.offset, 4, 0.25, 64, 64).size(), 1u);
  EXPECT_TRUE(assemble_boxes(peaks, m.wh, m.offset, 4, 1.0, 64, 64).empty());
  EXPECT_EQ(assemble_boxes(peaks, m.wh, m.offset, 4, 0.7, 64, 64).size(), 0u);
}

TEST(AssembleBoxesTest, RaisingThresholdNeverAddsDetections) {
  std::mt19937_64 rng(3);
  Maps m;
  m.wh = testing::random_tensor(Shape{1, 2, 16, 16}, rng, -4.0f, 20.0f);
  m.offset = testing::random_tensor(Shape{1, 2, 16, 16}, rng, 0.0f, 1.0f);
  const Tensor hm = testing::random_tensor(Shape{1, 2, 16, 16}, rng, 0.0f, 1.0f);
  const auto peaks = extract_peaks(hm, 100);
  std::size_t prev = peaks.size() + 1;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const auto dets = assemble_boxes(peaks, m.wh, m.offset, 4, t, 64, 64);
    EXPECT_LE(dets.size(), prev);
    prev = dets.size();
    for (const Detection& d : dets) {
      EXPECT_LE(d.box.x1, d.box.x2);
      EXPECT_LE(d.box.y1, d.box.y2);
      EXPECT_GE(d.box.x1, 0.0);
      EXPECT_LE(d.box.x2, 64.0);
    }
  }
}

TEST(DetectTest, DeterministicBoundedAndLocalMaxima) {
  ModelConfig c;
  c.base_channels = 8;
  Detector net(c, 4);
  std::mt19937_64 rng(4);
  const Tensor img = testing::random_tensor(Shape{1, 3, 64, 64}, rng, 0.0f, 1.0f);
  DecodeParams p;
  p.k = 7;
  p.score_thresh = 0.0;
  const auto a = detect(img, net, p);
  const auto b = detect(img, net, p);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_LE(a.size(), 7u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_EQ(a[i].box, b[i].box);
  }
  const NetworkOutput o = net.forward(img);
  for (const Peak& pk : extract_peaks(o.heatmap, 7)) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int y = pk.y + dy;
        const int x = pk.x + dx;
        if (y < 0 || x < 0 || y >= 16 || x >= 16) continue;
        EXPECT_GE(pk.score, o.heatmap.at(0, pk.class_id, y, x));
      }
    }
  }
}

TEST(DetectTest, ZeroAttentionCapsScores) {
  ModelConfig c;
  c.base_channels = 8;
  Detector net(c, 5);
  std::mt19937_64 rng(5);
  const Tensor img = testing::random_tensor(Shape{1, 3, 64, 64}, rng, 0.0f, 1.0f);
  const Tensor zeros(Shape{1, c.base_channels, 16, 16});
  Tape tape(false);
  const HeadGraph h = net.detect_heads(tape, tape.constant(zeros));
  const float cap = tape.value(h.heatmap).max_abs();
  DecodeParams p;
  p.score_thresh = 0.0;
  for (const Detection& d : detect(img, net, p, ForwardOptions{0.0f})) {
    EXPECT_LE(d.score, cap);
  }
}

TEST(DetectionsJsonTest, RoundTrip) {
  std::vector<FrameDetections> frames{{0, {{1, 0.75, Box{1, 2, 3, 4}}}}, {3, {}}};
  const auto back = detections_from_json(detections_to_json(frames));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].frame, 0);
  EXPECT_EQ(back[0].detections[0].class_id, 1);
  EXPECT_EQ(back[0].detections[0].score, 0.75);
  EXPECT_EQ(back[0].detections[0].box, (Box{1, 2, 3, 4}));
  EXPECT_EQ(back[1].frame, 3);
  EXPECT_TRUE(back[1].detections.empty());
}

}  // namespace
}  // namespace spotnet
