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

#include "spotnet/videogen.hpp"

#include <gtest/gtest.h>

#include "spotnet/image_io.hpp"
#include "test_util.hpp"

namespace spotnet {
namespace {

SceneConfig small_config(std::uint64_t seed) {
  SceneConfig c;
  c.height = 64;
  c.width = 64;
  c.n_frames = 12;
  c.size_min = 8;
  c.size_max = 16;
  c.seed = seed;
  return c;
}

TEST(VideogenTest, EmptySceneHasNoBoxesAndEmptyMasks) {
  SceneConfig c = small_config(1);
  c.n_objects = 0;
  const VideoSequence seq = gen_sequence(c);
  ASSERT_EQ(seq.size(), c.n_frames);
  for (int t = 0; t < seq.size(); ++t) {
    EXPECT_TRUE(seq.gt_boxes[t].empty());
    EXPECT_EQ(seq.oracle_masks[t].count(), 0u);
  }
}

TEST(VideogenTest, SameSeedIsBitIdentical) {
  const VideoSequence a = gen_sequence(small_config(7));
  const VideoSequence b = gen_sequence(small_config(7));
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.gt_boxes, b.gt_boxes);
  EXPECT_EQ(a.oracle_masks, b.oracle_masks);
  const VideoSequence c = gen_sequence(small_config(8));
  EXPECT_NE(a.frames, c.frames);
}

TEST(VideogenTest, StaticSquareHasArea400) {
  SceneConfig c = small_config(3);
  c.n_objects = 1;
  c.object_kinds = {ObjectKind::rectangle};
  c.size_min = 20;
  c.size_max = 20;
  c.speed_min = 0.0;
  c.speed_max = 0.0;
  const VideoSequence seq = gen_sequence(c);
  for (int t = 0; t < seq.size(); ++t) {
    ASSERT_EQ(seq.gt_boxes[t].size(), 1u);
    EXPECT_DOUBLE_EQ(seq.gt_boxes[t][0].box.area(), 400.0);
    EXPECT_EQ(seq.gt_boxes[t][0].class_id, 0);
    EXPECT_EQ(seq.oracle_masks[t].count(), 400u);
    EXPECT_EQ(seq.gt_boxes[t][0].box, seq.gt_boxes[0][0].box);
  }
}

TEST(VideogenTest, OracleInsideBoxesAndBoxesAreTight) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneConfig c = small_config(seed);
    c.n_objects = 3;
    if (seed % 2 == 1) c.camera = CameraMotion{true, 2, -1};
    const VideoSequence seq = gen_sequence(c);
    for (int t = 0; t < seq.size(); ++t) {
      const SegMask& m = seq.oracle_masks[t];
      const SegMask u =
          box_union_mask(c.height, c.width, std::span<const LabeledBox>(seq.gt_boxes[t]));
      for (std::size_t i = 0; i < m.values.size(); ++i) {
        if (m.values[i] != 0) {
          ASSERT_EQ(u.values[i], 1) << "seed " << seed << " frame " << t;
        }
      }
      for (const LabeledBox& lb : seq.gt_boxes[t]) {
        const Box& b = lb.box;
        ASSERT_GE(b.x1, 0.0);
        ASSERT_GE(b.y1, 0.0);
        ASSERT_LE(b.x2, c.width);
        ASSERT_LE(b.y2, c.height);
        const int x1 = static_cast<int>(b.x1);
        const int y1 = static_cast<int>(b.y1);
        const int x2 = static_cast<int>(b.x2) - 1;
        const int y2 = static_cast<int>(b.y2) - 1;
        bool left = false, right = false, top = false, bottom = false;
        for (int y = y1; y <= y2; ++y) {
          left = left || m.at(y, x1) != 0;
          right = right || m.at(y, x2) != 0;
        }
        for (int x = x1; x <= x2; ++x) {
          top = top || m.at(y1, x) != 0;
          bottom = bottom || m.at(y2, x) != 0;
        }
        EXPECT_TRUE(left && right && top && bottom) << "seed " << seed << " frame " << t;
      }
    }
  }
}

TEST(VideogenTest, PanShiftsTheBackground) {
  SceneConfig c = small_config(4);
  c.n_objects = 0;
  c.noise_sigma = 0.0;
  c.camera = CameraMotion{true, 3, 1};
  const VideoSequence seq = gen_sequence(c);
  const Image& a = seq.frames[0];
  const Image& b = seq.frames[1];
  for (int y = 0; y + 1 < c.height; ++y) {
    for (int x = 0; x + 3 < c.width; ++x) {
      ASSERT_EQ(b.at(y, x, 0), a.at(y + 1, x + 3, 0));
    }
  }
}

TEST(VideogenTest, InvalidConfigsAreRejected) {
  auto expect_bad = [](auto mutate) {
    SceneConfig c;
    mutate(c);
    EXPECT_THROW(gen_sequence(c), InvalidArgument);
  };
  expect_bad([](SceneConfig& c) { c.width = 130; });
  expect_bad([](SceneConfig& c) { c.n_frames = 1; });
  expect_bad([](SceneConfig& c) { c.size_min = 3; });
  expect_bad([](SceneConfig& c) { c.size_max = 200; });
  expect_bad([](SceneConfig& c) { c.object_kinds.clear(); });
  expect_bad([](SceneConfig& c) { c.n_objects = -1; });
  expect_bad([](SceneConfig& c) { c.noise_sigma = -1.0; });
  expect_bad([](SceneConfig& c) { c.speed_max = 0.5; });
}

TEST(VideogenTest, ConfigJsonRoundTrip) {
  SceneConfig c = small_config(11);
  c.camera = CameraMotion{true, -2, 1};
  c.background = Background::flat;
  c.object_kinds = {ObjectKind::ellipse};
  const SceneConfig back = nlohmann::json(c).get<SceneConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
  EXPECT_THROW(nlohmann::json::parse(R"({"background": "plaid"})").get<SceneConfig>(),
               InvalidArgument);
}

TEST(VideogenTest, WriteReadRoundTrip) {
  testing::TempDir dir;
  const VideoSequence seq = gen_sequence(small_config(5));
  const nlohmann::json manifest = write_sequence(seq, dir.path());
  EXPECT_EQ(manifest.at("frames").size(), static_cast<std::size_t>(seq.size()));
  EXPECT_EQ(manifest.at("n_frames").get<int>(), seq.size());
  EXPECT_EQ(manifest.at("gt_sha1").get<std::string>(), git_blob_hash_file(dir.path() / "gt.json"));

  const VideoSequence back = read_sequence(dir.path());
  EXPECT_EQ(back.gt_boxes, seq.gt_boxes);
  EXPECT_EQ(back.frames, seq.frames);
  EXPECT_EQ(back.oracle_masks, seq.oracle_masks);

  for (int t = 0; t < seq.size(); ++t) {
    const Image raw = read_png(dir.path() / indexed_name("mask", t));
    ASSERT_EQ(raw.channels, 1);
    for (std::uint8_t v : raw.pixels) ASSERT_TRUE(v == 0 || v == 255);
  }
}

}  // namespace
}  // namespace spotnet
