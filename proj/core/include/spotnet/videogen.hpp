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

// Deterministic synthetic video scenes with exact ground truth.
//
// Every object is rendered from an analytic shape, so the per-frame boxes and
// foreground masks are known exactly. The annotator and the detector are both
// scored against these oracle masks.

#ifndef SPOTNET_VIDEOGEN_HPP_
#define SPOTNET_VIDEOGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotnet/types.hpp"

namespace spotnet {

enum class ObjectKind { rectangle, ellipse };
enum class Background { flat, textured_noise };

/// Rectangles are class 0, ellipses class 1.
constexpr int class_of(ObjectKind kind) { return kind == ObjectKind::rectangle ? 0 : 1; }
inline constexpr int kNumSyntheticClasses = 2;

struct CameraMotion {
  bool pan = false;
  int dx = 0;  // px/frame the view window moves right
  int dy = 0;  // px/frame the view window moves down
};

struct SceneConfig {
  int height = 128;
  int width = 128;
  int channels = 3;
  int n_objects = 3;
  std::vector<ObjectKind> object_kinds{ObjectKind::rectangle, ObjectKind::ellipse};
  double speed_min = 1.0;  // px/frame
  double speed_max = 3.0;
  int size_min = 14;  // px per side
  int size_max = 32;
  CameraMotion camera;
  Background background = Background::textured_noise;
  int n_frames = 60;
  double noise_sigma = 3.0;  // 8-bit intensity units
  std::uint64_t seed = 0;

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

struct VideoSequence {
  SceneConfig config;
  std::vector<Image> frames;
  std::vector<std::vector<LabeledBox>> gt_boxes;
  std::vector<SegMask> oracle_masks;  // empty when read from disk without masks

  int size() const { return static_cast<int>(frames.size()); }
};

VideoSequence gen_sequence(const SceneConfig& config);

/// Writes frame_%06d.png, mask_%06d.png, gt.json and sequence.json into dir
/// (created if missing). Returns the manifest that was written.
nlohmann::json write_sequence(const VideoSequence& seq, const std::filesystem::path& dir);

/// Inverse of write_sequence. Oracle masks are loaded when present.
VideoSequence read_sequence(const std::filesystem::path& dir);

/// Per-frame box records: [{frame, objects: [{class, x1, y1, x2, y2}]}].
nlohmann::json boxes_to_json(const std::vector<std::vector<LabeledBox>>& boxes);
std::vector<std::vector<LabeledBox>> boxes_from_json(const nlohmann::json& records);

}  // namespace spotnet

#endif  // SPOTNET_VIDEOGEN_HPP_
