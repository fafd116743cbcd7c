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

#ifndef SPOTNET_DECODE_HPP_
#define SPOTNET_DECODE_HPP_

#include <vector>

#include <nlohmann/json.hpp>

#include "spotnet/net.hpp"
#include "spotnet/tensor.hpp"
#include "spotnet/types.hpp"

namespace spotnet {

struct Peak {
  int class_id = 0;
  int y = 0;
  int x = 0;
  float score = 0.0f;

  friend bool operator==(const Peak&, const Peak&) = default;
};

struct Detection {
  int class_id = 0;
  double score = 0.0;
  Box box;
};

struct DecodeParams {
  int k = 100;
  double score_thresh = 0.25;
  int stride = kOutputStride;
};

/// Cells that are >= every neighbour in their 3x3 window (per class), top-k
/// by score. Equal scores are ordered by (class, y, x) ascending.
std::vector<Peak> extract_peaks(const Tensor& heatmap, int k, int batch = 0);

/// center = (cell + offset) * stride; box = center -/+ (w, h) / 2 with
/// negative sizes clamped to 0. Boxes are clipped to the image; boxes below
/// score_thresh or with zero area after clipping are dropped.
std::vector<Detection> assemble_boxes(const std::vector<Peak>& peaks, const Tensor& wh,
                                      const Tensor& offset, int stride, double score_thresh,
                                      int image_h, int image_w, int batch = 0);

/// Forward pass + peak extraction + box assembly for batch item 0.
std::vector<Detection> detect(const Tensor& image, Detector& model, const DecodeParams& params = {},
                              const ForwardOptions& options = {});
std::vector<Detection> decode_output(const NetworkOutput& out, const DecodeParams& params,
                                     int image_h, int image_w, int batch = 0);

/// Records {frame, detections: [{class, score, x1, y1, x2, y2}]}.
struct FrameDetections {
  int frame = 0;
  std::vector<Detection> detections;
};
nlohmann::json detections_to_json(const std::vector<FrameDetections>& frames);
std::vector<FrameDetections> detections_from_json(const nlohmann::json& records);

}  // namespace spotnet

#endif  // SPOTNET_DECODE_HPP_
