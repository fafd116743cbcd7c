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

// Detection and segmentation metrics.

#ifndef SPOTNET_EVALKIT_HPP_
#define SPOTNET_EVALKIT_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spotnet/decode.hpp"
#include "spotnet/types.hpp"

namespace spotnet {

/// Intersection over union; 0 for disjoint or zero-area boxes.
double iou(const Box& a, const Box& b);

struct FrameTruth {
  int frame = 0;
  std::vector<LabeledBox> objects;
};

/// Ground truth in the per-frame layout returned by read_sequence.
std::vector<FrameTruth> truth_from_boxes(const std::vector<std::vector<LabeledBox>>& boxes);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per detection in score order
  double ap = 0.0;
  int n_gt = 0;
};

enum class ApMode {
  eleven_point,  // mean interpolated precision at recall 0, 0.1, ..., 1
  continuous,    // area under the monotone precision envelope
};

/// Greedy score-ordered matching: each detection takes the highest-IoU
/// unmatched ground truth of its frame and class with IoU >= iou_min.
/// With class_id unset, detections and truths are matched across classes
/// only when their class ids agree.
PRCurve average_precision(std::span<const FrameDetections> dets, std::span<const FrameTruth> gts,
                          double iou_min, std::optional<int> class_id = std::nullopt,
                          ApMode mode = ApMode::eleven_point);

/// 11-point (or continuous) AP from TP flags in score order.
double interpolated_ap(const std::vector<PRPoint>& points, ApMode mode);

struct MapResult {
  double map = 0.0;
  std::map<int, PRCurve> per_class;
};

/// Unweighted mean of per-class AP over the classes present in gts.
/// Throws when gts contain no object at all.
MapResult mean_average_precision(std::span<const FrameDetections> dets,
                                 std::span<const FrameTruth> gts, double iou_min,
                                 ApMode mode = ApMode::eleven_point);

/// (attention >= thresh) restricted to the union of detected boxes.
SegMask binarize_and_mask(const ProbabilityMap& attention, std::span<const Detection> dets,
                          double thresh = 0.5);

struct FMeasure {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Pixel-level precision, recall and F; every undefined ratio is 0.
FMeasure f_measure(const SegMask& pred, const SegMask& gt);

/// CSV with columns name,recall,precision.
void write_pr_csv(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, PRCurve>>& curves);
/// Line plot of the curves as a PNG image.
void render_pr_plot(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, PRCurve>>& curves);

}  // namespace spotnet

#endif  // SPOTNET_EVALKIT_HPP_
