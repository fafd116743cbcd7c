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

// Semi-supervised foreground labels from video motion.
//
// Fixed cameras go through an adaptive Gaussian-mixture background model;
// moving cameras go through dense polynomial-expansion optical flow with the
// dominant (median) motion removed. Either raw mask is then intersected with
// the ground-truth boxes of its frame, so every labelled pixel lies inside an
// annotated object.

#ifndef SPOTNET_ANNOTATE_HPP_
#define SPOTNET_ANNOTATE_HPP_

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotnet/types.hpp"
#include "spotnet/videogen.hpp"

namespace spotnet {

struct BgModelParams {
  int components = 3;
  double learning_rate = 0.01;
  /// Squared Mahalanobis distance (per channel) below which a pixel matches.
  double variance_threshold = 2.5 * 2.5;
  /// Cumulative weight of the components that model the background.
  double background_ratio = 0.7;
  double initial_variance = 30.0 * 30.0;
  double min_variance = 4.0 * 4.0;
  int warmup_frames = 20;
};

/// Per-pixel mixture of K spherical Gaussians (Stauffer-Grimson).
class BgModel {
 public:
  BgModel(int height, int width, int channels, BgModelParams params);

  /// Classify `frame` against the current model, then update the model.
  SegMask apply(const Image& frame);

  int frames_seen() const { return frames_seen_; }
  const BgModelParams& params() const { return params_; }

  double weight(int y, int x, int k) const { return weights_[index(y, x, k)]; }
  double variance(int y, int x, int k) const { return variances_[index(y, x, k)]; }
  /// max over pixels of |sum_k weight - 1|.
  double max_weight_sum_error() const;
  /// min over pixels and components of the variance.
  double min_variance() const;

 private:
  std::size_t index(int y, int x, int k) const {
    return (static_cast<std::size_t>(y) * width_ + x) * params_.components + k;
  }

  int height_;
  int width_;
  int channels_;
  BgModelParams params_;
  int frames_seen_ = 0;
  std::vector<double> weights_;
  std::vector<double> variances_;
  std::vector<double> means_;  // [pixel][k][channel]
};

/// Raw background-subtraction masks, one per frame; frames before
/// `warmup_frames` are all background.
std::vector<SegMask> bg_subtract_sequence(const VideoSequence& seq, const BgModelParams& params);

struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> dx;
  std::vector<float> dy;

  float magnitude(std::size_t i) const { return std::hypot(dx[i], dy[i]); }
  float max_magnitude() const;
};

struct FlowParams {
  double pyr_scale = 0.5;
  int levels = 3;
  int window = 15;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.2;
};

/// Dense coarse-to-fine polynomial-expansion flow from frame_t to frame_t1.
FlowField flow_field(const Image& frame_t, const Image& frame_t1, const FlowParams& params = {});

struct FlowMaskParams {
  double mag_threshold = 1.0;  // px/frame, after median compensation
  bool median_compensation = true;
  bool morphology = true;
  FlowParams flow;
};

std::vector<SegMask> flow_motion_mask(const VideoSequence& seq, const FlowMaskParams& params);

/// mask AND (union of box interiors).
SegMask intersect_with_boxes(const SegMask& mask, std::span<const LabeledBox> boxes);

enum class CameraMode { fixed, moving };

CameraMode camera_mode_from(const std::string& name);
std::string to_string(CameraMode mode);

struct AnnotateParams {
  BgModelParams bg;
  FlowMaskParams flow;
};

void to_json(nlohmann::json& j, const AnnotateParams& p);
void from_json(const nlohmann::json& j, AnnotateParams& p);

std::vector<SegMask> annotate_sequence(const VideoSequence& seq, CameraMode mode,
                                       const AnnotateParams& params);

/// Writes annot_%06d.png and annot_params.json into dir.
void write_annotations(const std::filesystem::path& dir, const std::vector<SegMask>& masks,
                       CameraMode mode, const AnnotateParams& params);
/// Reads annot_%06d.png masks listed by annot_params.json.
std::vector<SegMask> read_annotations(const std::filesystem::path& dir);

/// Morphological 3x3 open followed by 3x3 close.
SegMask open_close3(const SegMask& mask);

}  // namespace spotnet

#endif  // SPOTNET_ANNOTATE_HPP_
