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

// Keypoint detector with a segmentation head used as self-attention.
//
//   image -> stacked hourglass -> F (stride 4, C channels)
//   F -> seg head -> A (full resolution, sigmoid)
//   F' = F * avgpool4(A)           (when attention is enabled)
//   F' -> heatmap (sigmoid, n_classes) | wh (2) | offset (2)

#ifndef SPOTNET_NET_HPP_
#define SPOTNET_NET_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotnet/autograd.hpp"
#include "spotnet/tensor.hpp"

namespace spotnet {

inline constexpr int kOutputStride = 4;

struct ModelConfig {
  int n_stacks = 2;
  int base_channels = 32;
  int n_classes = 2;
  bool attention_enabled = true;
  bool multitask_enabled = true;
  int hourglass_depth = 4;
  int in_channels = 3;

  /// Rejects attention without multi-task, non-positive sizes.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ForwardOptions {
  /// Replace the segmentation output by a constant map (testing hook).
  std::optional<float> attention_override;
};

/// Tape handles of one forward pass.
struct ForwardGraph {
  Var features;   // backbone output, before attention
  Var attention;  // N x 1 x H x W
  Var heatmap;    // N x n_classes x H/4 x W/4, sigmoid
  Var wh;         // N x 2 x H/4 x W/4
  Var offset;     // N x 2 x H/4 x W/4
  bool seg_trained = false;  // attention participates in the loss
};

struct NetworkOutput {
  Tensor attention;
  Tensor heatmap;
  Tensor wh;
  Tensor offset;
};

struct HeadGraph {
  Var heatmap;
  Var wh;
  Var offset;
};

class Detector {
 public:
  explicit Detector(const ModelConfig& config, std::uint64_t seed = 0);
  Detector(Detector&&) noexcept = default;
  Detector& operator=(Detector&&) noexcept = default;
  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;

  const ModelConfig& config() const { return config_; }

  /// Stride-4 feature map; input H and W must be divisible by 4.
  Var backbone(Tape& tape, Var image);
  /// Pre-sigmoid segmentation logits at input resolution.
  Var seg_logits(Tape& tape, Var features);
  Var seg_head(Tape& tape, Var features);
  HeadGraph detect_heads(Tape& tape, Var features);
  ForwardGraph forward(Tape& tape, Var image, const ForwardOptions& options = {});

  /// Inference without gradient bookkeeping.
  NetworkOutput forward(const Tensor& image, const ForwardOptions& options = {});

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<Parameter*> seg_head_parameters();
  Parameter* find_parameter(std::string_view name);
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  struct Conv {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    int stride = 1;
    int pad = 0;
  };
  struct Residual {
    Conv a;
    Conv b;
  };
  struct HourglassLevel {
    Residual up1;
    Residual low1;
    Residual low3;
  };
  struct Stack {
    std::vector<HourglassLevel> levels;
    Residual bottom;
    Conv out;
    Conv merge;  // unused on the last stack
    Residual post_merge;
  };
  struct Head {
    Conv hidden;
    Conv out;
  };

  Parameter* make_param(const std::string& name, Shape shape, double stddev, float fill = 0.0f);
  Conv make_conv(const std::string& name, int cin, int cout, int k, int stride, double gain,
                 float bias_fill = 0.0f);
  Residual make_residual(const std::string& name, int c);
  Head make_head(const std::string& name, int cin, int cout, float bias_fill);

  Var conv(Tape& tape, Var x, const Conv& c);
  Var residual(Tape& tape, Var x, const Residual& r);
  Var hourglass(Tape& tape, Var x, const Stack& s, std::size_t level);
  Var head(Tape& tape, Var x, const Head& h);

  ModelConfig config_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::size_t seg_begin_ = 0;
  std::size_t seg_end_ = 0;
  std::mt19937_64 init_rng_;

  Conv stem1_;
  Conv stem2_;
  Residual stem_res_;
  std::vector<Stack> stacks_;
  Conv seg1_;
  Conv seg2_;
  Conv seg3_;
  Head heat_;
  Head wh_;
  Head offset_;
};

/// features * avgpool4(attention), broadcast over channels.
Var apply_attention(Tape& tape, Var features, Var attention);
Tensor apply_attention(const Tensor& features, const Tensor& attention);

/// Binary checkpoint: magic, format version, config JSON, named tensors.
void save_checkpoint(const Detector& model, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedCheckpoint {
  Detector model;
  nlohmann::json metadata;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spotnet

#endif  // SPOTNET_NET_HPP_
