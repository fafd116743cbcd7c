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

// Training loop, optimizer and the three-way ablation harness.

#ifndef SPOTNET_TRAINER_HPP_
#define SPOTNET_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotnet/dataset.hpp"
#include "spotnet/decode.hpp"
#include "spotnet/evalkit.hpp"
#include "spotnet/loss.hpp"
#include "spotnet/net.hpp"

namespace spotnet {

enum class SegLossKind { bce, mse };

struct TrainConfig {
  ModelConfig model;
  double lr = 2.5e-4;
  int batch_size = 4;
  int n_iters = 2000;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;  // 0 disables intermediate checkpoints
  LossWeights weights;         // seg 1.0, wh 0.1
  double grad_clip = 10.0;     // global L2 norm; <= 0 disables
  bool flip_augment = false;
  SegLossKind seg_loss = SegLossKind::bce;
  int smoothing_window = 50;
  int log_every = 0;  // 0 disables progress lines

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Thrown on the first non-finite loss; what() carries the iteration and terms.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();
  int steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  int t_ = 0;
};

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

/// Zeroes gradients, runs forward and backward on one batch and returns the
/// loss terms. Gradients are left in Parameter::grad.
LossBreakdown accumulate_gradients(Detector& model, std::span<const Sample* const> batch,
                                   const TrainConfig& cfg);

struct TrainResult {
  Detector model;
  std::vector<LossBreakdown> trace;
  double initial_smoothed = 0.0;
  double final_smoothed = 0.0;
  std::filesystem::path checkpoint;  // empty when no out_dir was given
};

/// Mean total loss over the first and last `window` iterations.
std::pair<double, double> smoothed_endpoints(const std::vector<LossBreakdown>& trace, int window);

/// Trains from scratch. With a non-empty out_dir writes metrics.csv,
/// periodic checkpoints and model.ckpt.
TrainResult train(const Dataset& data, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

std::vector<FrameDetections> detect_dataset(Detector& model, const Dataset& data,
                                            const DecodeParams& params = {});
std::vector<FrameTruth> dataset_truth(const Dataset& data);

struct AblationVariant {
  std::string name;
  bool attention = false;
  bool multitask = false;
};

/// Attention + multi-task, multi-task only, neither.
std::array<AblationVariant, 3> ablation_variants();

struct AblationRow {
  AblationVariant variant;
  double map = 0.0;
  PRCurve pr;  // all classes pooled
  double initial_smoothed = 0.0;
  double final_smoothed = 0.0;
  std::filesystem::path checkpoint;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  double iou_min = 0.7;
  int n_train = 0;
  int n_eval = 0;
};

/// Trains each variant with identical seed and iterations, evaluates all of
/// them on the same eval frames. Writes one sub-directory per variant plus
/// ablation.json, ablation.csv, pr_curves.csv and pr_curves.png.
AblationReport ablate(const Dataset& train_data, const Dataset& eval_data, const TrainConfig& base,
                      const std::filesystem::path& out_dir, const DecodeParams& decode = {},
                      double iou_min = 0.7, std::ostream* log = nullptr);

nlohmann::json to_json(const AblationReport& report);

}  // namespace spotnet

#endif  // SPOTNET_TRAINER_HPP_
