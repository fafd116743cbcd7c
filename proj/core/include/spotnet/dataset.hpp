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

#ifndef SPOTNET_DATASET_HPP_
#define SPOTNET_DATASET_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotnet/tensor.hpp"
#include "spotnet/types.hpp"
#include "spotnet/videogen.hpp"

namespace spotnet {

struct Sample {
  Tensor image;  // 1 x C x H x W in [0, 1]
  std::vector<LabeledBox> boxes;
  std::optional<SegMask> mask;  // semi-supervised segmentation label
  std::optional<SegMask> oracle_mask;
  int frame = 0;
  std::string source;
};

struct Dataset {
  std::vector<Sample> samples;

  bool empty() const { return samples.empty(); }
  int size() const { return static_cast<int>(samples.size()); }
  bool all_have_masks() const;
};

/// Frames first, first + step, ... up to last (inclusive, -1 = final frame).
struct FrameSelection {
  int first = 0;
  int last = -1;
  int step = 1;

  std::vector<int> indices(int n_frames) const;
};

void to_json(nlohmann::json& j, const FrameSelection& s);
void from_json(const nlohmann::json& j, FrameSelection& s);

/// `masks` may be null; when given it must have one mask per frame.
Dataset dataset_from_sequence(const VideoSequence& seq, const std::vector<SegMask>* masks,
                              const FrameSelection& selection, const std::string& source = {});

/// Loads a sequence directory and, when annot_params.json exists, its
/// annotation masks.
Dataset load_dataset(const std::filesystem::path& seq_dir, const FrameSelection& selection);

void append(Dataset& into, Dataset&& from);

}  // namespace spotnet

#endif  // SPOTNET_DATASET_HPP_
