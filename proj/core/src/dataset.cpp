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

#include "spotnet/dataset.hpp"

#include "spotnet/annotate.hpp"
#include "spotnet/image_io.hpp"

namespace spotnet {

bool Dataset::all_have_masks() const {
  for (const Sample& s : samples) {
    if (!s.mask.has_value()) return false;
  }
  return true;
}

std::vector<int> FrameSelection::indices(int n_frames) const {
  if (step <= 0) throw InvalidArgument("FrameSelection: step must be positive");
  const int end = last < 0 ? n_frames - 1 : std::min(last, n_frames - 1);
  std::vector<int> out;
  for (int i = std::max(0, first); i <= end; i += step) out.push_back(i);
  return out;
}

void to_json(nlohmann::json& j, const FrameSelection& s) {
  j = nlohmann::json{{"first", s.first}, {"last", s.last}, {"step", s.step}};
}

void from_json(const nlohmann::json& j, FrameSelection& s) {
  FrameSelection d;
  d.first = j.value("first", d.first);
  d.last = j.value("last", d.last);
  d.step = j.value("step", d.step);
  s = d;
}

Dataset dataset_from_sequence(const VideoSequence& seq, const std::vector<SegMask>* masks,
                              const FrameSelection& selection, const std::string& source) {
  if (masks != nullptr && static_cast<int>(masks->size()) != seq.size()) {
    throw InvalidArgument("dataset_from_sequence: " + std::to_string(masks->size()) +
                          " masks for " + std::to_string(seq.size()) + " frames");
  }
  Dataset ds;
  for (int t : selection.indices(seq.size())) {
    Sample s;
    s.image = image_to_tensor(seq.frames[t]);
    s.boxes = seq.gt_boxes[t];
    if (masks != nullptr) s.mask = (*masks)[t];
    if (t < static_cast<int>(seq.oracle_masks.size())) s.oracle_mask = seq.oracle_masks[t];
    s.frame = t;
    s.source = source;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& seq_dir, const FrameSelection& selection) {
  const VideoSequence seq = read_sequence(seq_dir);
  if (std::filesystem::exists(seq_dir / "annot_params.json")) {
    const std::vector<SegMask> masks = read_annotations(seq_dir);
    return dataset_from_sequence(seq, &masks, selection, seq_dir.string());
  }
  return dataset_from_sequence(seq, nullptr, selection, seq_dir.string());
}

void append(Dataset& into, Dataset&& from) {
  for (Sample& s : from.samples) into.samples.push_back(std::move(s));
}

}  // namespace spotnet
