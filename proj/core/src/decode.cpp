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
#include <cmath>

namespace spotnet {

std::vector<Peak> extract_peaks(const Tensor& heatmap, int k, int batch) {
  if (k <= 0) throw InvalidArgument("extract_peaks: k must be positive");
  const Shape& s = heatmap.shape();
  if (batch < 0 || batch >= s.n) throw InvalidArgument("extract_peaks: batch out of range");

  // Separable 3x3 max filter (rows, then columns), then keep cells equal to
  // their neighbourhood maximum.
  std::vector<Peak> candidates;
  std::vector<float> row_max(s.plane());
  for (int c = 0; c < s.c; ++c) {
    const float* hm = heatmap.plane(batch, c);
    for (int y = 0; y < s.h; ++y) {
      const float* r = hm + static_cast<std::size_t>(y) * s.w;
      float* out = row_max.data() + static_cast<std::size_t>(y) * s.w;
      for (int x = 0; x < s.w; ++x) {
        float m = r[x];
        if (x > 0) m = std::max(m, r[x - 1]);
        if (x + 1 < s.w) m = std::max(m, r[x + 1]);
        out[x] = m;
      }
    }
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        float m = row_max[static_cast<std::size_t>(y) * s.w + x];
        if (y > 0) m = std::max(m, row_max[static_cast<std::size_t>(y - 1) * s.w + x]);
        if (y + 1 < s.h) m = std::max(m, row_max[static_cast<std::size_t>(y + 1) * s.w + x]);
        const float v = hm[static_cast<std::size_t>(y) * s.w + x];
        if (v >= m) candidates.push_back(Peak{c, y, x, v});
      }
    }
  }
  // Candidates are generated in (class, y, x) order, so a stable sort by
  // score realizes the tie rule.
  const auto by_score = [](const Peak& a, const Peak& b) { return a.score > b.score; };
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
  std::stable_sort(candidates.begin(), candidates.end(), by_score);
  candidates.resize(keep);
  return candidates;
}

std::vector<Detection> assemble_boxes(const std::vector<Peak>& peaks, const Tensor& wh,
                                      const Tensor& offset, int stride, double score_thresh,
                                      int image_h, int image_w, int batch) {
  std::vector<Detection> out;
  for (const Peak& p : peaks) {
    if (p.score < score_thresh) continue;
    const double cx = (p.x + offset.at(batch, 0, p.y, p.x)) * stride;
    const double cy = (p.y + offset.at(batch, 1, p.y, p.x)) * stride;
    const double w = std::max(0.0, static_cast<double>(wh.at(batch, 0, p.y, p.x)));
    const double h = std::max(0.0, static_cast<double>(wh.at(batch, 1, p.y, p.x)));
    Box b{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
    b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(image_w));
    b.x2 = std::clamp(b.x2, 0.0, static_cast<double>(image_w));
    b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(image_h));
    b.y2 = std::clamp(b.y2, 0.0, static_cast<double>(image_h));
    if (b.x2 <= b.x1 || b.y2 <= b.y1) continue;
    out.push_back(Detection{p.class_id, p.score, b});
  }
  return out;
}

std::vector<Detection> decode_output(const NetworkOutput& out, const DecodeParams& params,
                                     int image_h, int image_w, int batch) {
  const auto peaks = extract_peaks(out.heatmap, params.k, batch);
  return assemble_boxes(peaks, out.wh, out.offset, params.stride, params.score_thresh, image_h,
                        image_w, batch);
}

std::vector<Detection> detect(const Tensor& image, Detector& model, const DecodeParams& params,
                              const ForwardOptions& options) {
  const NetworkOutput out = model.forward(image, options);
  return decode_output(out, params, image.shape().h, image.shape().w, 0);
}

nlohmann::json detections_to_json(const std::vector<FrameDetections>& frames) {
  nlohmann::json records = nlohmann::json::array();
  for (const FrameDetections& f : frames) {
    nlohmann::json dets = nlohmann::json::array();
    for (const Detection& d : f.detections) {
      dets.push_back({{"class", d.class_id}, {"score", d.score}, {"x1", d.box.x1},
                      {"y1", d.box.y1}, {"x2", d.box.x2}, {"y2", d.box.y2}});
    }
    records.push_back({{"frame", f.frame}, {"detections", dets}});
  }
  return records;
}

std::vector<FrameDetections> detections_from_json(const nlohmann::json& records) {
  std::vector<FrameDetections> out;
  for (const auto& rec : records) {
    FrameDetections f;
    f.frame = rec.at("frame").get<int>();
    for (const auto& d : rec.at("detections")) {
      f.detections.push_back(Detection{d.at("class").get<int>(), d.at("score").get<double>(),
                                       Box{d.at("x1").get<double>(), d.at("y1").get<double>(),
                                           d.at("x2").get<double>(), d.at("y2").get<double>()}});
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace spotnet
