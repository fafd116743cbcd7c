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

#include "spotnet/annotate.hpp"

#include <algorithm>
#include <numeric>
#include <opencv2/imgproc.hpp>
#include <opencv2/video/tracking.hpp>

#include "spotnet/image_io.hpp"

namespace spotnet {

namespace fs = std::filesystem;

BgModel::BgModel(int height, int width, int channels, BgModelParams params)
    : height_(height), width_(width), channels_(channels), params_(params) {
  if (params_.components < 1) throw InvalidArgument("BgModel: components must be >= 1");
  if (!(params_.learning_rate > 0.0 && params_.learning_rate <= 1.0)) {
    throw InvalidArgument("BgModel: learning_rate must be in (0, 1]");
  }
  if (!(params_.min_variance > 0.0)) throw InvalidArgument("BgModel: min_variance must be > 0");
  const std::size_t cells = static_cast<std::size_t>(height) * width * params_.components;
  weights_.assign(cells, 0.0);
  variances_.assign(cells, std::max(params_.initial_variance, params_.min_variance));
  means_.assign(cells * channels, 0.0);
}

SegMask BgModel::apply(const Image& frame) {
  if (frame.height != height_ || frame.width != width_ || frame.channels != channels_) {
    throw InvalidArgument("BgModel::apply: frame shape does not match the model");
  }
  const int K = params_.components;
  const int C = channels_;
  const double alpha = params_.learning_rate;
  const double init_var = std::max(params_.initial_variance, params_.min_variance);
  SegMask fg(height_, width_, 0);
  std::vector<int> order(K);
  double x[3];

  for (int y = 0; y < height_; ++y) {
    for (int xx = 0; xx < width_; ++xx) {
      const std::size_t base = index(y, xx, 0);
      double* w = &weights_[base];
      double* var = &variances_[base];
      double* mu = &means_[base * C];
      for (int c = 0; c < C; ++c) x[c] = frame.at(y, xx, c);

      if (frames_seen_ == 0) {
        for (int k = 0; k < K; ++k) {
          w[k] = k == 0 ? 1.0 : 0.0;
          var[k] = init_var;
          for (int c = 0; c < C; ++c) mu[k * C + c] = k == 0 ? x[c] : 0.0;
        }
        continue;
      }

      // Rank by w / sigma; the first components up to background_ratio of
      // cumulative weight describe the background.
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return w[a] / std::sqrt(var[a]) > w[b] / std::sqrt(var[b]);
      });
      int n_background = 0;
      double cumulative = 0.0;
      while (n_background < K && cumulative <= params_.background_ratio) {
        cumulative += w[order[n_background]];
        ++n_background;
      }

      int matched = -1;
      int matched_rank = K;
      for (int r = 0; r < K; ++r) {
        const int k = order[r];
        if (w[k] <= 0.0) continue;
        double d2 = 0.0;
        for (int c = 0; c < C; ++c) {
          const double d = x[c] - mu[k * C + c];
          d2 += d * d;
        }
        if (d2 / (var[k] * C) < params_.variance_threshold) {
          matched = k;
          matched_rank = r;
          break;
        }
      }
      fg.at(y, xx) = (matched < 0 || matched_rank >= n_background) ? 1 : 0;

      for (int k = 0; k < K; ++k) {
        w[k] = (1.0 - alpha) * w[k] + (k == matched ? alpha : 0.0);
      }
      if (matched >= 0) {
        const double rho = std::min(1.0, alpha / w[matched]);
        double d2 = 0.0;
        for (int c = 0; c < C; ++c) {
          double& m = mu[matched * C + c];
          m += rho * (x[c] - m);
          const double d = x[c] - m;
          d2 += d * d;
        }
        var[matched] = std::max(params_.min_variance, (1.0 - rho) * var[matched] + rho * d2 / C);
      } else {
        // Replace the least probable component with one centred on x.
        const int k = order[K - 1];
        w[k] = alpha;
        var[k] = init_var;
        for (int c = 0; c < C; ++c) mu[k * C + c] = x[c];
      }
      double total = 0.0;
      for (int k = 0; k < K; ++k) total += w[k];
      for (int k = 0; k < K; ++k) w[k] /= total;
    }
  }
  ++frames_seen_;
  return fg;
}

double BgModel::max_weight_sum_error() const {
  double worst = 0.0;
  const int K = params_.components;
  for (std::size_t p = 0; p < weights_.size(); p += K) {
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += weights_[p + k];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double BgModel::min_variance() const {
  return *std::min_element(variances_.begin(), variances_.end());
}

std::vector<SegMask> bg_subtract_sequence(const VideoSequence& seq, const BgModelParams& params) {
  if (seq.size() < params.warmup_frames || seq.size() == 0) {
    throw InvalidArgument("bg_subtract_sequence: sequence has " + std::to_string(seq.size()) +
                          " frames but at least " +
                          std::to_string(std::max(1, params.warmup_frames)) +
                          " are required for warmup");
  }
  const Image& first = seq.frames.front();
  BgModel model(first.height, first.width, first.channels, params);
  std::vector<SegMask> masks;
  masks.reserve(seq.size());
  for (int t = 0; t < seq.size(); ++t) {
    SegMask raw = model.apply(seq.frames[t]);
    if (t < params.warmup_frames) {
      raw = SegMask(first.height, first.width, 0);
    }
    masks.push_back(std::move(raw));
  }
  return masks;
}

float FlowField::max_magnitude() const {
  float m = 0.0f;
  for (std::size_t i = 0; i < dx.size(); ++i) m = std::max(m, magnitude(i));
  return m;
}

namespace {

cv::Mat to_gray(const Image& image) {
  cv::Mat view(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3,
               const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat gray;
  if (image.channels == 1) {
    gray = view.clone();
  } else {
    cv::cvtColor(view, gray, cv::COLOR_RGB2GRAY);
  }
  return gray;
}

float median_of(std::vector<float> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

FlowField flow_field(const Image& frame_t, const Image& frame_t1, const FlowParams& params) {
  if (frame_t.height != frame_t1.height || frame_t.width != frame_t1.width ||
      frame_t.channels != frame_t1.channels) {
    throw InvalidArgument("flow_field: frame shapes differ");
  }
  cv::Mat flow;
  cv::calcOpticalFlowFarneback(to_gray(frame_t), to_gray(frame_t1), flow, params.pyr_scale,
                               params.levels, params.window, params.iterations, params.poly_n,
                               params.poly_sigma, 0);
  FlowField field;
  field.height = frame_t.height;
  field.width = frame_t.width;
  const std::size_t n = static_cast<std::size_t>(field.height) * field.width;
  field.dx.resize(n);
  field.dy.resize(n);
  for (int y = 0; y < field.height; ++y) {
    const cv::Vec2f* row = flow.ptr<cv::Vec2f>(y);
    for (int x = 0; x < field.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
      field.dx[i] = row[x][0];
      field.dy[i] = row[x][1];
    }
  }
  return field;
}

SegMask open_close3(const SegMask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1, const_cast<std::uint8_t*>(mask.values.data()));
  // Background outside the frame. A one-pixel ring keeps the intermediate
  // result of each 3x3 pass exact at the image border.
  cv::Mat padded;
  cv::copyMakeBorder(m, padded, 1, 1, 1, 1, cv::BORDER_CONSTANT, cv::Scalar(0));
  const cv::Mat kernel = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(3, 3));
  cv::Mat opened;
  cv::Mat closed;
  cv::morphologyEx(padded, opened, cv::MORPH_OPEN, kernel, cv::Point(-1, -1), 1,
                   cv::BORDER_CONSTANT, cv::Scalar(0));
  cv::morphologyEx(opened, closed, cv::MORPH_CLOSE, kernel, cv::Point(-1, -1), 1,
                   cv::BORDER_CONSTANT, cv::Scalar(0));
  SegMask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    std::copy_n(closed.ptr<std::uint8_t>(y + 1) + 1, mask.width,
                out.values.begin() + static_cast<std::ptrdiff_t>(y) * mask.width);
  }
  return out;
}

std::vector<SegMask> flow_motion_mask(const VideoSequence& seq, const FlowMaskParams& params) {
  if (seq.size() < 2) {
    throw InvalidArgument("flow_motion_mask: need at least 2 frames, got " +
                          std::to_string(seq.size()));
  }
  std::vector<SegMask> masks;
  masks.reserve(seq.size());
  for (int t = 0; t + 1 < seq.size(); ++t) {
    const FlowField flow = flow_field(seq.frames[t], seq.frames[t + 1], params.flow);
    float mx = 0.0f;
    float my = 0.0f;
    if (params.median_compensation) {
      mx = median_of(flow.dx);
      my = median_of(flow.dy);
    }
    SegMask raw(flow.height, flow.width, 0);
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
      const double r = std::hypot(flow.dx[i] - mx, flow.dy[i] - my);
      raw.values[i] = r > params.mag_threshold ? 1 : 0;
    }
    masks.push_back(params.morphology ? open_close3(raw) : std::move(raw));
  }
  // The last frame has no successor; reuse the previous pair's mask.
  masks.push_back(masks.back());
  return masks;
}

SegMask intersect_with_boxes(const SegMask& mask, std::span<const LabeledBox> boxes) {
  SegMask out = box_union_mask(mask.height, mask.width, boxes);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (out.values[i] != 0 && mask.values[i] != 0) ? 1 : 0;
  }
  return out;
}

CameraMode camera_mode_from(const std::string& name) {
  if (name == "fixed") return CameraMode::fixed;
  if (name == "moving") return CameraMode::moving;
  throw InvalidArgument("unknown camera mode '" + name + "' (expected fixed|moving)");
}

std::string to_string(CameraMode mode) { return mode == CameraMode::fixed ? "fixed" : "moving"; }

void to_json(nlohmann::json& j, const AnnotateParams& p) {
  j = nlohmann::json{
      {"bg",
       {{"components", p.bg.components},
        {"learning_rate", p.bg.learning_rate},
        {"variance_threshold", p.bg.variance_threshold},
        {"background_ratio", p.bg.background_ratio},
        {"initial_variance", p.bg.initial_variance},
        {"min_variance", p.bg.min_variance},
        {"warmup_frames", p.bg.warmup_frames}}},
      {"flow",
       {{"mag_threshold", p.flow.mag_threshold},
        {"median_compensation", p.flow.median_compensation},
        {"morphology", p.flow.morphology},
        {"pyr_scale", p.flow.flow.pyr_scale},
        {"levels", p.flow.flow.levels},
        {"window", p.flow.flow.window},
        {"iterations", p.flow.flow.iterations},
        {"poly_n", p.flow.flow.poly_n},
        {"poly_sigma", p.flow.flow.poly_sigma}}},
  };
}

void from_json(const nlohmann::json& j, AnnotateParams& p) {
  AnnotateParams d;
  if (j.contains("bg")) {
    const auto& b = j.at("bg");
    d.bg.components = b.value("components", d.bg.components);
    d.bg.learning_rate = b.value("learning_rate", d.bg.learning_rate);
    d.bg.variance_threshold = b.value("variance_threshold", d.bg.variance_threshold);
    d.bg.background_ratio = b.value("background_ratio", d.bg.background_ratio);
    d.bg.initial_variance = b.value("initial_variance", d.bg.initial_variance);
    d.bg.min_variance = b.value("min_variance", d.bg.min_variance);
    d.bg.warmup_frames = b.value("warmup_frames", d.bg.warmup_frames);
  }
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    d.flow.mag_threshold = f.value("mag_threshold", d.flow.mag_threshold);
    d.flow.median_compensation = f.value("median_compensation", d.flow.median_compensation);
    d.flow.morphology = f.value("morphology", d.flow.morphology);
    d.flow.flow.pyr_scale = f.value("pyr_scale", d.flow.flow.pyr_scale);
    d.flow.flow.levels = f.value("levels", d.flow.flow.levels);
    d.flow.flow.window = f.value("window", d.flow.flow.window);
    d.flow.flow.iterations = f.value("iterations", d.flow.flow.iterations);
    d.flow.flow.poly_n = f.value("poly_n", d.flow.flow.poly_n);
    d.flow.flow.poly_sigma = f.value("poly_sigma", d.flow.flow.poly_sigma);
  }
  p = d;
}

std::vector<SegMask> annotate_sequence(const VideoSequence& seq, CameraMode mode,
                                       const AnnotateParams& params) {
  std::vector<SegMask> raw = mode == CameraMode::fixed ? bg_subtract_sequence(seq, params.bg)
                                                       : flow_motion_mask(seq, params.flow);
  std::vector<SegMask> out;
  out.reserve(raw.size());
  for (int t = 0; t < seq.size(); ++t) {
    const auto& boxes = t < static_cast<int>(seq.gt_boxes.size()) ? seq.gt_boxes[t]
                                                                   : std::vector<LabeledBox>{};
    out.push_back(intersect_with_boxes(raw[t], boxes));
  }
  return out;
}

void write_annotations(const fs::path& dir, const std::vector<SegMask>& masks, CameraMode mode,
                       const AnnotateParams& params) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t t = 0; t < masks.size(); ++t) {
    const std::string name = indexed_name("annot", static_cast<int>(t));
    write_mask_png(dir / name, masks[t]);
    files.push_back(name);
  }
  write_json_file(dir / "annot_params.json",
                  nlohmann::json{{"mode", to_string(mode)},
                                 {"params", params},
                                 {"n_frames", masks.size()},
                                 {"warmup_frames", mode == CameraMode::fixed ? params.bg.warmup_frames : 0},
                                 {"files", files}});
}

std::vector<SegMask> read_annotations(const fs::path& dir) {
  const nlohmann::json meta = read_json_file(dir / "annot_params.json");
  std::vector<SegMask> masks;
  for (const auto& f : meta.at("files")) {
    masks.push_back(read_mask_png(dir / f.get<std::string>()));
  }
  return masks;
}

}  // namespace spotnet
