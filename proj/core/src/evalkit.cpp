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

#include "spotnet/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <set>

namespace spotnet {

double iou(const Box& a, const Box& b) {
  const double ua = a.area() + b.area();
  if (a.area() <= 0.0 || b.area() <= 0.0) return 0.0;
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (ua - inter);
}

std::vector<FrameTruth> truth_from_boxes(const std::vector<std::vector<LabeledBox>>& boxes) {
  std::vector<FrameTruth> out;
  out.reserve(boxes.size());
  for (std::size_t f = 0; f < boxes.size(); ++f) {
    out.push_back(FrameTruth{static_cast<int>(f), boxes[f]});
  }
  return out;
}

double interpolated_ap(const std::vector<PRPoint>& points, ApMode mode) {
  if (mode == ApMode::eleven_point) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double level = i / 10.0;
      double best = 0.0;
      for (const PRPoint& p : points) {
        if (p.recall >= level) best = std::max(best, p.precision);
      }
      sum += best;
    }
    return sum / 11.0;
  }
  std::vector<double> rec{0.0};
  std::vector<double> prec{0.0};
  for (const PRPoint& p : points) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  }
  return ap;
}

PRCurve average_precision(std::span<const FrameDetections> dets, std::span<const FrameTruth> gts,
                          double iou_min, std::optional<int> class_id, ApMode mode) {
  auto wanted = [&](int c) { return !class_id.has_value() || *class_id == c; };

  struct GtRef {
    const LabeledBox* box;
    bool matched;
  };
  std::map<int, std::vector<GtRef>> by_frame;
  PRCurve curve;
  for (const FrameTruth& ft : gts) {
    for (const LabeledBox& b : ft.objects) {
      if (!wanted(b.class_id)) continue;
      by_frame[ft.frame].push_back(GtRef{&b, false});
      ++curve.n_gt;
    }
  }

  struct DetRef {
    int frame;
    const Detection* det;
  };
  std::vector<DetRef> order;
  for (const FrameDetections& fd : dets) {
    for (const Detection& d : fd.detections) {
      if (wanted(d.class_id)) order.push_back(DetRef{fd.frame, &d});
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const DetRef& a, const DetRef& b) { return a.det->score > b.det->score; });

  int tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const DetRef& d = order[i];
    auto it = by_frame.find(d.frame);
    GtRef* best = nullptr;
    double best_iou = -1.0;
    if (it != by_frame.end()) {
      for (GtRef& g : it->second) {
        if (g.matched || g.box->class_id != d.det->class_id) continue;
        const double o = iou(d.det->box, g.box->box);
        if (o > best_iou) {
          best_iou = o;
          best = &g;
        }
      }
    }
    if (best != nullptr && best_iou >= iou_min) {
      best->matched = true;
      ++tp;
    }
    const double recall = curve.n_gt > 0 ? static_cast<double>(tp) / curve.n_gt : 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    curve.points.push_back(PRPoint{recall, precision});
  }
  curve.ap = curve.n_gt > 0 ? interpolated_ap(curve.points, mode) : 0.0;
  return curve;
}

MapResult mean_average_precision(std::span<const FrameDetections> dets,
                                 std::span<const FrameTruth> gts, double iou_min, ApMode mode) {
  std::set<int> classes;
  for (const FrameTruth& ft : gts) {
    for (const LabeledBox& b : ft.objects) classes.insert(b.class_id);
  }
  if (classes.empty()) {
    throw InvalidArgument("mean_average_precision: no ground-truth objects of any class");
  }
  MapResult result;
  double sum = 0.0;
  for (int c : classes) {
    PRCurve curve = average_precision(dets, gts, iou_min, c, mode);
    sum += curve.ap;
    result.per_class.emplace(c, std::move(curve));
  }
  result.map = sum / static_cast<double>(classes.size());
  return result;
}

SegMask binarize_and_mask(const ProbabilityMap& attention, std::span<const Detection> dets,
                          double thresh) {
  std::vector<Box> boxes;
  boxes.reserve(dets.size());
  for (const Detection& d : dets) boxes.push_back(d.box);
  SegMask out = box_union_mask(attention.height, attention.width, boxes);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (out.values[i] != 0 && attention.values[i] >= thresh) ? 1 : 0;
  }
  return out;
}

FMeasure f_measure(const SegMask& pred, const SegMask& gt) {
  if (!pred.same_shape(gt)) throw InvalidArgument("f_measure: shape mismatch");
  FMeasure m;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0;
    const bool g = gt.values[i] != 0;
    m.tp += (p && g) ? 1 : 0;
    m.fp += (p && !g) ? 1 : 0;
    m.fn += (!p && g) ? 1 : 0;
  }
  const double tp = static_cast<double>(m.tp);
  m.precision = (m.tp + m.fp) > 0 ? tp / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) > 0 ? tp / static_cast<double>(m.tp + m.fn) : 0.0;
  const double s = m.precision + m.recall;
  m.f = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
  return m;
}

void write_pr_csv(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, PRCurve>>& curves) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "name,recall,precision\n";
  char buf[64];
  for (const auto& [name, curve] : curves) {
    for (const PRPoint& p : curve.points) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f", p.recall, p.precision);
      out << name << ',' << buf << '\n';
    }
  }
}

void render_pr_plot(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, PRCurve>>& curves) {
  constexpr int kSize = 480;
  constexpr int kMargin = 48;
  constexpr int kSpan = kSize - 2 * kMargin;
  cv::Mat img(kSize, kSize, CV_8UC3, cv::Scalar(255, 255, 255));
  auto to_px = [&](double r, double p) {
    return cv::Point(kMargin + static_cast<int>(r * kSpan), kSize - kMargin - static_cast<int>(p * kSpan));
  };
  for (int i = 0; i <= 10; ++i) {
    const double v = i / 10.0;
    cv::line(img, to_px(v, 0), to_px(v, 1), cv::Scalar(230, 230, 230));
    cv::line(img, to_px(0, v), to_px(1, v), cv::Scalar(230, 230, 230));
  }
  cv::rectangle(img, to_px(0, 1), to_px(1, 0), cv::Scalar(0, 0, 0));
  cv::putText(img, "recall", cv::Point(kSize / 2 - 24, kSize - 12), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0));
  cv::putText(img, "precision", cv::Point(4, kMargin - 16), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0));
  const cv::Scalar palette[] = {{200, 60, 30}, {30, 140, 30}, {30, 30, 200}, {150, 30, 150}, {0, 140, 200}};
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const cv::Scalar color = palette[i % std::size(palette)];
    const PRCurve& c = curves[i].second;
    for (std::size_t j = 1; j < c.points.size(); ++j) {
      cv::line(img, to_px(c.points[j - 1].recall, c.points[j - 1].precision),
               to_px(c.points[j].recall, c.points[j].precision), color, 2, cv::LINE_AA);
    }
    char label[128];
    std::snprintf(label, sizeof(label), "%s (AP %.3f)", curves[i].first.c_str(), c.ap);
    const cv::Point at(kMargin + 8, kMargin + 18 + 18 * static_cast<int>(i));
    cv::putText(img, label, at, cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_AA);
  }
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

}  // namespace spotnet
