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

#include "spotnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "spotnet/image_io.hpp"

namespace spotnet {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw InvalidArgument("TrainConfig: lr must be > 0");
  if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
  if (n_iters < 1) throw InvalidArgument("TrainConfig: n_iters must be >= 1");
  if (checkpoint_every < 0) throw InvalidArgument("TrainConfig: checkpoint_every must be >= 0");
  if (weights.seg < 0.0 || weights.wh < 0.0) throw InvalidArgument("TrainConfig: negative loss weight");
  if (smoothing_window < 1) throw InvalidArgument("TrainConfig: smoothing_window must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"lr", c.lr},
                     {"batch_size", c.batch_size},
                     {"n_iters", c.n_iters},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"seg_weight", c.weights.seg},
                     {"wh_weight", c.weights.wh},
                     {"grad_clip", c.grad_clip},
                     {"flip_augment", c.flip_augment},
                     {"seg_loss", c.seg_loss == SegLossKind::bce ? "bce" : "mse"},
                     {"smoothing_window", c.smoothing_window},
                     {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  if (j.contains("model")) d.model = j.at("model").get<ModelConfig>();
  d.lr = j.value("lr", d.lr);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.n_iters = j.value("n_iters", d.n_iters);
  d.seed = j.value("seed", d.seed);
  d.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  d.weights.seg = j.value("seg_weight", d.weights.seg);
  d.weights.wh = j.value("wh_weight", d.weights.wh);
  d.grad_clip = j.value("grad_clip", d.grad_clip);
  d.flip_augment = j.value("flip_augment", d.flip_augment);
  const std::string seg = j.value("seg_loss", std::string("bce"));
  if (seg == "bce") {
    d.seg_loss = SegLossKind::bce;
  } else if (seg == "mse") {
    d.seg_loss = SegLossKind::mse;
  } else {
    throw InvalidArgument("unknown seg_loss '" + seg + "'");
  }
  d.smoothing_window = j.value("smoothing_window", d.smoothing_window);
  d.log_every = j.value("log_every", d.log_every);
  c = d;
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.size(), 0.0f);
    v_.emplace_back(p->value.size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  const float step = static_cast<float>(lr_ * std::sqrt(c2) / c1);
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  const float eps = static_cast<float>(eps_ * std::sqrt(c2));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter* p = params_[i];
    if (p->grad.size() != p->value.size()) continue;
    float* w = p->value.raw();
    const float* g = p->grad.raw();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      m[k] = b1 * m[k] + (1.0f - b1) * g[k];
      v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
      w[k] -= step * m[k] / (std::sqrt(v[k]) + eps);
    }
  }
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (float g : p->grad.data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (Parameter* p : params) {
      for (float& g : p->grad.data()) g *= s;
    }
  }
  return norm;
}

namespace {

std::vector<double> to_double(const Tensor& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

Tensor to_tensor(const std::vector<double>& v, const Shape& shape, double scale) {
  Tensor t(shape);
  for (std::size_t i = 0; i < v.size(); ++i) t.raw()[i] = static_cast<float>(v[i] * scale);
  return t;
}

Sample flipped(const Sample& s) {
  Sample out = s;
  const Shape& sh = s.image.shape();
  for (int c = 0; c < sh.c; ++c) {
    for (int y = 0; y < sh.h; ++y) {
      for (int x = 0; x < sh.w; ++x) out.image.at(0, c, y, x) = s.image.at(0, c, y, sh.w - 1 - x);
    }
  }
  for (LabeledBox& b : out.boxes) {
    const double x1 = sh.w - b.box.x2;
    const double x2 = sh.w - b.box.x1;
    b.box.x1 = x1;
    b.box.x2 = x2;
  }
  auto flip_mask = [&](std::optional<SegMask>& m) {
    if (!m) return;
    SegMask src = *m;
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) m->at(y, x) = src.at(y, src.width - 1 - x);
    }
  };
  flip_mask(out.mask);
  flip_mask(out.oracle_mask);
  return out;
}

std::string describe(const LossBreakdown& l) {
  std::ostringstream ss;
  ss << "L_heat=" << l.heat << " L_off=" << l.off << " L_seg=" << l.seg << " L_WH=" << l.wh
     << " L_tot=" << l.total;
  return ss.str();
}

}  // namespace

LossBreakdown accumulate_gradients(Detector& model, std::span<const Sample* const> batch,
                                   const TrainConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("accumulate_gradients: empty batch");
  const ModelConfig& mc = model.config();
  std::vector<Tensor> images;
  images.reserve(batch.size());
  for (const Sample* s : batch) images.push_back(s->image);
  const Tensor image = stack_batch(images);
  const Shape& in = image.shape();
  const int out_h = in.h / kOutputStride;
  const int out_w = in.w / kOutputStride;

  model.zero_grad();
  Tape tape;
  const ForwardGraph g = model.forward(tape, tape.constant(image));

  // Targets for the whole batch.
  const std::size_t heat_plane = static_cast<std::size_t>(mc.n_classes) * out_h * out_w;
  std::vector<double> heat_target(heat_plane * batch.size(), 0.0);
  std::vector<CenterTarget> centers;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    DetectionTargets t = splat_targets(batch[b]->boxes, out_h, out_w, mc.n_classes, 0.7,
                                       static_cast<int>(b));
    std::copy(t.heatmap.values.begin(), t.heatmap.values.end(),
              heat_target.begin() + static_cast<std::ptrdiff_t>(b * heat_plane));
    centers.insert(centers.end(), t.centers.begin(), t.centers.end());
  }

  LossTerms terms;
  const std::vector<double> heat_pred = to_double(tape.value(g.heatmap));
  std::vector<double> heat_grad(heat_pred.size());
  terms.heat = focal_heatmap(heat_pred, heat_target, heat_grad);

  const std::vector<double> wh_pred = to_double(tape.value(g.wh));
  std::vector<double> wh_grad(wh_pred.size());
  terms.wh = l1_sparse(RegressionMap{wh_pred, in.n, out_h, out_w}, centers, RegressionKind::wh,
                       wh_grad);

  const std::vector<double> off_pred = to_double(tape.value(g.offset));
  std::vector<double> off_grad(off_pred.size());
  terms.off = l1_sparse(RegressionMap{off_pred, in.n, out_h, out_w}, centers,
                        RegressionKind::offset, off_grad);

  std::vector<double> seg_grad;
  if (g.seg_trained) {
    const std::vector<double> seg_pred = to_double(tape.value(g.attention));
    std::vector<double> seg_target;
    seg_target.reserve(seg_pred.size());
    for (const Sample* s : batch) {
      if (!s->mask) throw InvalidArgument("accumulate_gradients: multi-task sample without mask");
      if (s->mask->height != in.h || s->mask->width != in.w) {
        throw InvalidArgument("accumulate_gradients: mask shape does not match the image");
      }
      for (std::uint8_t v : s->mask->values) seg_target.push_back(v != 0 ? 1.0 : 0.0);
    }
    seg_grad.resize(seg_pred.size());
    terms.seg = cfg.seg_loss == SegLossKind::bce ? bce_seg(seg_pred, seg_target, seg_grad)
                                                 : mse_seg(seg_pred, seg_target, seg_grad);
  }

  for (double v : {terms.heat, terms.off, terms.seg, terms.wh}) {
    if (!std::isfinite(v)) {
      LossBreakdown bad{terms.heat, terms.off, terms.seg, terms.wh,
                        std::numeric_limits<double>::quiet_NaN()};
      throw TrainingDiverged("non-finite loss: " + describe(bad));
    }
  }
  const LossBreakdown loss = total_loss(terms, mc, cfg.weights);

  std::vector<std::pair<Var, Tensor>> seeds;
  seeds.emplace_back(g.heatmap, to_tensor(heat_grad, tape.shape(g.heatmap), 1.0));
  seeds.emplace_back(g.offset, to_tensor(off_grad, tape.shape(g.offset), 1.0));
  seeds.emplace_back(g.wh, to_tensor(wh_grad, tape.shape(g.wh), cfg.weights.wh));
  if (g.seg_trained && mc.multitask_enabled) {
    seeds.emplace_back(g.attention, to_tensor(seg_grad, tape.shape(g.attention), cfg.weights.seg));
  }
  tape.backward(seeds);
  return loss;
}

std::pair<double, double> smoothed_endpoints(const std::vector<LossBreakdown>& trace, int window) {
  if (trace.empty()) return {0.0, 0.0};
  const std::size_t w = std::min<std::size_t>(std::max(1, window), trace.size());
  double first = 0.0;
  double last = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    first += trace[i].total;
    last += trace[trace.size() - w + i].total;
  }
  return {first / w, last / w};
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const fs::path& out_dir,
                  std::ostream* log) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  if (cfg.model.multitask_enabled && !data.all_have_masks()) {
    throw InvalidArgument("train: multi-task training needs an annotation mask for every sample");
  }
  for (const Sample& s : data.samples) {
    if (s.image.shape().c != cfg.model.in_channels) {
      throw InvalidArgument("train: sample channels do not match model in_channels");
    }
  }

  const bool write = !out_dir.empty();
  std::ofstream metrics;
  if (write) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    metrics.open(out_dir / "metrics.csv");
    if (!metrics) throw IoError("cannot write metrics.csv in " + out_dir.string());
    metrics << "iteration,L_heat,L_off,L_seg,L_WH,L_tot\n";
    write_json_file(out_dir / "train_config.json", cfg);
  }

  Detector model(cfg.model, cfg.seed);
  Adam optimizer(model.parameters(), cfg.lr);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainResult result{std::move(model), {}, 0.0, 0.0, {}};
  Detector& net = result.model;
  const auto params = net.parameters();
  const nlohmann::json meta_base{{"train_config", cfg}};

  std::vector<Sample> flipped_storage;
  std::vector<const Sample*> batch;
  for (int it = 0; it < cfg.n_iters; ++it) {
    batch.clear();
    flipped_storage.clear();
    flipped_storage.reserve(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Sample* s = &data.samples[order[cursor++]];
      if (cfg.flip_augment && (rng() & 1U) != 0U) {
        flipped_storage.push_back(flipped(*s));
        s = &flipped_storage.back();
      }
      batch.push_back(s);
    }

    LossBreakdown loss;
    try {
      loss = accumulate_gradients(net, batch, cfg);
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged("iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(loss.total)) {
      throw TrainingDiverged("iteration " + std::to_string(it) + ": " + describe(loss));
    }
    clip_grad_norm(params, cfg.grad_clip);
    optimizer.step();
    result.trace.push_back(loss);

    if (write) {
      metrics << it << ',' << loss.heat << ',' << loss.off << ',' << loss.seg << ',' << loss.wh
              << ',' << loss.total << '\n';
      if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.n_iters) {
        nlohmann::json meta = meta_base;
        meta["iteration"] = it + 1;
        save_checkpoint(net, out_dir / indexed_name("checkpoint_iter", it + 1, ".ckpt"), meta);
      }
    }
    if (log != nullptr && cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.n_iters)) {
      *log << "iter " << it << " " << describe(loss) << std::endl;
    }
  }

  std::tie(result.initial_smoothed, result.final_smoothed) =
      smoothed_endpoints(result.trace, cfg.smoothing_window);
  if (write) {
    nlohmann::json meta = meta_base;
    meta["iteration"] = cfg.n_iters;
    meta["initial_smoothed_loss"] = result.initial_smoothed;
    meta["final_smoothed_loss"] = result.final_smoothed;
    result.checkpoint = out_dir / "model.ckpt";
    save_checkpoint(net, result.checkpoint, meta);
  }
  return result;
}

std::vector<FrameDetections> detect_dataset(Detector& model, const Dataset& data,
                                            const DecodeParams& params) {
  std::vector<FrameDetections> out;
  out.reserve(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    out.push_back(FrameDetections{static_cast<int>(i), detect(data.samples[i].image, model, params)});
  }
  return out;
}

std::vector<FrameTruth> dataset_truth(const Dataset& data) {
  std::vector<FrameTruth> out;
  out.reserve(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    out.push_back(FrameTruth{static_cast<int>(i), data.samples[i].boxes});
  }
  return out;
}

std::array<AblationVariant, 3> ablation_variants() {
  return {AblationVariant{"attention_multitask", true, true},
          AblationVariant{"multitask_only", false, true},
          AblationVariant{"baseline", false, false}};
}

AblationReport ablate(const Dataset& train_data, const Dataset& eval_data, const TrainConfig& base,
                      const fs::path& out_dir, const DecodeParams& decode, double iou_min,
                      std::ostream* log) {
  if (eval_data.empty()) throw InvalidArgument("ablate: empty evaluation set");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  AblationReport report;
  report.iou_min = iou_min;
  report.n_train = train_data.size();
  report.n_eval = eval_data.size();
  const std::vector<FrameTruth> truth = dataset_truth(eval_data);

  for (const AblationVariant& v : ablation_variants()) {
    TrainConfig cfg = base;
    cfg.model.attention_enabled = v.attention;
    cfg.model.multitask_enabled = v.multitask;
    if (log != nullptr) *log << "== " << v.name << std::endl;
    TrainResult r = train(train_data, cfg, out_dir / v.name, log);
    const auto dets = detect_dataset(r.model, eval_data, decode);
    write_json_file(out_dir / v.name / "detections.json", detections_to_json(dets));
    AblationRow row;
    row.variant = v;
    row.map = mean_average_precision(dets, truth, iou_min).map;
    row.pr = average_precision(dets, truth, iou_min);
    row.initial_smoothed = r.initial_smoothed;
    row.final_smoothed = r.final_smoothed;
    row.checkpoint = r.checkpoint;
    if (log != nullptr) *log << v.name << " mAP=" << row.map << std::endl;
    report.rows.push_back(std::move(row));
  }

  write_json_file(out_dir / "ablation.json", to_json(report));
  std::ofstream csv(out_dir / "ablation.csv");
  csv << "name,attention,multitask,map,initial_smoothed_loss,final_smoothed_loss\n";
  std::vector<std::pair<std::string, PRCurve>> curves;
  for (const AblationRow& row : report.rows) {
    csv << row.variant.name << ',' << (row.variant.attention ? 1 : 0) << ','
        << (row.variant.multitask ? 1 : 0) << ',' << row.map << ',' << row.initial_smoothed << ','
        << row.final_smoothed << '\n';
    curves.emplace_back(row.variant.name, row.pr);
  }
  write_pr_csv(out_dir / "pr_curves.csv", curves);
  render_pr_plot(out_dir / "pr_curves.png", curves);
  return report;
}

nlohmann::json to_json(const AblationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& r : report.rows) {
    rows.push_back({{"name", r.variant.name},
                    {"attention", r.variant.attention},
                    {"multitask", r.variant.multitask},
                    {"map", r.map},
                    {"pooled_ap", r.pr.ap},
                    {"initial_smoothed_loss", r.initial_smoothed},
                    {"final_smoothed_loss", r.final_smoothed},
                    {"checkpoint", r.checkpoint.string()}});
  }
  return nlohmann::json{{"iou_min", report.iou_min},
                        {"n_train", report.n_train},
                        {"n_eval", report.n_eval},
                        {"rows", rows}};
}

}  // namespace spotnet
