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

#include "spotnet/net.hpp"

#include <cmath>

#include "spotnet/types.hpp"

namespace spotnet {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("ModelConfig: " + what); };
  if (n_stacks < 1) fail("n_stacks must be >= 1");
  if (base_channels < 4) fail("base_channels must be >= 4");
  if (n_classes < 1) fail("n_classes must be >= 1");
  if (hourglass_depth < 1) fail("hourglass_depth must be >= 1");
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (attention_enabled && !multitask_enabled) {
    fail("attention requires the multi-task segmentation head");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_stacks", c.n_stacks},
                     {"base_channels", c.base_channels},
                     {"n_classes", c.n_classes},
                     {"attention_enabled", c.attention_enabled},
                     {"multitask_enabled", c.multitask_enabled},
                     {"hourglass_depth", c.hourglass_depth},
                     {"in_channels", c.in_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  d.n_stacks = j.value("n_stacks", d.n_stacks);
  d.base_channels = j.value("base_channels", d.base_channels);
  d.n_classes = j.value("n_classes", d.n_classes);
  d.attention_enabled = j.value("attention_enabled", d.attention_enabled);
  d.multitask_enabled = j.value("multitask_enabled", d.multitask_enabled);
  d.hourglass_depth = j.value("hourglass_depth", d.hourglass_depth);
  d.in_channels = j.value("in_channels", d.in_channels);
  c = d;
}

Parameter* Detector::make_param(const std::string& name, Shape shape, double stddev, float fill) {
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape, fill);
  if (stddev > 0.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (float& v : p->value.data()) v = static_cast<float>(dist(init_rng_));
  }
  params_.push_back(std::move(p));
  return params_.back().get();
}

Detector::Conv Detector::make_conv(const std::string& name, int cin, int cout, int k, int stride,
                                   double gain, float bias_fill) {
  const double fan_in = static_cast<double>(cin) * k * k;
  Conv c;
  c.weight = make_param(name + ".weight", Shape{cout, cin, k, k}, gain * std::sqrt(2.0 / fan_in));
  c.bias = make_param(name + ".bias", Shape{1, 1, 1, cout}, 0.0, bias_fill);
  c.stride = stride;
  c.pad = k / 2;
  return c;
}

Detector::Residual Detector::make_residual(const std::string& name, int c) {
  // The second conv starts small so that deep stacks of residual sums keep
  // activations in range without normalization layers.
  return Residual{make_conv(name + ".a", c, c, 3, 1, 1.0), make_conv(name + ".b", c, c, 3, 1, 0.25)};
}

Detector::Head Detector::make_head(const std::string& name, int cin, int cout, float bias_fill) {
  Head h;
  h.hidden = make_conv(name + ".hidden", cin, cin, 3, 1, 1.0);
  h.out = make_conv(name + ".out", cin, cout, 1, 1, 0.1, bias_fill);
  return h;
}

Detector::Detector(const ModelConfig& config, std::uint64_t seed)
    : config_(config), init_rng_(seed) {
  config_.validate();
  const int C = config_.base_channels;
  const int stem_c = std::max(4, C / 2);
  stem1_ = make_conv("stem.conv1", config_.in_channels, stem_c, 3, 2, 1.0);
  stem2_ = make_conv("stem.conv2", stem_c, C, 3, 2, 1.0);
  stem_res_ = make_residual("stem.res", C);

  for (int s = 0; s < config_.n_stacks; ++s) {
    const std::string prefix = "stack" + std::to_string(s);
    Stack st;
    for (int d = 0; d < config_.hourglass_depth; ++d) {
      const std::string lp = prefix + ".hg.level" + std::to_string(d);
      st.levels.push_back(HourglassLevel{make_residual(lp + ".up1", C), make_residual(lp + ".low1", C),
                                         make_residual(lp + ".low3", C)});
    }
    st.bottom = make_residual(prefix + ".hg.bottom", C);
    st.out = make_conv(prefix + ".out", C, C, 3, 1, 1.0);
    if (s + 1 < config_.n_stacks) {
      st.merge = make_conv(prefix + ".merge", C, C, 1, 1, 0.5);
      st.post_merge = make_residual(prefix + ".post_merge", C);
    }
    stacks_.push_back(std::move(st));
  }

  seg_begin_ = params_.size();
  const int seg_c1 = std::max(4, C / 2);
  const int seg_c2 = std::max(4, C / 4);
  seg1_ = make_conv("seg.conv1", C, seg_c1, 3, 1, 1.0);
  seg2_ = make_conv("seg.conv2", seg_c1, seg_c2, 3, 1, 1.0);
  seg3_ = make_conv("seg.conv3", seg_c2, 1, 3, 1, 0.1);
  seg_end_ = params_.size();

  // Initial heatmap probability ~0.1: bias = -log((1 - 0.1) / 0.1).
  const float heat_bias = static_cast<float>(-std::log((1.0 - 0.1) / 0.1));
  heat_ = make_head("head.heatmap", C, config_.n_classes, heat_bias);
  wh_ = make_head("head.wh", C, 2, 0.0f);
  offset_ = make_head("head.offset", C, 2, 0.0f);
}

Var Detector::conv(Tape& tape, Var x, const Conv& c) {
  return ops::conv2d(tape, x, *c.weight, c.bias, c.stride, c.pad);
}

Var Detector::residual(Tape& tape, Var x, const Residual& r) {
  Var h = ops::relu(tape, conv(tape, x, r.a));
  h = conv(tape, h, r.b);
  return ops::relu(tape, ops::add(tape, x, h));
}

Var Detector::hourglass(Tape& tape, Var x, const Stack& s, std::size_t level) {
  const HourglassLevel& lv = s.levels[level];
  Var up1 = residual(tape, x, lv.up1);
  Var low1 = residual(tape, ops::max_pool2(tape, x), lv.low1);
  Var low2 = level + 1 < s.levels.size() ? hourglass(tape, low1, s, level + 1)
                                         : residual(tape, low1, s.bottom);
  Var low3 = residual(tape, low2, lv.low3);
  const Shape& target = tape.shape(up1);
  return ops::add(tape, up1, ops::upsample_nearest(tape, low3, target.h, target.w));
}

Var Detector::backbone(Tape& tape, Var image) {
  const Shape& in = tape.shape(image);
  if (in.c != config_.in_channels) {
    throw InvalidArgument("backbone: expected " + std::to_string(config_.in_channels) +
                          " input channels, got " + in.str());
  }
  if (in.h % kOutputStride != 0 || in.w % kOutputStride != 0) {
    throw InvalidArgument("backbone: input " + in.str() + " is not divisible by 4");
  }
  const int min_side = (1 << config_.hourglass_depth) * kOutputStride;
  if (in.h < min_side || in.w < min_side) {
    throw InvalidArgument("backbone: input " + in.str() + " smaller than " +
                          std::to_string(min_side) + " px for hourglass depth " +
                          std::to_string(config_.hourglass_depth));
  }
  Var x = ops::relu(tape, conv(tape, image, stem1_));
  x = ops::relu(tape, conv(tape, x, stem2_));
  x = residual(tape, x, stem_res_);
  Var features = x;
  for (std::size_t s = 0; s < stacks_.size(); ++s) {
    const Stack& st = stacks_[s];
    Var hg = hourglass(tape, x, st, 0);
    features = ops::relu(tape, conv(tape, hg, st.out));
    if (s + 1 < stacks_.size()) {
      x = ops::add(tape, x, conv(tape, features, st.merge));
      x = residual(tape, x, st.post_merge);
    }
  }
  return features;
}

Var Detector::seg_logits(Tape& tape, Var features) {
  Var h = ops::relu(tape, conv(tape, features, seg1_));
  h = ops::upsample_bilinear2(tape, h);
  h = ops::relu(tape, conv(tape, h, seg2_));
  h = ops::upsample_bilinear2(tape, h);
  return conv(tape, h, seg3_);
}

Var Detector::seg_head(Tape& tape, Var features) {
  return ops::sigmoid(tape, seg_logits(tape, features));
}

Var Detector::head(Tape& tape, Var x, const Head& h) {
  return conv(tape, ops::relu(tape, conv(tape, x, h.hidden)), h.out);
}

HeadGraph Detector::detect_heads(Tape& tape, Var features) {
  HeadGraph g;
  g.heatmap = ops::sigmoid(tape, head(tape, features, heat_));
  g.wh = head(tape, features, wh_);
  g.offset = head(tape, features, offset_);
  return g;
}

ForwardGraph Detector::forward(Tape& tape, Var image, const ForwardOptions& options) {
  ForwardGraph g;
  g.features = backbone(tape, image);
  const Shape& in = tape.shape(image);
  const Shape attention_shape{in.n, 1, in.h, in.w};
  const bool seg_head_active = config_.multitask_enabled;
  if (options.attention_override.has_value()) {
    g.attention = tape.constant(Tensor(attention_shape, *options.attention_override));
  } else if (seg_head_active) {
    g.attention = seg_head(tape, g.features);
  } else {
    g.attention = tape.constant(Tensor(attention_shape, 0.5f));
  }
  g.seg_trained = seg_head_active && !options.attention_override.has_value();

  Var head_input = config_.attention_enabled ? apply_attention(tape, g.features, g.attention)
                                             : g.features;
  const HeadGraph heads = detect_heads(tape, head_input);
  g.heatmap = heads.heatmap;
  g.wh = heads.wh;
  g.offset = heads.offset;
  return g;
}

NetworkOutput Detector::forward(const Tensor& image, const ForwardOptions& options) {
  Tape tape(false);
  const ForwardGraph g = forward(tape, tape.constant(image), options);
  return NetworkOutput{tape.value(g.attention), tape.value(g.heatmap), tape.value(g.wh),
                       tape.value(g.offset)};
}

std::vector<Parameter*> Detector::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> Detector::parameters() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> Detector::seg_head_parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = seg_begin_; i < seg_end_; ++i) out.push_back(params_[i].get());
  return out;
}

Parameter* Detector::find_parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::size_t Detector::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void Detector::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Var apply_attention(Tape& tape, Var features, Var attention) {
  const Shape& f = tape.shape(features);
  const Shape& a = tape.shape(attention);
  if (a.c != 1 || a.n != f.n || a.h != f.h * kOutputStride || a.w != f.w * kOutputStride) {
    throw InvalidArgument("apply_attention: attention " + a.str() + " does not match features " +
                          f.str() + " at stride 4");
  }
  Var pooled = ops::avg_pool(tape, attention, kOutputStride);
  return ops::multiply_channels(tape, features, pooled);
}

Tensor apply_attention(const Tensor& features, const Tensor& attention) {
  Tape tape(false);
  return tape.value(apply_attention(tape, tape.constant(features), tape.constant(attention)));
}

}  // namespace spotnet
