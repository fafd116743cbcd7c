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

#include "spotnet/videogen.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "spotnet/image_io.hpp"

namespace spotnet {

namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

const char* kind_name(ObjectKind k) { return k == ObjectKind::rectangle ? "rectangle" : "ellipse"; }

ObjectKind kind_from(const std::string& s) {
  if (s == "rectangle") return ObjectKind::rectangle;
  if (s == "ellipse") return ObjectKind::ellipse;
  throw InvalidArgument("unknown object kind '" + s + "'");
}

struct MovingObject {
  ObjectKind kind;
  int w;
  int h;
  double x;  // top-left, view coordinates
  double y;
  double vx;
  double vy;
  double color[3];
  int stripe;  // texture period in px
};

/// Smooth lattice noise in [-1, 1], one octave.
class ValueNoise {
 public:
  ValueNoise(int h, int w, int spacing, std::mt19937_64& rng)
      : spacing_(spacing), gw_(w / spacing + 2), gh_(h / spacing + 2),
        lattice_(static_cast<std::size_t>(gw_) * gh_) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : lattice_) v = u(rng);
  }

  double at(int y, int x) const {
    const double fy = static_cast<double>(y) / spacing_;
    const double fx = static_cast<double>(x) / spacing_;
    const int iy = static_cast<int>(fy);
    const int ix = static_cast<int>(fx);
    const double ty = smooth(fy - iy);
    const double tx = smooth(fx - ix);
    const double a = node(iy, ix) * (1 - tx) + node(iy, ix + 1) * tx;
    const double b = node(iy + 1, ix) * (1 - tx) + node(iy + 1, ix + 1) * tx;
    return a * (1 - ty) + b * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double node(int y, int x) const { return lattice_[static_cast<std::size_t>(y) * gw_ + x]; }

  int spacing_;
  int gw_;
  int gh_;
  std::vector<double> lattice_;
};

/// Rendered pixels of one object at integer top-left (x0, y0).
bool object_covers(const MovingObject& o, int x0, int y0, int x, int y) {
  if (x < x0 || x >= x0 + o.w || y < y0 || y >= y0 + o.h) {
    return false;
  }
  if (o.kind == ObjectKind::rectangle) {
    return true;
  }
  const double rx = 0.5 * o.w;
  const double ry = 0.5 * o.h;
  const double dx = (x + 0.5 - (x0 + rx)) / rx;
  const double dy = (y + 0.5 - (y0 + ry)) / ry;
  return dx * dx + dy * dy <= 1.0;
}

void advance(double& pos, double& vel, int extent) {
  pos += vel;
  if (pos < 0.0) {
    pos = -pos;
    vel = -vel;
  }
  if (pos > extent) {
    pos = 2.0 * extent - pos;
    vel = -vel;
  }
  pos = std::clamp(pos, 0.0, static_cast<double>(extent));
}

}  // namespace

void SceneConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("SceneConfig: " + what); };
  if (height <= 0 || width <= 0) fail("image size must be positive");
  if (height % 4 != 0 || width % 4 != 0) fail("image dimensions must be divisible by 4");
  if (channels != 1 && channels != 3) fail("channels must be 1 or 3");
  if (n_frames < 2) fail("n_frames must be >= 2");
  if (n_objects < 0) fail("n_objects must be >= 0");
  if (n_objects > 0 && object_kinds.empty()) fail("object_kinds is empty");
  if (size_min < 4) fail("object sizes must be >= 4 px per side");
  if (size_max < size_min) fail("object size range is inverted");
  if (size_max > std::min(height, width)) fail("objects larger than the frame");
  if (speed_min < 0.0 || speed_max < speed_min) fail("invalid object speed range");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!camera.pan && (camera.dx != 0 || camera.dy != 0)) fail("static camera with pan offsets");
}

void to_json(nlohmann::json& j, const SceneConfig& c) {
  nlohmann::json kinds = nlohmann::json::array();
  for (ObjectKind k : c.object_kinds) kinds.push_back(kind_name(k));
  nlohmann::json camera = c.camera.pan
                              ? nlohmann::json{{"type", "pan"}, {"dx", c.camera.dx}, {"dy", c.camera.dy}}
                              : nlohmann::json{{"type", "none"}};
  j = nlohmann::json{
      {"image_size", {c.height, c.width}},
      {"channels", c.channels},
      {"n_objects", c.n_objects},
      {"object_kinds", kinds},
      {"object_speed_range", {c.speed_min, c.speed_max}},
      {"object_size_range", {c.size_min, c.size_max}},
      {"camera_motion", camera},
      {"background", c.background == Background::flat ? "flat" : "textured-noise"},
      {"n_frames", c.n_frames},
      {"noise_sigma", c.noise_sigma},
      {"seed", c.seed},
  };
}

void from_json(const nlohmann::json& j, SceneConfig& c) {
  SceneConfig d;
  if (j.contains("image_size")) {
    d.height = j.at("image_size").at(0).get<int>();
    d.width = j.at("image_size").at(1).get<int>();
  }
  d.channels = j.value("channels", d.channels);
  d.n_objects = j.value("n_objects", d.n_objects);
  if (j.contains("object_kinds")) {
    d.object_kinds.clear();
    for (const auto& k : j.at("object_kinds")) d.object_kinds.push_back(kind_from(k.get<std::string>()));
  }
  if (j.contains("object_speed_range")) {
    d.speed_min = j.at("object_speed_range").at(0).get<double>();
    d.speed_max = j.at("object_speed_range").at(1).get<double>();
  }
  if (j.contains("object_size_range")) {
    d.size_min = j.at("object_size_range").at(0).get<int>();
    d.size_max = j.at("object_size_range").at(1).get<int>();
  }
  if (j.contains("camera_motion")) {
    const auto& cam = j.at("camera_motion");
    const std::string type = cam.value("type", "none");
    if (type == "pan") {
      d.camera = CameraMotion{true, cam.value("dx", 0), cam.value("dy", 0)};
    } else if (type != "none") {
      throw InvalidArgument("unknown camera_motion type '" + type + "'");
    }
  }
  if (j.contains("background")) {
    const std::string bg = j.at("background").get<std::string>();
    if (bg == "flat") {
      d.background = Background::flat;
    } else if (bg == "textured-noise") {
      d.background = Background::textured_noise;
    } else {
      throw InvalidArgument("unknown background '" + bg + "'");
    }
  }
  d.n_frames = j.value("n_frames", d.n_frames);
  d.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  d.seed = j.value("seed", d.seed);
  c = d;
}

VideoSequence gen_sequence(const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const int H = config.height;
  const int W = config.width;
  const int C = config.channels;
  const int n = config.n_frames;

  // Latent canvas large enough for the whole pan trajectory.
  const int span_x = std::abs(config.camera.dx) * (n - 1);
  const int span_y = std::abs(config.camera.dy) * (n - 1);
  const int canvas_h = H + span_y;
  const int canvas_w = W + span_x;

  std::uniform_real_distribution<double> tint(-8.0, 8.0);
  double base[3];
  for (double& b : base) b = 128.0 + tint(rng);
  std::vector<float> canvas(static_cast<std::size_t>(canvas_h) * canvas_w * C);
  {
    ValueNoise coarse(canvas_h, canvas_w, 8, rng);
    ValueNoise fine(canvas_h, canvas_w, 4, rng);
    const bool textured = config.background == Background::textured_noise;
    for (int y = 0; y < canvas_h; ++y) {
      for (int x = 0; x < canvas_w; ++x) {
        const double tex = textured ? 25.0 * coarse.at(y, x) + 10.0 * fine.at(y, x) : 0.0;
        for (int c = 0; c < C; ++c) {
          canvas[(static_cast<std::size_t>(y) * canvas_w + x) * C + c] =
              static_cast<float>(base[c] + tex);
        }
      }
    }
  }

  std::vector<MovingObject> objects;
  objects.reserve(config.n_objects);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < config.n_objects; ++i) {
    MovingObject o{};
    o.kind = config.object_kinds[rng() % config.object_kinds.size()];
    std::uniform_int_distribution<int> size(config.size_min, config.size_max);
    o.w = size(rng);
    o.h = size(rng);
    o.x = unit(rng) * (W - o.w);
    o.y = unit(rng) * (H - o.h);
    const double speed = config.speed_min + unit(rng) * (config.speed_max - config.speed_min);
    const double angle = unit(rng) * 2.0 * std::numbers::pi;
    o.vx = speed * std::cos(angle);
    o.vy = speed * std::sin(angle);
    const bool bright = unit(rng) < 0.5;
    for (double& col : o.color) {
      col = bright ? 200.0 + 40.0 * unit(rng) : 15.0 + 40.0 * unit(rng);
    }
    o.stripe = 3 + static_cast<int>(rng() % 3);
    objects.push_back(o);
  }

  VideoSequence seq;
  seq.config = config;
  seq.frames.reserve(n);
  seq.gt_boxes.resize(n);
  seq.oracle_masks.reserve(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<float> frame(static_cast<std::size_t>(H) * W * C);

  for (int t = 0; t < n; ++t) {
    const int ox = config.camera.dx >= 0 ? t * config.camera.dx : span_x + t * config.camera.dx;
    const int oy = config.camera.dy >= 0 ? t * config.camera.dy : span_y + t * config.camera.dy;
    for (int y = 0; y < H; ++y) {
      const float* src = canvas.data() + (static_cast<std::size_t>(y + oy) * canvas_w + ox) * C;
      std::copy_n(src, static_cast<std::size_t>(W) * C,
                  frame.begin() + static_cast<std::ptrdiff_t>(y) * W * C);
    }

    SegMask oracle(H, W, 0);
    for (const MovingObject& o : objects) {
      const int x0 = std::clamp(static_cast<int>(std::lround(o.x)), 0, W - o.w);
      const int y0 = std::clamp(static_cast<int>(std::lround(o.y)), 0, H - o.h);
      int bx1 = W, by1 = H, bx2 = -1, by2 = -1;
      for (int y = y0; y < y0 + o.h; ++y) {
        for (int x = x0; x < x0 + o.w; ++x) {
          if (!object_covers(o, x0, y0, x, y)) continue;
          bx1 = std::min(bx1, x);
          by1 = std::min(by1, y);
          bx2 = std::max(bx2, x);
          by2 = std::max(by2, y);
          oracle.at(y, x) = 1;
          const int lx = x - x0;
          const int ly = y - y0;
          const double mod = ((lx / o.stripe + ly / o.stripe) % 2 == 0) ? 10.0 : -10.0;
          for (int c = 0; c < C; ++c) {
            frame[(static_cast<std::size_t>(y) * W + x) * C + c] =
                static_cast<float>(o.color[c] + mod);
          }
        }
      }
      seq.gt_boxes[t].push_back(
          LabeledBox{class_of(o.kind), Box{static_cast<double>(bx1), static_cast<double>(by1),
                                           static_cast<double>(bx2 + 1), static_cast<double>(by2 + 1)}});
    }

    Image image(H, W, C);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const double v = frame[i] + config.noise_sigma * noise(rng);
      image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    seq.frames.push_back(std::move(image));
    seq.oracle_masks.push_back(std::move(oracle));

    for (MovingObject& o : objects) {
      advance(o.x, o.vx, W - o.w);
      advance(o.y, o.vy, H - o.h);
    }
  }
  return seq;
}

nlohmann::json boxes_to_json(const std::vector<std::vector<LabeledBox>>& boxes) {
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t f = 0; f < boxes.size(); ++f) {
    nlohmann::json objs = nlohmann::json::array();
    for (const LabeledBox& b : boxes[f]) {
      objs.push_back({{"class", b.class_id}, {"x1", b.box.x1}, {"y1", b.box.y1},
                      {"x2", b.box.x2}, {"y2", b.box.y2}});
    }
    records.push_back({{"frame", f}, {"objects", objs}});
  }
  return records;
}

std::vector<std::vector<LabeledBox>> boxes_from_json(const nlohmann::json& records) {
  std::vector<std::vector<LabeledBox>> out;
  for (const auto& rec : records) {
    const int f = rec.at("frame").get<int>();
    if (f < 0) throw InvalidArgument("negative frame index in box records");
    if (static_cast<int>(out.size()) <= f) out.resize(f + 1);
    for (const auto& o : rec.at("objects")) {
      out[f].push_back(LabeledBox{o.at("class").get<int>(),
                                  Box{o.at("x1").get<double>(), o.at("y1").get<double>(),
                                      o.at("x2").get<double>(), o.at("y2").get<double>()}});
    }
  }
  return out;
}

nlohmann::json write_sequence(const VideoSequence& seq, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json frames = nlohmann::json::array();
  for (int t = 0; t < seq.size(); ++t) {
    const std::string frame_name = indexed_name("frame", t);
    write_png(dir / frame_name, seq.frames[t]);
    nlohmann::json entry{{"index", t}, {"frame", frame_name},
                         {"frame_sha1", git_blob_hash_file(dir / frame_name)}};
    if (t < static_cast<int>(seq.oracle_masks.size())) {
      const std::string mask_name = indexed_name("mask", t);
      write_mask_png(dir / mask_name, seq.oracle_masks[t]);
      entry["mask"] = mask_name;
      entry["mask_sha1"] = git_blob_hash_file(dir / mask_name);
    }
    frames.push_back(std::move(entry));
  }
  write_json_file(dir / "gt.json", boxes_to_json(seq.gt_boxes));

  nlohmann::json manifest{
      {"format_version", kFormatVersion},
      {"config", seq.config},
      {"n_frames", seq.size()},
      {"gt", "gt.json"},
      {"gt_sha1", git_blob_hash_file(dir / "gt.json")},
      {"frames", frames},
  };
  write_json_file(dir / "sequence.json", manifest);
  return manifest;
}

VideoSequence read_sequence(const fs::path& dir) {
  const nlohmann::json manifest = read_json_file(dir / "sequence.json");
  if (manifest.value("format_version", 0) != kFormatVersion) {
    throw IoError(dir.string() + ": unsupported sequence format version");
  }
  VideoSequence seq;
  seq.config = manifest.at("config").get<SceneConfig>();
  const int n = manifest.at("n_frames").get<int>();
  seq.gt_boxes = boxes_from_json(read_json_file(dir / manifest.value("gt", "gt.json")));
  seq.gt_boxes.resize(n);
  bool all_masks = true;
  for (const auto& entry : manifest.at("frames")) {
    seq.frames.push_back(read_png(dir / entry.at("frame").get<std::string>()));
    if (entry.contains("mask") && fs::exists(dir / entry.at("mask").get<std::string>())) {
      seq.oracle_masks.push_back(read_mask_png(dir / entry.at("mask").get<std::string>()));
    } else {
      all_masks = false;
    }
  }
  if (!all_masks) seq.oracle_masks.clear();
  if (seq.size() != n) {
    throw IoError(dir.string() + ": manifest lists " + std::to_string(seq.size()) +
                  " frames, expected " + std::to_string(n));
  }
  return seq;
}

}  // namespace spotnet
