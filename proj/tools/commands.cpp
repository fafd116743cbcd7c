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

#include "commands.hpp"

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "spotnet/annotate.hpp"
#include "spotnet/dataset.hpp"
#include "spotnet/decode.hpp"
#include "spotnet/evalkit.hpp"
#include "spotnet/image_io.hpp"
#include "spotnet/net.hpp"
#include "spotnet/trainer.hpp"
#include "spotnet/types.hpp"
#include "spotnet/videogen.hpp"

namespace spotnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

class Manifest {
 public:
  void add_input(const fs::path& path) {
    if (!fs::is_regular_file(path)) return;
    inputs_.push_back({{"path", path.string()}, {"git_blob_sha1", git_blob_hash_file(path)}});
  }

  void write(const CommonOptions& opt, const json& config, const fs::path& out_dir,
             std::uint64_t seed) const {
    json m{{"command", opt.command},
           {"config_path", opt.config_path.string()},
           {"config", config},
           {"seed", seed},
           {"out_dir", out_dir.string()},
           {"inputs", inputs_},
           {"tool_version", kToolVersion}};
    fs::create_directories(out_dir);
    write_json_file(out_dir / "run_manifest.json", m);
  }

 private:
  json inputs_ = json::array();
};

fs::path out_dir_of(const json& cfg, const char* fallback) {
  return fs::path(cfg.value("out", std::string(fallback)));
}

std::uint64_t seed_of(const json& cfg) { return cfg.value("seed", std::uint64_t{0}); }

/// Common overrides shared by every command.
void apply_common(const CommonOptions& opt, json& cfg) {
  if (!cfg.is_object()) throw UsageError("config root must be a JSON object");
  if (opt.seed) cfg["seed"] = *opt.seed;
  if (opt.out) cfg["out"] = opt.out->string();
}

json data_specs(const CommonOptions& opt, const json& cfg, const char* key) {
  if (!opt.data_dirs.empty()) {
    json specs = json::array();
    for (const std::string& d : opt.data_dirs) specs.push_back({{"dir", d}});
    return specs;
  }
  if (!cfg.contains(key)) throw UsageError(std::string("config is missing '") + key + "'");
  json specs = cfg.at(key);
  if (!specs.is_array()) specs = json::array({specs});
  for (json& s : specs) {
    if (s.is_string()) s = json{{"dir", s}};
  }
  return specs;
}

Dataset load_data(const json& specs, Manifest& manifest) {
  Dataset data;
  for (const json& s : specs) {
    const fs::path dir = s.at("dir").get<std::string>();
    const FrameSelection sel = s.value("frames", FrameSelection{});
    for (const char* f : {"sequence.json", "gt.json", "annot_params.json"}) {
      manifest.add_input(dir / f);
    }
    append(data, load_dataset(dir, sel));
  }
  if (data.empty()) throw InvalidArgument("data selection is empty");
  return data;
}

DecodeParams decode_params(const json& cfg) {
  DecodeParams p;
  if (cfg.contains("decode")) {
    const json& d = cfg.at("decode");
    p.k = d.value("k", p.k);
    p.score_thresh = d.value("score_thresh", p.score_thresh);
  }
  return p;
}

ApMode ap_mode_of(const json& cfg) {
  const std::string m = cfg.value("ap_mode", std::string("eleven_point"));
  if (m == "eleven_point") return ApMode::eleven_point;
  if (m == "continuous") return ApMode::continuous;
  throw UsageError("unknown ap_mode '" + m + "' (eleven_point|continuous)");
}

std::string fmt4(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << v;
  return ss.str();
}

}  // namespace

json load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
  json cfg;
  try {
    cfg = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (cfg.is_object() && cfg.contains("command") && cfg.contains("config") &&
      cfg.contains("inputs")) {
    return cfg.at("config");
  }
  return cfg;
}

int cmd_gen_data(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  const fs::path out = out_dir_of(cfg, "data");

  // Either one scene at the root or a list under "sequences".
  std::vector<std::pair<std::string, SceneConfig>> scenes;
  try {
    if (cfg.contains("sequences")) {
      int i = 0;
      for (json& s : cfg.at("sequences")) {
        // Sequence i gets seed + i so one flag reseeds the whole set.
        if (opt.seed) s["seed"] = *opt.seed + static_cast<std::uint64_t>(i);
        scenes.emplace_back(s.value("name", indexed_name("seq", i, "")), s.get<SceneConfig>());
        ++i;
      }
    } else {
      scenes.emplace_back("", cfg.get<SceneConfig>());
    }
    for (auto& [name, sc] : scenes) sc.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad scene config: ") + e.what());
  }

  Manifest manifest;
  manifest.add_input(opt.config_path);
  for (const auto& [name, sc] : scenes) {
    const fs::path dir = name.empty() ? out : out / name;
    const VideoSequence seq = gen_sequence(sc);
    const json m = write_sequence(seq, dir);
    std::cout << "wrote " << dir.string() << ": " << seq.size() << " frames, gt sha1 "
              << m.at("gt_sha1").get<std::string>() << '\n';
  }
  manifest.write(opt, cfg, out, scenes.empty() ? 0 : scenes.front().second.seed);
  return 0;
}

int cmd_annotate(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  if (opt.seq_dir) cfg["sequence_dir"] = opt.seq_dir->string();
  if (opt.mode) cfg["mode"] = *opt.mode;
  if (!cfg.contains("sequence_dir")) throw UsageError("config is missing 'sequence_dir'");
  const fs::path seq_dir = cfg.at("sequence_dir").get<std::string>();
  const fs::path out = cfg.contains("out") ? fs::path(cfg.at("out").get<std::string>()) : seq_dir;

  AnnotateParams params;
  try {
    if (cfg.contains("params")) params = cfg.at("params").get<AnnotateParams>();
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad annotate params: ") + e.what());
  }

  const json seq_manifest = read_json_file(seq_dir / "sequence.json");
  const bool panning =
      seq_manifest.at("config").value("camera_motion", json::object()).value("type", "none") ==
      "pan";
  const CameraMode manifest_mode = panning ? CameraMode::moving : CameraMode::fixed;
  CameraMode mode = manifest_mode;
  if (cfg.contains("mode")) {
    try {
      mode = camera_mode_from(cfg.at("mode").get<std::string>());
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    if (mode != manifest_mode) {
      std::cerr << "warning: mode '" << to_string(mode) << "' disagrees with the sequence manifest"
                << " (camera " << (panning ? "pan" : "none") << ", expected '"
                << to_string(manifest_mode) << "')\n";
    }
  }
  cfg["mode"] = to_string(mode);
  cfg["params"] = params;

  Manifest manifest;
  manifest.add_input(opt.config_path);
  manifest.add_input(seq_dir / "sequence.json");
  manifest.add_input(seq_dir / "gt.json");

  const VideoSequence seq = read_sequence(seq_dir);
  const std::vector<SegMask> masks = annotate_sequence(seq, mode, params);

  std::size_t fg = 0;
  std::size_t inside = 0;
  int frames_ok = 0;
  for (int t = 0; t < seq.size(); ++t) {
    const SegMask boxes = box_union_mask(seq.frames[t].height, seq.frames[t].width,
                                         std::span<const LabeledBox>(seq.gt_boxes[t]));
    bool ok = true;
    for (std::size_t i = 0; i < masks[t].values.size(); ++i) {
      if (masks[t].values[i] == 0) continue;
      ++fg;
      if (boxes.values[i] != 0) {
        ++inside;
      } else {
        ok = false;
      }
    }
    frames_ok += ok ? 1 : 0;
  }
  write_annotations(out, masks, mode, params);
  const double pct = fg == 0 ? 100.0 : 100.0 * static_cast<double>(inside) / fg;
  std::cout << "wrote " << masks.size() << " masks to " << out.string() << " (mode "
            << to_string(mode) << ")\n";
  std::cout << "subset invariant: " << std::fixed << std::setprecision(2) << pct << "% of " << fg
            << " foreground pixels inside gt boxes, " << frames_ok << "/" << seq.size()
            << " frames " << (frames_ok == seq.size() ? "OK" : "VIOLATED") << '\n';
  if (!seq.oracle_masks.empty()) {
    const int start = mode == CameraMode::fixed ? params.bg.warmup_frames : 0;
    double sum = 0.0;
    int n = 0;
    for (int t = start; t < seq.size(); ++t, ++n) sum += mask_iou(masks[t], seq.oracle_masks[t]);
    if (n > 0) {
      std::cout << "mean IoU vs oracle over frames " << start << ".." << seq.size() - 1 << ": "
                << std::setprecision(4) << sum / n << '\n';
    }
  }
  manifest.write(opt, cfg, out, seed_of(cfg));
  return frames_ok == seq.size() ? 0 : 1;
}

namespace {

TrainConfig train_config_of(const CommonOptions& opt, json& cfg) {
  json t = cfg.value("train", json::object());
  if (opt.seed) t["seed"] = *opt.seed;
  if (opt.iters) t["n_iters"] = *opt.iters;
  TrainConfig tc;
  try {
    tc = t.get<TrainConfig>();
    tc.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad train config: ") + e.what());
  }
  cfg["train"] = tc;
  cfg["seed"] = tc.seed;
  return tc;
}

}  // namespace

int cmd_train(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  const TrainConfig tc = train_config_of(opt, cfg);
  cfg["data"] = data_specs(opt, cfg, "data");
  const fs::path out = out_dir_of(cfg, "runs/train");

  Manifest manifest;
  manifest.add_input(opt.config_path);
  const Dataset data = load_data(cfg.at("data"), manifest);
  manifest.write(opt, cfg, out, tc.seed);
  std::cout << "training on " << data.size() << " frames for " << tc.n_iters << " iterations\n";
  const TrainResult r = train(data, tc, out, opt.quiet ? nullptr : &std::cout);
  std::cout << "smoothed L_tot " << r.initial_smoothed << " -> " << r.final_smoothed << '\n';
  std::cout << "checkpoint " << r.checkpoint.string() << '\n';
  return 0;
}

int cmd_ablate(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  const TrainConfig tc = train_config_of(opt, cfg);
  cfg["train_data"] = data_specs(opt, cfg, "train_data");
  cfg["eval_data"] = cfg.contains("eval_data") ? data_specs(CommonOptions{}, cfg, "eval_data")
                                               : cfg["train_data"];
  if (opt.iou_min) cfg["iou_min"] = *opt.iou_min;
  const double iou_min = cfg.value("iou_min", 0.7);
  cfg["iou_min"] = iou_min;
  const fs::path out = out_dir_of(cfg, "runs/ablate");

  Manifest manifest;
  manifest.add_input(opt.config_path);
  const Dataset train_data = load_data(cfg.at("train_data"), manifest);
  const Dataset eval_data = load_data(cfg.at("eval_data"), manifest);
  manifest.write(opt, cfg, out, tc.seed);

  const AblationReport report = ablate(train_data, eval_data, tc, out, decode_params(cfg), iou_min,
                                       opt.quiet ? nullptr : &std::cout);
  std::cout << "\n" << std::left << std::setw(22) << "variant" << std::setw(11) << "attention"
            << std::setw(11) << "multitask" << "mAP@" << iou_min << "  smoothed L_tot\n";
  for (const AblationRow& row : report.rows) {
    std::cout << std::left << std::setw(22) << row.variant.name << std::setw(11)
              << (row.variant.attention ? "yes" : "no") << std::setw(11)
              << (row.variant.multitask ? "yes" : "no") << fmt4(row.map) << "    "
              << row.initial_smoothed << " -> " << row.final_smoothed << '\n';
  }
  std::cout << "report " << (out / "ablation.json").string() << ", "
            << (out / "pr_curves.csv").string() << '\n';
  return 0;
}

int cmd_detect(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  if (opt.checkpoint) cfg["checkpoint"] = opt.checkpoint->string();
  if (!cfg.contains("checkpoint")) throw UsageError("config is missing 'checkpoint'");
  cfg["data"] = data_specs(opt, cfg, "data");
  const fs::path out = out_dir_of(cfg, "runs/detect");
  const fs::path ckpt = cfg.at("checkpoint").get<std::string>();

  Manifest manifest;
  manifest.add_input(opt.config_path);
  manifest.add_input(ckpt);
  const Dataset data = load_data(cfg.at("data"), manifest);
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  const std::vector<FrameDetections> dets =
      detect_dataset(loaded.model, data, decode_params(cfg));
  fs::create_directories(out);
  write_json_file(out / "detections.json", detections_to_json(dets));
  std::size_t total = 0;
  for (const FrameDetections& f : dets) total += f.detections.size();
  std::cout << "wrote " << dets.size() << " frame records, " << total << " detections to "
            << (out / "detections.json").string() << '\n';
  manifest.write(opt, cfg, out, seed_of(cfg));
  return 0;
}

int cmd_eval_det(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  if (opt.detections) cfg["detections"] = opt.detections->string();
  if (opt.iou_min) cfg["iou_min"] = *opt.iou_min;
  if (!cfg.contains("detections")) throw UsageError("config is missing 'detections'");
  cfg["data"] = data_specs(opt, cfg, "data");
  const double iou_min = cfg.value("iou_min", 0.7);
  cfg["iou_min"] = iou_min;
  const ApMode mode = ap_mode_of(cfg);
  const fs::path out = out_dir_of(cfg, "runs/eval_det");
  const fs::path det_path = cfg.at("detections").get<std::string>();

  Manifest manifest;
  manifest.add_input(opt.config_path);
  manifest.add_input(det_path);
  const Dataset data = load_data(cfg.at("data"), manifest);
  const std::vector<FrameDetections> dets = detections_from_json(read_json_file(det_path));
  const std::vector<FrameTruth> truth = dataset_truth(data);
  const MapResult result = mean_average_precision(dets, truth, iou_min, mode);

  json per_class = json::object();
  std::vector<std::pair<std::string, PRCurve>> curves;
  for (const auto& [cls, curve] : result.per_class) {
    per_class[std::to_string(cls)] = {{"ap", curve.ap}, {"n_gt", curve.n_gt}};
    curves.emplace_back("class " + std::to_string(cls), curve);
    std::cout << "class " << cls << " AP " << fmt4(curve.ap) << " (" << curve.n_gt << " gt)\n";
  }
  std::cout << "mAP " << fmt4(result.map) << " at IoU >= " << iou_min << '\n';
  fs::create_directories(out);
  write_json_file(out / "det_metrics.json",
                  {{"map", result.map}, {"iou_min", iou_min}, {"per_class", per_class}});
  write_pr_csv(out / "pr_curves.csv", curves);
  render_pr_plot(out / "pr_curves.png", curves);
  manifest.write(opt, cfg, out, seed_of(cfg));
  return 0;
}

int cmd_eval_seg(const CommonOptions& opt) {
  json cfg = load_config(opt.config_path);
  apply_common(opt, cfg);
  if (opt.checkpoint) cfg["checkpoint"] = opt.checkpoint->string();
  if (!cfg.contains("checkpoint")) throw UsageError("config is missing 'checkpoint'");
  cfg["data"] = data_specs(opt, cfg, "data");
  const double thresh = cfg.value("thresh", 0.5);
  if (!(thresh > 0.0 && thresh < 1.0)) throw UsageError("thresh must lie in (0, 1)");
  cfg["thresh"] = thresh;
  const fs::path out = out_dir_of(cfg, "runs/eval_seg");
  const fs::path ckpt = cfg.at("checkpoint").get<std::string>();

  Manifest manifest;
  manifest.add_input(opt.config_path);
  manifest.add_input(ckpt);
  const Dataset data = load_data(cfg.at("data"), manifest);
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  if (!loaded.model.config().multitask_enabled) {
    throw InvalidArgument("checkpoint has no trained segmentation head (multitask disabled)");
  }
  const DecodeParams dp = decode_params(cfg);

  double sum_f = 0.0;
  int n = 0;
  json frames = json::array();
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    if (!s.oracle_mask) throw InvalidArgument("sample " + std::to_string(i) + " has no gt mask");
    const NetworkOutput o = loaded.model.forward(s.image);
    const Shape& sh = o.attention.shape();
    ProbabilityMap att(sh.h, sh.w);
    std::copy(o.attention.raw(), o.attention.raw() + sh.plane(), att.values.begin());
    const std::vector<Detection> dets = decode_output(o, dp, s.image.shape().h, s.image.shape().w);
    const FMeasure fm = f_measure(binarize_and_mask(att, dets, thresh), *s.oracle_mask);
    frames.push_back({{"frame", i}, {"precision", fm.precision}, {"recall", fm.recall},
                      {"f", fm.f}});
    sum_f += fm.f;
    ++n;
  }
  const double mean_f = n == 0 ? 0.0 : sum_f / n;
  std::cout << "average F-measure " << fmt4(mean_f) << " over " << n << " frames\n";
  fs::create_directories(out);
  write_json_file(out / "seg_metrics.json",
                  {{"average_f", mean_f}, {"thresh", thresh}, {"frames", frames}});
  manifest.write(opt, cfg, out, seed_of(cfg));
  return 0;
}

}  // namespace spotnet::cli
