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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "spotnet/runtime.hpp"

namespace {

using spotnet::cli::CommonOptions;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Sub {
  const char* name;
  const char* help;
  int (*run)(const CommonOptions&);
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spotnet: synthetic video detection with segmentation attention"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  CommonOptions opt;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string seq_dir;
  std::string mode;
  std::string checkpoint;
  std::string detections;
  int iters = 0;
  double iou_min = 0.0;

  const Sub subs[] = {
      {"gen-data", "Render synthetic sequences with ground truth", spotnet::cli::cmd_gen_data},
      {"annotate", "Semi-supervised foreground masks for a sequence", spotnet::cli::cmd_annotate},
      {"train", "Train a detector", spotnet::cli::cmd_train},
      {"ablate", "Train and evaluate the three attention/multi-task variants",
       spotnet::cli::cmd_ablate},
      {"detect", "Run a checkpoint over frames and write detections", spotnet::cli::cmd_detect},
      {"eval-det", "mAP of a detections file against ground truth", spotnet::cli::cmd_eval_det},
      {"eval-seg", "Foreground F-measure of a checkpoint", spotnet::cli::cmd_eval_seg},
  };

  std::vector<std::pair<CLI::App*, const Sub*>> registered;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config, "JSON config file (or a run manifest)")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("--quiet", opt.quiet, "Less progress output");
    const std::string name = s.name;
    if (name == "annotate") {
      sub->add_option("--seq-dir", seq_dir, "Sequence directory");
      sub->add_option("--mode", mode, "Camera mode")->check(CLI::IsMember({"fixed", "moving"}));
    }
    if (name == "train" || name == "ablate" || name == "detect" || name == "eval-det" ||
        name == "eval-seg") {
      sub->add_option("--data", opt.data_dirs, "Sequence directories (replace config data)");
    }
    if (name == "train" || name == "ablate") {
      sub->add_option("--iters", iters, "Override n_iters")->check(CLI::PositiveNumber);
    }
    if (name == "detect" || name == "eval-seg") {
      sub->add_option("--checkpoint", checkpoint, "Model checkpoint");
    }
    if (name == "eval-det") sub->add_option("--detections", detections, "Detections JSON");
    if (name == "eval-det" || name == "ablate") {
      sub->add_option("--iou-min", iou_min, "Minimum IoU for a match")->check(CLI::Range(0.0, 1.0));
    }
    registered.emplace_back(sub, &s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    for (const auto& [sub, s] : registered) {
      if (sub->parsed()) std::cerr << sub->help();
    }
    return kExitUsage;
  }

  const Sub* chosen = nullptr;
  for (const auto& [sub, s] : registered) {
    if (!sub->parsed()) continue;
    chosen = s;
    opt.command = s->name;
    opt.config_path = config;
    if (sub->count("--seed") > 0) opt.seed = seed;
    if (sub->count("--out") > 0) opt.out = out;
    if (sub->get_option_no_throw("--seq-dir") && sub->count("--seq-dir") > 0) opt.seq_dir = seq_dir;
    if (sub->get_option_no_throw("--mode") && sub->count("--mode") > 0) opt.mode = mode;
    if (sub->get_option_no_throw("--checkpoint") && sub->count("--checkpoint") > 0) {
      opt.checkpoint = checkpoint;
    }
    if (sub->get_option_no_throw("--detections") && sub->count("--detections") > 0) {
      opt.detections = detections;
    }
    if (sub->get_option_no_throw("--iters") && sub->count("--iters") > 0) opt.iters = iters;
    if (sub->get_option_no_throw("--iou-min") && sub->count("--iou-min") > 0) opt.iou_min = iou_min;
    break;
  }

  try {
    if (const auto n = spotnet::num_threads_from_env()) spotnet::set_num_threads(*n);
    return chosen->run(opt);
  } catch (const spotnet::cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    std::cerr << "usage: spotnet " << opt.command << " --config <file> [--seed N] [--out DIR]\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
