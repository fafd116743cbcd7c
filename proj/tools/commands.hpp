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

// Shared plumbing for the spotnet subcommands: option bag, config loading,
// data-source specs and the run manifest.

#ifndef SPOTNET_TOOLS_COMMANDS_HPP_
#define SPOTNET_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spotnet::cli {

/// Bad invocation or unusable config; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string command;
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;

  // Command specific overrides; flags win over the config file.
  std::vector<std::string> data_dirs;
  std::optional<std::filesystem::path> seq_dir;
  std::optional<std::string> mode;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> detections;
  std::optional<int> iters;
  std::optional<double> iou_min;
  bool quiet = false;
};

/// Reads the config file. A run manifest is accepted too, in which case its
/// recorded effective config is used.
nlohmann::json load_config(const std::filesystem::path& path);

int cmd_gen_data(const CommonOptions& opt);
int cmd_annotate(const CommonOptions& opt);
int cmd_train(const CommonOptions& opt);
int cmd_ablate(const CommonOptions& opt);
int cmd_detect(const CommonOptions& opt);
int cmd_eval_det(const CommonOptions& opt);
int cmd_eval_seg(const CommonOptions& opt);

}  // namespace spotnet::cli

#endif  // SPOTNET_TOOLS_COMMANDS_HPP_
