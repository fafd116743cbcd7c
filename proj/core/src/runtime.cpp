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

#include "spotnet/runtime.hpp"

#include <cstdlib>
#include <string>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "spotnet/types.hpp"

namespace spotnet {

void set_num_threads(int n) {
  if (n < 1) throw InvalidArgument("thread count must be >= 1");
  cv::setNumThreads(n);
  Eigen::setNbThreads(n);
}

std::optional<int> num_threads_from_env() {
  const char* raw = std::getenv("SPOTNET_NUM_THREADS");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(raw, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != std::string(raw).size() || n < 1) {
    throw InvalidArgument(std::string("SPOTNET_NUM_THREADS must be a positive integer, got '") +
                          raw + "'");
  }
  return n;
}

}  // namespace spotnet
