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

#ifndef SPOTNET_RUNTIME_HPP_
#define SPOTNET_RUNTIME_HPP_

#include <optional>

namespace spotnet {

/// Caps worker threads used by the numeric and image backends.
void set_num_threads(int n);

/// Parsed SPOTNET_NUM_THREADS; nullopt when unset. Throws InvalidArgument on
/// a value that is not a positive integer.
std::optional<int> num_threads_from_env();

}  // namespace spotnet

#endif  // SPOTNET_RUNTIME_HPP_
