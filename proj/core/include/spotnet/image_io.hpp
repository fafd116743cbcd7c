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

#ifndef SPOTNET_IMAGE_IO_HPP_
#define SPOTNET_IMAGE_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "spotnet/tensor.hpp"
#include "spotnet/types.hpp"

namespace spotnet {

/// Lossless PNG encode/decode. Gray or RGB.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Masks are stored as single-channel PNG with values {0, 255}.
void write_mask_png(const std::filesystem::path& path, const SegMask& mask);
SegMask read_mask_png(const std::filesystem::path& path);

/// Git blob hash ("blob <len>\0<bytes>" through SHA-1), lowercase hex.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

/// 1xCxHxW tensor with values in [0, 1].
Tensor image_to_tensor(const Image& image);

/// Frame file name helpers, e.g. frame_000012.png.
std::string indexed_name(std::string_view prefix, int index, std::string_view ext = ".png");

}  // namespace spotnet

#endif  // SPOTNET_IMAGE_IO_HPP_
