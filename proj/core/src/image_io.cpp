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

#include "spotnet/image_io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <sstream>

namespace spotnet {

namespace fs = std::filesystem;

void write_png(const fs::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidArgument("write_png: unsupported channel count " +
                          std::to_string(image.channels));
  }
  const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat view(image.height, image.width, type, const_cast<std::uint8_t*>(image.pixels.data()));
  // cv::Mat copies are shallow; convert into a fresh buffer so the caller's
  // pixels stay untouched.
  cv::Mat encoded;
  if (image.channels == 3) {
    cv::cvtColor(view, encoded, cv::COLOR_RGB2BGR);
  } else {
    encoded = view;
  }
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
  if (!cv::imwrite(path.string(), encoded, params)) {
    throw IoError("cannot write " + path.string());
  }
}

Image read_png(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) {
    throw IoError("cannot read " + path.string());
  }
  if (m.depth() != CV_8U || (m.channels() != 1 && m.channels() != 3)) {
    throw IoError(path.string() + ": expected 8-bit gray or RGB");
  }
  if (m.channels() == 3) {
    cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  }
  Image image(m.rows, m.cols, m.channels());
  for (int y = 0; y < m.rows; ++y) {
    std::copy_n(m.ptr<std::uint8_t>(y), static_cast<std::size_t>(m.cols) * m.channels(),
                image.pixels.begin() + static_cast<std::ptrdiff_t>(y) * m.cols * m.channels());
  }
  return image;
}

void write_mask_png(const fs::path& path, const SegMask& mask) {
  Image image(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    image.pixels[i] = mask.values[i] != 0 ? 255 : 0;
  }
  write_png(path, image);
}

SegMask read_mask_png(const fs::path& path) {
  const Image image = read_png(path);
  if (image.channels != 1) {
    throw IoError(path.string() + ": mask must be single-channel");
  }
  SegMask mask(image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    mask.values[i] = image.pixels[i] >= 128 ? 1 : 0;
  }
  return mask;
}

std::string git_blob_hash(std::string_view bytes) {
  std::string blob = "blob " + std::to_string(bytes.size()) + '\0';
  blob.append(bytes);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw IoError("sha1 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const fs::path& path) { return git_blob_hash(read_text_file(path)); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

Tensor image_to_tensor(const Image& image) {
  Tensor t(Shape{1, image.channels, image.height, image.width});
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        t.at(0, c, y, x) = static_cast<float>(image.at(y, x, c)) / 255.0f;
      }
    }
  }
  return t;
}

std::string indexed_name(std::string_view prefix, int index, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%06d", index);
  return std::string(prefix) + buf + std::string(ext);
}

}  // namespace spotnet
