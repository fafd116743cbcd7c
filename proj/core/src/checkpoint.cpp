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

#include <array>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "spotnet/net.hpp"
#include "spotnet/types.hpp"

namespace spotnet {

namespace {

// Layout (little-endian):
//   char[8]  magic "SPOTCKPT"
//   u32      format version
//   u64      header length, then UTF-8 JSON {"model": ModelConfig, "metadata": ...}
//   u32      tensor count
//   per tensor: u32 name length, name bytes, i32[4] NCHW shape, f32 data
constexpr std::array<char, 8> kMagic{'S', 'P', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError(path.string() + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Detector& model, const std::filesystem::path& path,
                     const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion);
  const std::string header = nlohmann::json{{"model", model.config()}, {"metadata", metadata}}.dump();
  put(out, static_cast<std::uint64_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto params = model.parameters();
  put(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const Shape& s = p->value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put(out, static_cast<std::int32_t>(d));
    out.write(reinterpret_cast<const char*>(p->value.raw()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(path.string() + ": not a checkpoint file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError(path.string() + ": truncated header");
  const nlohmann::json meta = nlohmann::json::parse(header);

  Detector model(meta.at("model").get<ModelConfig>());
  std::unordered_map<std::string, Parameter*> by_name;
  for (Parameter* p : model.parameters()) by_name.emplace(p->name, p);

  const auto count = get<std::uint32_t>(in, path);
  if (count != by_name.size()) {
    throw IoError(path.string() + ": expected " + std::to_string(by_name.size()) +
                  " tensors, found " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    Shape s;
    s.n = get<std::int32_t>(in, path);
    s.c = get<std::int32_t>(in, path);
    s.h = get<std::int32_t>(in, path);
    s.w = get<std::int32_t>(in, path);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError(path.string() + ": unknown tensor " + name);
    Parameter* p = it->second;
    if (p->value.shape() != s) {
      throw IoError(path.string() + ": tensor " + name + " has shape " + s.str() + ", expected " +
                    p->value.shape().str());
    }
    in.read(reinterpret_cast<char*>(p->value.raw()),
            static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!in) throw IoError(path.string() + ": truncated tensor " + name);
  }
  return LoadedCheckpoint{std::move(model), meta.value("metadata", nlohmann::json::object())};
}

}  // namespace spotnet
