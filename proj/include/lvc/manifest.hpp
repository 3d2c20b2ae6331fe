// Copyright 2026 The LVC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef LVC_MANIFEST_HPP_
#define LVC_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace lvc {

// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
// Throws IoError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

// Reproducibility record of one run: the canonical (compact, key-sorted)
// effective configuration is hashed, and every artifact is checksummed.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::optional<std::uint64_t> seed;
  std::vector<std::filesystem::path> artifacts;

  // Artifact paths are recorded relative to `base` when they lie below it.
  nlohmann::json to_json(const std::filesystem::path& base) const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace lvc

#endif  // LVC_MANIFEST_HPP_
