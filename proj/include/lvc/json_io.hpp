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
#ifndef LVC_JSON_IO_HPP_
#define LVC_JSON_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "lvc/geometry.hpp"

// Small helpers shared by every file reader and writer.
namespace lvc::json_io {

// IoError when the file cannot be opened, ParseError when it is not JSON.
nlohmann::json read_file(const std::filesystem::path& path);
// indent < 0 writes compact JSON. Always ends with a newline.
void write_file(const std::filesystem::path& path, const nlohmann::json& j,
                int indent = -1);

std::int64_t require_int(const nlohmann::json& j, const char* key,
                         const std::string& who);
double require_number(const nlohmann::json& j, const char* key,
                      const std::string& who);
// [x, y, w, h] with finite entries and non-negative size.
Box require_box(const nlohmann::json& j, const char* key, const std::string& who);
std::optional<bool> optional_bool(const nlohmann::json& j, const char* key,
                                  const std::string& who);

}  // namespace lvc::json_io

#endif  // LVC_JSON_IO_HPP_
