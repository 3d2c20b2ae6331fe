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
#include "lvc/json_io.hpp"

#include <cmath>
#include <fstream>

#include "lvc/errors.hpp"

namespace lvc::json_io {

using nlohmann::json;

json read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const json& j, int indent) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(indent) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

std::int64_t require_int(const json& j, const char* key, const std::string& who) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(who + ": missing field '" + key + "'");
  }
  const json& v = j[key];
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d)) return static_cast<std::int64_t>(d);
  }
  throw ParseError(who + ": field '" + key + "' must be an integer");
}

double require_number(const json& j, const char* key, const std::string& who) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(who + ": missing field '" + key + "'");
  }
  if (!j[key].is_number()) throw ParseError(who + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

Box require_box(const json& j, const char* key, const std::string& who) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(who + ": missing field '" + key + "'");
  }
  const json& b = j[key];
  if (!b.is_array() || b.size() != 4) {
    throw ParseError(who + ": '" + key + "' must be [x, y, w, h]");
  }
  for (const json& v : b) {
    if (!v.is_number()) throw ParseError(who + ": '" + key + "' entries must be numbers");
  }
  Box box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
          b[3].get<double>()};
  if (!box.valid()) {
    throw ParseError(who + ": '" + key + "' must be finite with w, h >= 0");
  }
  return box;
}

std::optional<bool> optional_bool(const json& j, const char* key,
                                  const std::string& who) {
  if (!j.is_object() || !j.contains(key)) return std::nullopt;
  if (!j[key].is_boolean()) throw ParseError(who + ": field '" + key + "' must be a boolean");
  return j[key].get<bool>();
}

}  // namespace lvc::json_io
