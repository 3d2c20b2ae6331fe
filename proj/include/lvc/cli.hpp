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
#ifndef LVC_CLI_HPP_
#define LVC_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace lvc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Runs one `lvc` subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on usage or validation errors and 2 on I/O errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "1..5", "1,3,7" or "4". Throws ConfigError.
std::vector<unsigned long long> parse_seed_list(const std::string& spec);

}  // namespace lvc

#endif  // LVC_CLI_HPP_
