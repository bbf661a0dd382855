// Copyright 2026 The ETS Authors. All Rights Reserved.
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
#ifndef ETS_CLI_HPP_
#define ETS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ets {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsageError = 2;

// Settings shared by every subcommand, read from `--config FILE`.
//
//   master_seed = 7
//   workdir = runs/a
//   log_level = info
//   iou_thresholds = 0.5, 0.75
//   aug_spec = specs/default.txt
struct GlobalConfig {
  uint64_t master_seed = 0;
  std::filesystem::path workdir;
  std::string log_level = "warn";
  std::vector<double> iou_thresholds;
  std::filesystem::path aug_spec;
};

GlobalConfig ParseGlobalConfig(std::string_view text);

// Workdir precedence: explicit flag, config file, $ETS_WORKDIR, ./ets_work.
std::filesystem::path ResolveWorkdir(const std::optional<std::string>& flag,
                                     const GlobalConfig& config);

// Runs one `ets` invocation. `args` excludes the program name. Returns the
// process exit code: 0 ok, 1 domain error, 2 usage error.
int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);
int Dispatch(int argc, char** argv);

}  // namespace ets

#endif  // ETS_CLI_HPP_
