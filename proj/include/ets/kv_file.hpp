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
#ifndef ETS_KV_FILE_HPP_
#define ETS_KV_FILE_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ets {

// Flat `key = value` text, one entry per line. `#` starts a comment line and
// `[name]` opens a new section. Entries before the first header belong to an
// unnamed section. Order of sections and entries is preserved.
struct KvSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
  int line = 0;

  std::optional<std::string> Find(std::string_view key) const;
  std::string GetOr(std::string_view key, std::string fallback) const;
  double GetDouble(std::string_view key, double fallback) const;
  long long GetInt(std::string_view key, long long fallback) const;
  bool GetBool(std::string_view key, bool fallback) const;
};

struct KvDocument {
  std::vector<KvSection> sections;

  // The unnamed leading section, or an empty one.
  const KvSection& Root() const;
};

KvDocument ParseKv(std::string_view text);
KvDocument ReadKvFile(const std::filesystem::path& path);

std::string Trim(std::string_view s);
std::vector<std::string> SplitList(std::string_view s, char sep = ',');

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);

}  // namespace ets

#endif  // ETS_KV_FILE_HPP_
