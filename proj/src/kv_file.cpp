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
#include "ets/kv_file.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "ets/error.hpp"

namespace ets {

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> SplitList(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    const auto piece =
        s.substr(start, end == std::string_view::npos ? s.npos : end - start);
    std::string item = Trim(piece);
    if (!item.empty()) out.push_back(std::move(item));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::optional<std::string> KvSection::Find(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string KvSection::GetOr(std::string_view key, std::string fallback) const {
  auto v = Find(key);
  return v ? *v : std::move(fallback);
}

double KvSection::GetDouble(std::string_view key, double fallback) const {
  auto v = Find(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("line {}: '{}' expects a number, got '{}'",
                                 line, key, *v),
                     0);
  }
}

long long KvSection::GetInt(std::string_view key, long long fallback) const {
  auto v = Find(key);
  if (!v) return fallback;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ParseError(fmt::format("line {}: '{}' expects an integer, got '{}'",
                                 line, key, *v),
                     0);
  }
  return out;
}

bool KvSection::GetBool(std::string_view key, bool fallback) const {
  auto v = Find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ParseError(
      fmt::format("line {}: '{}' expects true/false, got '{}'", line, key, *v),
      0);
}

const KvSection& KvDocument::Root() const {
  static const KvSection kEmpty;
  if (!sections.empty() && sections.front().name.empty()) {
    return sections.front();
  }
  return kEmpty;
}

KvDocument ParseKv(std::string_view text) {
  KvDocument doc;
  std::size_t offset = 0;
  int line_no = 0;
  while (offset < text.size()) {
    const auto nl = text.find('\n', offset);
    const auto raw =
        text.substr(offset, nl == std::string_view::npos ? text.npos
                                                         : nl - offset);
    const std::size_t line_offset = offset;
    offset = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;

    const std::string line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError(fmt::format("line {}: unterminated section header",
                                     line_no),
                         line_offset);
      }
      KvSection section;
      section.name = Trim(std::string_view(line).substr(1, line.size() - 2));
      section.line = line_no;
      doc.sections.push_back(std::move(section));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(
          fmt::format("line {}: expected 'key = value', got '{}'", line_no,
                      line),
          line_offset);
    }
    std::string key = Trim(std::string_view(line).substr(0, eq));
    if (key.empty()) {
      throw ParseError(fmt::format("line {}: empty key", line_no), line_offset);
    }
    if (doc.sections.empty()) {
      doc.sections.push_back(KvSection{.name = "", .entries = {}, .line = 1});
    }
    doc.sections.back().entries.emplace_back(
        std::move(key), Trim(std::string_view(line).substr(eq + 1)));
  }
  return doc;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(fmt::format("short write to '{}'", path.string()));
}

KvDocument ReadKvFile(const std::filesystem::path& path) {
  return ParseKv(ReadTextFile(path));
}

}  // namespace ets
