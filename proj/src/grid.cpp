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
#include <set>

#include <fmt/core.h>

#include "ets/error.hpp"
#include "ets/kv_file.hpp"
#include "ets/search.hpp"

namespace ets {
namespace {

constexpr std::string_view kSeedAxis = "seed";

uint64_t ParseSeedValue(const std::string& v) {
  std::size_t used = 0;
  try {
    if (!v.empty() && v[0] != '-') {
      const unsigned long long s = std::stoull(v, &used);
      if (used == v.size()) return s;
    }
  } catch (const std::exception&) {
  }
  throw ArgumentError(
      fmt::format("seed axis value '{}' is not a non-negative integer", v));
}

}  // namespace

std::size_t ParamGrid::size() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

void ParamGrid::Validate() const {
  if (axes.empty()) throw ArgumentError("grid declares no axes");
  std::set<std::string> seen;
  for (const auto& a : axes) {
    if (a.name.empty()) throw ArgumentError("grid axis with an empty name");
    if (a.name.rfind("ets.", 0) == 0) {
      throw ArgumentError(
          fmt::format("grid axis name '{}' uses the reserved 'ets.' prefix",
                      a.name));
    }
    if (!seen.insert(a.name).second) {
      throw ArgumentError(fmt::format("duplicate grid axis '{}'", a.name));
    }
    if (a.values.empty()) {
      throw ArgumentError(fmt::format("grid axis '{}' is empty", a.name));
    }
    std::set<std::string> vals;
    for (const auto& v : a.values) {
      if (v.empty()) {
        throw ArgumentError(
            fmt::format("grid axis '{}' has an empty value", a.name));
      }
      if (!vals.insert(v).second) {
        throw ArgumentError(fmt::format(
            "grid axis '{}' repeats value '{}'", a.name, v));
      }
    }
    if (a.name == kSeedAxis) {
      for (const auto& v : a.values) ParseSeedValue(v);
    }
  }
}

ParamGrid ParseGrid(std::string_view text) {
  const KvDocument doc = ParseKv(text);
  ParamGrid grid;
  for (const auto& section : doc.sections) {
    if (!section.name.empty()) {
      throw ArgumentError(fmt::format(
          "grid file: sections are not supported (line {})", section.line));
    }
    for (const auto& [name, list] : section.entries) {
      GridAxis axis{name, {}};
      axis.values = SplitList(list);
      grid.axes.push_back(std::move(axis));
    }
  }
  grid.Validate();
  return grid;
}

ParamGrid ReadGrid(const std::filesystem::path& path) {
  return ParseGrid(ReadTextFile(path));
}

std::string SerializeGrid(const ParamGrid& grid) {
  std::string out;
  for (const auto& a : grid.axes) {
    out += a.name + " = ";
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (i) out += ", ";
      out += a.values[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<TrialConfig> EnumerateGrid(const ParamGrid& grid,
                                       uint64_t master_seed) {
  grid.Validate();
  const std::size_t n = grid.size();
  std::vector<TrialConfig> trials;
  trials.reserve(n);
  std::vector<std::size_t> idx(grid.axes.size(), 0);
  for (std::size_t rank = 0; rank < n; ++rank) {
    TrialConfig t;
    t.trial_id = static_cast<int64_t>(rank);
    t.seed = master_seed;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      const auto& axis = grid.axes[a];
      const std::string& v = axis.values[idx[a]];
      t.assignment.emplace_back(axis.name, v);
      if (axis.name == kSeedAxis) t.seed = ParseSeedValue(v);
    }
    trials.push_back(std::move(t));
    // Odometer step, last axis fastest.
    for (std::size_t a = grid.axes.size(); a-- > 0;) {
      if (++idx[a] < grid.axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  return trials;
}

}  // namespace ets
