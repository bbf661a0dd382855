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
#include <algorithm>
#include <set>

#include <fmt/core.h>
#include <json.hpp>

#include "ets/error.hpp"
#include "ets/kv_file.hpp"
#include "ets/search.hpp"

namespace ets {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json OptNumber(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> ReadOptNumber(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

ordered_json GridJson(const ParamGrid& grid) {
  ordered_json axes = ordered_json::array();
  for (const auto& a : grid.axes) {
    axes.push_back({{"name", a.name}, {"values", a.values}});
  }
  return axes;
}

ParamGrid GridFromJson(const ordered_json& j) {
  ParamGrid grid;
  for (const auto& a : j) {
    grid.axes.push_back(GridAxis{a.at("name").get<std::string>(),
                                 a.at("values").get<std::vector<std::string>>()});
  }
  return grid;
}

ordered_json AssignmentJson(const TrialConfig& c) {
  ordered_json out = ordered_json::array();
  for (const auto& [k, v] : c.assignment) out.push_back({k, v});
  return out;
}

ordered_json TrainerJson(const TrainerCommand& t) {
  return {{"command", t.command_template},
          {"timeout", t.timeout_seconds},
          {"deterministic", t.declares_deterministic}};
}

TrialStatus StatusFromName(const std::string& s) {
  if (s == "succeeded") return TrialStatus::kSucceeded;
  if (s == "failed") return TrialStatus::kFailed;
  if (s == "skipped") return TrialStatus::kSkipped;
  throw ParseError(fmt::format("unknown trial status '{}'", s), 0);
}

// Fields shared by the on-disk record and the canonical form.
ordered_json TrialCore(const TrialResult& r) {
  return {{"trial_id", r.trial_id()},
          {"assignment", AssignmentJson(r.config)},
          {"seed", r.config.seed},
          {"status", TrialStatusName(r.status)},
          {"val_map", OptNumber(r.val_map)},
          {"val_map50", OptNumber(r.val_map50)},
          {"predictions_path", r.predictions_path},
          {"message", r.message}};
}

ordered_json TrialJson(const TrialResult& r) {
  ordered_json j = {{"type", "trial"}};
  const ordered_json core = TrialCore(r);
  for (const auto& [k, v] : core.items()) j[k] = v;
  j["wall_time"] = r.wall_time;
  j["started_at"] = r.started_at;
  return j;
}

TrialResult TrialFromJson(const ordered_json& j) {
  TrialResult r;
  r.config.trial_id = j.at("trial_id").get<int64_t>();
  for (const auto& kv : j.at("assignment")) {
    r.config.assignment.emplace_back(kv.at(0).get<std::string>(),
                                     kv.at(1).get<std::string>());
  }
  r.config.seed = j.at("seed").get<uint64_t>();
  r.status = StatusFromName(j.at("status").get<std::string>());
  r.val_map = ReadOptNumber(j, "val_map");
  r.val_map50 = ReadOptNumber(j, "val_map50");
  r.wall_time = j.value("wall_time", 0.0);
  r.predictions_path = j.value("predictions_path", "");
  r.message = j.value("message", "");
  r.started_at = j.value("started_at", "");
  return r;
}

ordered_json HeaderJson(const LedgerHeader& h) {
  return {{"type", "header"},
          {"grid", GridJson(h.grid)},
          {"grid_digest", h.grid_digest},
          {"episode_digest", h.episode_digest},
          {"valset_digest", h.valset_digest},
          {"master_seed", h.master_seed},
          {"trainer", TrainerJson(h.trainer)},
          {"patience", h.patience},
          {"episode_path", h.episode_path},
          {"valset_path", h.valset_path},
          {"images_dir", h.images_dir},
          {"workdir", h.workdir},
          {"coarse_map_path", h.coarse_map_path},
          {"created_at", h.created_at}};
}

LedgerHeader HeaderFromJson(const ordered_json& j) {
  LedgerHeader h;
  h.grid = GridFromJson(j.at("grid"));
  h.grid_digest = j.at("grid_digest").get<std::string>();
  h.episode_digest = j.at("episode_digest").get<std::string>();
  h.valset_digest = j.at("valset_digest").get<std::string>();
  h.master_seed = j.at("master_seed").get<uint64_t>();
  const auto& t = j.at("trainer");
  h.trainer.command_template = t.at("command").get<std::string>();
  h.trainer.timeout_seconds = t.at("timeout").get<double>();
  h.trainer.declares_deterministic = t.at("deterministic").get<bool>();
  h.patience = j.value("patience", 0);
  h.episode_path = j.value("episode_path", "");
  h.valset_path = j.value("valset_path", "");
  h.images_dir = j.value("images_dir", "");
  h.workdir = j.value("workdir", "");
  h.coarse_map_path = j.value("coarse_map_path", "");
  h.created_at = j.value("created_at", "");
  return h;
}

ordered_json FinalCore(const FinalRecord& f) {
  return {{"trial_id", f.trial_id},
          {"testset_digest", f.testset_digest},
          {"test_map", f.test_map},
          {"test_map50", OptNumber(f.test_map50)},
          {"predictions_path", f.predictions_path}};
}

ordered_json FinalJson(const FinalRecord& f) {
  ordered_json j = {{"type", "final"}};
  const ordered_json core = FinalCore(f);
  for (const auto& [k, v] : core.items()) j[k] = v;
  j["finished_at"] = f.finished_at;
  return j;
}

FinalRecord FinalFromJson(const ordered_json& j) {
  FinalRecord f;
  f.trial_id = j.at("trial_id").get<int64_t>();
  f.testset_digest = j.at("testset_digest").get<std::string>();
  f.test_map = j.at("test_map").get<double>();
  f.test_map50 = ReadOptNumber(j, "test_map50");
  f.predictions_path = j.value("predictions_path", "");
  f.finished_at = j.value("finished_at", "");
  return f;
}

}  // namespace

std::string_view TrialStatusName(TrialStatus status) {
  switch (status) {
    case TrialStatus::kSucceeded: return "succeeded";
    case TrialStatus::kFailed: return "failed";
    case TrialStatus::kSkipped: return "skipped";
  }
  return "failed";
}

std::string TrialResultJson(const TrialResult& result) {
  return TrialJson(result).dump();
}

std::string Ledger::CanonicalText() const {
  ordered_json head = {{"grid", GridJson(header.grid)},
                       {"grid_digest", header.grid_digest},
                       {"episode_digest", header.episode_digest},
                       {"valset_digest", header.valset_digest},
                       {"master_seed", header.master_seed},
                       {"trainer", TrainerJson(header.trainer)},
                       {"patience", header.patience}};
  std::string out = head.dump() + "\n";

  std::vector<const TrialResult*> sorted;
  for (const auto& r : results) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TrialResult* a, const TrialResult* b) {
                     return a->trial_id() < b->trial_id();
                   });
  for (const TrialResult* r : sorted) out += TrialCore(*r).dump() + "\n";
  if (final_record) out += FinalCore(*final_record).dump() + "\n";
  return out;
}

void Ledger::Validate() const {
  std::set<int64_t> ids;
  for (const auto& r : results) {
    if (!ids.insert(r.trial_id()).second) {
      throw ValidationError(
          fmt::format("ledger lists trial {} more than once", r.trial_id()));
    }
    if (r.status == TrialStatus::kSucceeded && !r.val_map) {
      throw ValidationError(fmt::format(
          "ledger trial {} succeeded without a val_map", r.trial_id()));
    }
    if (r.status == TrialStatus::kFailed && r.message.empty()) {
      throw ValidationError(fmt::format(
          "ledger trial {} failed without a message", r.trial_id()));
    }
  }
}

Ledger ParseLedger(std::string_view jsonl) {
  Ledger ledger;
  bool have_header = false;
  std::size_t offset = 0;
  while (offset < jsonl.size()) {
    const auto nl = jsonl.find('\n', offset);
    const std::size_t end = nl == std::string_view::npos ? jsonl.size() : nl;
    const std::string_view line = jsonl.substr(offset, end - offset);
    const std::size_t line_offset = offset;
    offset = end + 1;
    if (Trim(line).empty()) continue;

    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(fmt::format("ledger: {}", e.what()),
                       line_offset + (e.byte > 0 ? e.byte - 1 : 0));
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw ParseError("ledger: second header", line_offset);
        ledger.header = HeaderFromJson(j);
        have_header = true;
      } else if (!have_header) {
        throw ParseError("ledger: first record is not a header", line_offset);
      } else if (type == "trial") {
        ledger.results.push_back(TrialFromJson(j));
      } else if (type == "final") {
        ledger.final_record = FinalFromJson(j);
      } else {
        throw ParseError(fmt::format("ledger: unknown record type '{}'", type),
                         line_offset);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("ledger: malformed record: {}", e.what()),
                       line_offset);
    }
  }
  if (!have_header) throw ParseError("ledger: missing header", 0);
  ledger.Validate();
  return ledger;
}

Ledger ReadLedger(const std::filesystem::path& path) {
  return ParseLedger(ReadTextFile(path));
}

LedgerWriter::LedgerWriter(const std::filesystem::path& path,
                           const LedgerHeader& header) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(fmt::format("cannot write '{}'", path.string()));
  out_ << HeaderJson(header).dump() << '\n';
  out_.flush();
}

void LedgerWriter::Append(const TrialResult& result) {
  const std::string line = TrialJson(result).dump();
  std::lock_guard<std::mutex> lock(mu_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error("ledger append failed");
}

void AppendFinalRecord(const std::filesystem::path& path,
                       const FinalRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(fmt::format("cannot append to '{}'", path.string()));
  out << FinalJson(record).dump() << '\n';
  if (!out) throw Error(fmt::format("short write to '{}'", path.string()));
}

const TrialResult& SelectBest(const Ledger& ledger) {
  const TrialResult* best = nullptr;
  for (const auto& r : ledger.results) {
    if (r.status != TrialStatus::kSucceeded || !r.val_map) continue;
    if (best == nullptr || *r.val_map > *best->val_map ||
        (*r.val_map == *best->val_map && r.trial_id() < best->trial_id())) {
      best = &r;
    }
  }
  if (best == nullptr) {
    throw SearchFailure(
        fmt::format("no succeeded trial among {} recorded",
                    ledger.results.size()),
        ledger);
  }
  return *best;
}

}  // namespace ets
