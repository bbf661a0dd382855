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
#ifndef ETS_SEARCH_HPP_
#define ETS_SEARCH_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ets/dataset.hpp"
#include "ets/error.hpp"
#include "ets/eval.hpp"
#include "ets/runner.hpp"

namespace ets {

// ---------------------------------------------------------------------------
// Parameter grid.

struct GridAxis {
  std::string name;
  std::vector<std::string> values;

  friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

struct ParamGrid {
  std::vector<GridAxis> axes;

  // Product of the axis sizes.
  std::size_t size() const;
  // Throws ArgumentError on an empty axis or a duplicate/reserved name.
  void Validate() const;

  friend bool operator==(const ParamGrid&, const ParamGrid&) = default;
};

// One axis per line: `name = v1, v2, v3`. Declaration order is kept.
ParamGrid ParseGrid(std::string_view text);
ParamGrid ReadGrid(const std::filesystem::path& path);
std::string SerializeGrid(const ParamGrid& grid);

// Cartesian product, last axis varying fastest. trial_id is the rank in
// this order. A `seed` axis, when present, sets each trial's seed;
// otherwise every trial uses `master_seed`.
std::vector<TrialConfig> EnumerateGrid(const ParamGrid& grid,
                                       uint64_t master_seed);

// ---------------------------------------------------------------------------
// Ledger.

enum class TrialStatus { kSucceeded, kFailed, kSkipped };

std::string_view TrialStatusName(TrialStatus status);

struct TrialResult {
  TrialConfig config;
  TrialStatus status = TrialStatus::kSkipped;
  std::optional<double> val_map;
  std::optional<double> val_map50;
  double wall_time = 0;
  // Relative to the search workdir.
  std::string predictions_path;
  std::string message;
  std::string started_at;

  int64_t trial_id() const { return config.trial_id; }
};

struct LedgerHeader {
  ParamGrid grid;
  std::string grid_digest;
  std::string episode_digest;
  std::string valset_digest;
  uint64_t master_seed = 0;
  TrainerCommand trainer;
  int patience = 0;
  // Absolute locations used by `final`; not part of the canonical form.
  std::string episode_path;
  std::string valset_path;
  std::string images_dir;
  std::string workdir;
  std::string coarse_map_path;
  std::string created_at;
};

struct FinalRecord {
  int64_t trial_id = 0;
  std::string testset_digest;
  double test_map = 0;
  std::optional<double> test_map50;
  std::string predictions_path;
  std::string finished_at;
};

struct Ledger {
  LedgerHeader header;
  // In append (completion) order.
  std::vector<TrialResult> results;
  std::optional<FinalRecord> final_record;

  // Header digests plus trials sorted by id, without timestamps, wall
  // times or absolute paths. Identical inputs give identical bytes.
  std::string CanonicalText() const;

  // Throws ValidationError on duplicate trial ids.
  void Validate() const;
};

Ledger ParseLedger(std::string_view jsonl);
Ledger ReadLedger(const std::filesystem::path& path);

// Append-only JSONL writer; safe to call from several threads.
class LedgerWriter {
 public:
  // Truncates `path` and writes the header line.
  LedgerWriter(const std::filesystem::path& path, const LedgerHeader& header);

  void Append(const TrialResult& result);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Appends a final-evaluation line to an existing ledger file.
void AppendFinalRecord(const std::filesystem::path& path,
                       const FinalRecord& record);

std::string TrialResultJson(const TrialResult& result);

// Raised when no trial succeeded; carries everything that was recorded.
class SearchFailure : public Error {
 public:
  SearchFailure(const std::string& what, Ledger ledger)
      : Error(what), ledger_(std::move(ledger)) {}
  const Ledger& ledger() const { return ledger_; }

 private:
  Ledger ledger_;
};

// Highest val_map among succeeded trials, ties to the smallest trial_id.
// Throws SearchFailure when nothing succeeded.
const TrialResult& SelectBest(const Ledger& ledger);

// ---------------------------------------------------------------------------
// Search driver.

struct EarlyStopPolicy {
  // Stop dispatching after this many consecutive completed trials without
  // a strict improvement of the best val_map. 0 disables.
  int patience = 0;
};

struct SearchOptions {
  std::filesystem::path workdir;
  std::filesystem::path images_dir;
  int parallelism = 1;
  EarlyStopPolicy early_stop;
  uint64_t master_seed = 0;
  // Relabels trainer output to the validation set's coarse ids when set.
  std::optional<CoarseLabelMap> coarse;
  std::string coarse_map_path;
  EvalOptions eval;
};

struct SearchOutcome {
  TrialConfig best;
  Ledger ledger;
  std::filesystem::path ledger_path;
};

// Dispatches every grid point through the trainer, scores each on `valset`
// and writes `workdir`/ledger.jsonl. Failed trials are recorded and the
// search carries on.
SearchOutcome RunSearch(const ParamGrid& grid, const TrainerCommand& trainer,
                        const DetDataset& episode, const DetDataset& valset,
                        const SearchOptions& options);

struct FinalOutcome {
  TrialConfig best;
  EvalResult result;
  FinalRecord record;
};

// Re-runs the trainer once with the selected trial against `testset`,
// evaluates it and appends the result to the ledger at `ledger_path`.
FinalOutcome FinalEvaluation(const std::filesystem::path& ledger_path,
                             const DetDataset& testset,
                             const EvalOptions& eval = {});

}  // namespace ets

#endif  // ETS_SEARCH_HPP_
