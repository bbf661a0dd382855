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
#include "ets/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "ets/digest.hpp"
#include "ets/error.hpp"
#include "ets/kv_file.hpp"

namespace ets {
namespace {

namespace fs = std::filesystem;

std::string NowUtc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", tm);
}

std::string TailOfLog(const fs::path& log, std::size_t max_lines) {
  std::string text;
  try {
    text = ReadTextFile(log);
  } catch (const Error&) {
    return {};
  }
  std::size_t pos = text.size();
  std::size_t lines = 0;
  while (pos > 0 && lines <= max_lines) {
    pos = text.rfind('\n', pos - 1);
    if (pos == std::string::npos) {
      pos = 0;
      break;
    }
    ++lines;
  }
  return text.substr(pos == 0 ? 0 : pos + 1);
}

Detections RelabelDetections(const Detections& dets,
                             const CoarseLabelMap& coarse) {
  Detections out = dets;
  for (auto& d : out) d.category_id = coarse.Map(d.category_id);
  return out;
}

// Runs and scores one trial. Trainer-side problems come back as a failed
// result; only infrastructure errors escape.
TrialResult ExecuteTrial(const TrainerCommand& trainer,
                         const TrialConfig& trial, const TrialInputs& inputs,
                         const DetDataset& valset, const SearchOptions& opts) {
  TrialResult result;
  result.config = trial;
  result.started_at = NowUtc();
  const auto start = std::chrono::steady_clock::now();

  const TrialRun run = RunTrial(trainer, trial, inputs, opts.workdir);
  if (fs::exists(run.out_dets)) {
    result.predictions_path =
        (TrialDirName(trial.trial_id) / "dets.json").generic_string();
  }
  if (run.status == RunStatus::kSucceeded) {
    try {
      const Detections dets = opts.coarse
                                  ? RelabelDetections(run.detections, *opts.coarse)
                                  : run.detections;
      const EvalResult eval = Evaluate(dets, valset, opts.eval);
      result.status = TrialStatus::kSucceeded;
      result.val_map = eval.map;
      result.val_map50 = eval.MapAt(0.5);
    } catch (const Error& e) {
      result.status = TrialStatus::kFailed;
      result.message = fmt::format("{}: {}",
                                   RunStatusName(RunStatus::kBadOutput),
                                   e.what());
    }
  } else {
    result.status = TrialStatus::kFailed;
    result.message =
        fmt::format("{}: {}", RunStatusName(run.status), run.message);
  }
  result.wall_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return result;
}

}  // namespace

SearchOutcome RunSearch(const ParamGrid& grid, const TrainerCommand& trainer,
                        const DetDataset& episode, const DetDataset& valset,
                        const SearchOptions& options) {
  grid.Validate();
  trainer.Validate();
  ValidateDataset(episode);
  ValidateDataset(valset);
  if (options.parallelism < 1) {
    throw ArgumentError(fmt::format("parallelism must be >= 1, got {}",
                                    options.parallelism));
  }
  if (options.early_stop.patience < 0) {
    throw ArgumentError(fmt::format("patience must be >= 0, got {}",
                                    options.early_stop.patience));
  }
  if (options.workdir.empty()) throw ArgumentError("search needs a workdir");

  SearchOptions opts = options;
  opts.workdir = fs::absolute(options.workdir);
  fs::create_directories(opts.workdir);

  TrialInputs inputs;
  inputs.train_ann = opts.workdir / "inputs" / "train.json";
  inputs.val_ann = opts.workdir / "inputs" / "val.json";
  inputs.images_dir = opts.images_dir;
  const std::string episode_text = SerializeCoco(episode);
  const std::string valset_text = SerializeCoco(valset);
  WriteTextFile(inputs.train_ann, episode_text);
  WriteTextFile(inputs.val_ann, valset_text);

  LedgerHeader header;
  header.grid = grid;
  header.grid_digest = Sha256Hex(SerializeGrid(grid));
  header.episode_digest = Sha256Hex(episode_text);
  header.valset_digest = Sha256Hex(valset_text);
  header.master_seed = opts.master_seed;
  header.trainer = trainer;
  header.patience = opts.early_stop.patience;
  header.episode_path = inputs.train_ann.string();
  header.valset_path = inputs.val_ann.string();
  header.images_dir =
      opts.images_dir.empty() ? "" : fs::absolute(opts.images_dir).string();
  header.workdir = opts.workdir.string();
  header.coarse_map_path = opts.coarse_map_path;
  header.created_at = NowUtc();

  const fs::path ledger_path = opts.workdir / "ledger.jsonl";
  LedgerWriter writer(ledger_path, header);

  const std::vector<TrialConfig> trials = EnumerateGrid(grid, opts.master_seed);
  std::vector<TrialResult> results;
  std::vector<bool> dispatched(trials.size(), false);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  bool stop = false;
  std::optional<double> best;
  int since_improvement = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    while (true) {
      std::size_t i = 0;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (stop || failure) return;
        i = next++;
        if (i >= trials.size()) return;
        dispatched[i] = true;
      }
      try {
        TrialResult r =
            ExecuteTrial(trainer, trials[i], inputs, valset, opts);
        writer.Append(r);
        std::lock_guard<std::mutex> lock(mu);
        const bool improved =
            r.val_map && (!best || *r.val_map > *best);
        if (improved) {
          best = r.val_map;
          since_improvement = 0;
        } else {
          ++since_improvement;
        }
        const int p = opts.early_stop.patience;
        if (p > 0 && since_improvement >= p && !stop) {
          stop = true;
          spdlog::info("early stop: {} consecutive trials without improvement",
                       since_improvement);
        }
        results.push_back(std::move(r));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int n_workers =
      std::min<int>(opts.parallelism, std::max<std::size_t>(trials.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (dispatched[i]) continue;
    TrialResult r;
    r.config = trials[i];
    r.status = TrialStatus::kSkipped;
    r.message = fmt::format(
        "not run: early stop after {} trials without improvement",
        opts.early_stop.patience);
    writer.Append(r);
    results.push_back(std::move(r));
  }

  Ledger ledger{header, std::move(results), std::nullopt};
  ledger.Validate();
  const TrialResult& chosen = SelectBest(ledger);
  SearchOutcome outcome{chosen.config, std::move(ledger), ledger_path};
  return outcome;
}

FinalOutcome FinalEvaluation(const fs::path& ledger_path,
                             const DetDataset& testset,
                             const EvalOptions& eval) {
  ValidateDataset(testset);
  const Ledger ledger = ReadLedger(ledger_path);
  const TrialResult& best = SelectBest(ledger);
  const LedgerHeader& h = ledger.header;

  const fs::path workdir = h.workdir;
  TrialInputs inputs;
  inputs.train_ann = h.episode_path;
  inputs.images_dir = h.images_dir;
  // The episode must be the one the search saw.
  const std::string episode_text = ReadTextFile(inputs.train_ann);
  if (Sha256Hex(episode_text) != h.episode_digest) {
    throw IntegrityError(
        fmt::format("episode file '{}' no longer matches the ledger digest",
                    inputs.train_ann.string()),
        best.trial_id());
  }

  const fs::path final_dir = workdir / "final";
  const std::string test_text = SerializeCoco(testset);
  inputs.val_ann = final_dir / "test.json";
  WriteTextFile(inputs.val_ann, test_text);

  const TrialRun run = RunTrial(h.trainer, best.config, inputs, final_dir);
  if (run.status != RunStatus::kSucceeded) {
    std::string msg = fmt::format("final run of trial {} {}: {}",
                                  best.trial_id(), RunStatusName(run.status),
                                  run.message);
    const std::string tail = TailOfLog(run.captured_log, 20);
    if (!tail.empty()) msg += "\n--- trainer log (tail) ---\n" + tail;
    throw Error(msg);
  }

  FinalOutcome out;
  out.best = best.config;
  out.result = Evaluate(run.detections, testset, eval);
  out.record.trial_id = best.trial_id();
  out.record.testset_digest = Sha256Hex(test_text);
  out.record.test_map = out.result.map;
  out.record.test_map50 = out.result.MapAt(0.5);
  out.record.predictions_path =
      (fs::path("final") / TrialDirName(best.trial_id()) / "dets.json")
          .generic_string();
  out.record.finished_at = NowUtc();
  AppendFinalRecord(ledger_path, out.record);
  return out;
}

}  // namespace ets
