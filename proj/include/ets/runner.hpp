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
#ifndef ETS_RUNNER_HPP_
#define ETS_RUNNER_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ets/dataset.hpp"
#include "ets/eval.hpp"

namespace ets {

// One point of the search space. `assignment` holds a value for every grid
// axis, in axis order.
struct TrialConfig {
  int64_t trial_id = 0;
  std::vector<std::pair<std::string, std::string>> assignment;
  uint64_t seed = 0;

  const std::string* Find(std::string_view axis) const;

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

// Flat `key = value` lines. The reserved keys `ets.trial_id` and `ets.seed`
// come first, then every axis in order.
std::string SerializeTrialConfig(const TrialConfig& trial);
TrialConfig ParseTrialConfig(std::string_view text);

// How to launch the external trainer. The template is run through
// `/bin/sh -c` after placeholder substitution.
struct TrainerCommand {
  std::string command_template;
  double timeout_seconds = 24 * 3600.0;
  bool declares_deterministic = false;

  // Throws ArgumentError unless the template has {config} and {out_dets}
  // and the timeout is positive.
  void Validate() const;
};

// Keys: `command`, `timeout`, `deterministic`.
TrainerCommand ParseTrainerCommand(std::string_view text);
TrainerCommand ReadTrainerCommand(const std::filesystem::path& path);

// Absolute paths bound to the six placeholders.
struct TrainerPaths {
  std::filesystem::path config;
  std::filesystem::path train_ann;
  std::filesystem::path images_dir;
  std::filesystem::path val_ann;
  std::filesystem::path out_dets;
  std::filesystem::path workdir;
};

// Replaces {config} {train_ann} {images_dir} {val_ann} {out_dets} {workdir}
// and nothing else.
std::string SubstitutePlaceholders(std::string_view tmpl,
                                   const TrainerPaths& paths);

enum class RunStatus { kSucceeded, kFailed, kTimeout, kBadOutput };

std::string_view RunStatusName(RunStatus status);

struct TrialRun {
  TrialConfig trial;
  RunStatus status = RunStatus::kFailed;
  int exit_status = -1;
  std::filesystem::path out_dets;
  std::filesystem::path captured_log;
  double duration_seconds = 0;
  std::string message;
  // Parsed contents of `out_dets` when the run succeeded.
  Detections detections;
};

// Annotation files already on disk, shared by every trial of a search.
struct TrialInputs {
  std::filesystem::path train_ann;
  std::filesystem::path val_ann;
  std::filesystem::path images_dir;
};

// Runs one trial in `workdir`/trial_<id>. Never throws for trainer-side
// failures; those come back as a non-succeeded TrialRun.
TrialRun RunTrial(const TrainerCommand& cmd, const TrialConfig& trial,
                  const TrialInputs& inputs,
                  const std::filesystem::path& workdir);

// Serializes `episode` and `valset` under `workdir`/inputs first.
TrialRun RunTrial(const TrainerCommand& cmd, const TrialConfig& trial,
                  const DetDataset& episode, const DetDataset& valset,
                  const std::filesystem::path& workdir,
                  const std::filesystem::path& images_dir = {});

std::filesystem::path TrialDirName(int64_t trial_id);

// Built-in test double for a fine-tuned detector.
//
// Quality q(theta) is a product of one bump per targeted axis:
//   numeric value v, target t:  1 / (1 + ((v - t) / s)^2),  s = |t| or 1
//   other values:               1 if v == t else 0.5
// Axes without a target contribute 1. With every axis targeted at a grid
// value, the all-targets trial is the unique maximizer with q = 1.
//
// Every non-crowd ground-truth box of the evaluated set becomes one
// detection. With m = (1 - q) * noise_scale, the center moves by up to
// m * (w, h), each side is scaled by exp(+-m) and the score is
// q + (1 - q) * u. At q = 1 detections equal the ground truth at score 1.
struct SyntheticObjective {
  std::map<std::string, std::string> targets;
  double noise_scale = 1.0;

  double Quality(const TrialConfig& trial) const;
};

Detections SyntheticTrainer(const TrialConfig& trial, const DetDataset& valset,
                            uint64_t seed, const SyntheticObjective& objective);

}  // namespace ets

#endif  // ETS_RUNNER_HPP_
