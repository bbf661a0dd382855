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
#include "ets/runner.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "ets/error.hpp"
#include "ets/kv_file.hpp"

extern char** environ;

namespace ets {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kTrialIdKey = "ets.trial_id";
constexpr std::string_view kSeedKey = "ets.seed";

struct ProcessOutcome {
  int exit_status = -1;
  bool timed_out = false;
  std::string spawn_error;
};

// Runs `command` through /bin/sh in its own process group with stdout and
// stderr appended to `log_path`. The whole group is killed on timeout.
ProcessOutcome RunShell(const std::string& command, const fs::path& log_path,
                        double timeout_seconds) {
  ProcessOutcome outcome;
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null",
                                   O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO,
                                   log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  std::string arg0 = "sh";
  std::string arg1 = "-c";
  std::string arg2 = command;
  std::array<char*, 4> argv = {arg0.data(), arg1.data(), arg2.data(), nullptr};

  pid_t pid = 0;
  const int rc =
      posix_spawn(&pid, "/bin/sh", &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    outcome.spawn_error = std::strerror(rc);
    return outcome;
  }

  using Clock = std::chrono::steady_clock;
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(timeout_seconds));
  auto backoff = std::chrono::milliseconds(1);
  int status = 0;
  while (true) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR) {
      outcome.spawn_error = std::strerror(errno);
      return outcome;
    }
    if (Clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      outcome.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::milliseconds(50));
  }
  if (WIFEXITED(status)) {
    outcome.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    outcome.exit_status = 128 + WTERMSIG(status);
  }
  return outcome;
}

}  // namespace

const std::string* TrialConfig::Find(std::string_view axis) const {
  for (const auto& [k, v] : assignment) {
    if (k == axis) return &v;
  }
  return nullptr;
}

std::string SerializeTrialConfig(const TrialConfig& trial) {
  std::string out = fmt::format("{} = {}\n{} = {}\n", kTrialIdKey,
                                trial.trial_id, kSeedKey, trial.seed);
  for (const auto& [k, v] : trial.assignment) {
    out += fmt::format("{} = {}\n", k, v);
  }
  return out;
}

TrialConfig ParseTrialConfig(std::string_view text) {
  const KvDocument doc = ParseKv(text);
  const KvSection& root = doc.Root();
  TrialConfig trial;
  trial.trial_id = root.GetInt(kTrialIdKey, 0);
  const std::string seed = root.GetOr(kSeedKey, "0");
  try {
    trial.seed = std::stoull(seed);
  } catch (const std::exception&) {
    throw ParseError(fmt::format("trial config: bad seed '{}'", seed), 0);
  }
  for (const auto& [k, v] : root.entries) {
    if (k == kTrialIdKey || k == kSeedKey) continue;
    trial.assignment.emplace_back(k, v);
  }
  return trial;
}

void TrainerCommand::Validate() const {
  if (command_template.find("{config}") == std::string::npos ||
      command_template.find("{out_dets}") == std::string::npos) {
    throw ArgumentError(
        "trainer command template must contain {config} and {out_dets}");
  }
  if (!(timeout_seconds > 0)) {
    throw ArgumentError(
        fmt::format("trainer timeout must be positive, got {}",
                    timeout_seconds));
  }
}

TrainerCommand ParseTrainerCommand(std::string_view text) {
  const KvDocument doc = ParseKv(text);
  const KvSection& root = doc.Root();
  TrainerCommand cmd;
  for (const auto& [k, v] : root.entries) {
    if (k != "command" && k != "timeout" && k != "deterministic") {
      throw ArgumentError(fmt::format("unknown trainer key '{}'", k));
    }
  }
  cmd.command_template = root.GetOr("command", "");
  cmd.timeout_seconds = root.GetDouble("timeout", cmd.timeout_seconds);
  cmd.declares_deterministic = root.GetBool("deterministic", false);
  cmd.Validate();
  return cmd;
}

TrainerCommand ReadTrainerCommand(const fs::path& path) {
  return ParseTrainerCommand(ReadTextFile(path));
}

std::string SubstitutePlaceholders(std::string_view tmpl,
                                   const TrainerPaths& paths) {
  const std::array<std::pair<std::string_view, const fs::path*>, 6> table = {{
      {"{config}", &paths.config},
      {"{train_ann}", &paths.train_ann},
      {"{images_dir}", &paths.images_dir},
      {"{val_ann}", &paths.val_ann},
      {"{out_dets}", &paths.out_dets},
      {"{workdir}", &paths.workdir},
  }};
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : table) {
        if (tmpl.substr(i, key.size()) == key) {
          out += value->string();
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

std::string_view RunStatusName(RunStatus status) {
  switch (status) {
    case RunStatus::kSucceeded: return "succeeded";
    case RunStatus::kFailed: return "failed";
    case RunStatus::kTimeout: return "timeout";
    case RunStatus::kBadOutput: return "bad-output";
  }
  return "failed";
}

fs::path TrialDirName(int64_t trial_id) {
  return fmt::format("trial_{:05d}", trial_id);
}

TrialRun RunTrial(const TrainerCommand& cmd, const TrialConfig& trial,
                  const TrialInputs& inputs, const fs::path& workdir) {
  cmd.Validate();
  TrialRun run;
  run.trial = trial;

  const fs::path root = fs::absolute(workdir);
  const fs::path dir = root / TrialDirName(trial.trial_id);
  fs::create_directories(dir);
  TrainerPaths paths;
  paths.config = dir / "config.txt";
  paths.train_ann = fs::absolute(inputs.train_ann);
  paths.images_dir = inputs.images_dir.empty()
                         ? fs::path()
                         : fs::absolute(inputs.images_dir);
  paths.val_ann = fs::absolute(inputs.val_ann);
  paths.out_dets = dir / "dets.json";
  paths.workdir = dir;
  run.out_dets = paths.out_dets;
  run.captured_log = dir / "trainer.log";

  // Leftovers from an earlier attempt must not pass for fresh output.
  std::error_code ignored;
  fs::remove(paths.out_dets, ignored);
  fs::remove(run.captured_log, ignored);
  WriteTextFile(paths.config, SerializeTrialConfig(trial));

  const std::string command =
      SubstitutePlaceholders(cmd.command_template, paths);
  const auto start = std::chrono::steady_clock::now();
  const ProcessOutcome proc =
      RunShell(command, run.captured_log, cmd.timeout_seconds);
  run.duration_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  run.exit_status = proc.exit_status;

  if (!proc.spawn_error.empty()) {
    run.status = RunStatus::kFailed;
    run.message = "could not launch trainer: " + proc.spawn_error;
  } else if (proc.timed_out) {
    run.status = RunStatus::kTimeout;
    run.message = fmt::format("timeout after {:.1f}s; log: {}",
                              cmd.timeout_seconds,
                              (TrialDirName(trial.trial_id) / "trainer.log")
                                  .string());
  } else if (proc.exit_status != 0) {
    run.status = RunStatus::kFailed;
    run.message = fmt::format("trainer exited with status {}; log: {}",
                              proc.exit_status,
                              (TrialDirName(trial.trial_id) / "trainer.log")
                                  .string());
  } else if (!fs::exists(paths.out_dets)) {
    run.status = RunStatus::kBadOutput;
    run.message = fmt::format(
        "trainer exited 0 but wrote no {}",
        (TrialDirName(trial.trial_id) / "dets.json").string());
  } else {
    try {
      run.detections = ReadDetections(paths.out_dets);
      run.status = RunStatus::kSucceeded;
    } catch (const Error& e) {
      run.status = RunStatus::kBadOutput;
      run.message = fmt::format("unusable detections output: {}", e.what());
    }
  }
  if (run.status != RunStatus::kSucceeded) {
    spdlog::warn("trial {}: {}", trial.trial_id, run.message);
  }
  return run;
}

TrialRun RunTrial(const TrainerCommand& cmd, const TrialConfig& trial,
                  const DetDataset& episode, const DetDataset& valset,
                  const fs::path& workdir, const fs::path& images_dir) {
  TrialInputs inputs;
  inputs.train_ann = workdir / "inputs" / "train.json";
  inputs.val_ann = workdir / "inputs" / "val.json";
  inputs.images_dir = images_dir;
  WriteCoco(inputs.train_ann, episode);
  WriteCoco(inputs.val_ann, valset);
  return RunTrial(cmd, trial, inputs, workdir);
}

}  // namespace ets
