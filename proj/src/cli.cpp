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
#include "ets/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ets/augment.hpp"
#include "ets/dataset.hpp"
#include "ets/error.hpp"
#include "ets/eval.hpp"
#include "ets/image.hpp"
#include "ets/kv_file.hpp"
#include "ets/runner.hpp"
#include "ets/search.hpp"

namespace ets {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<double> ParseNumberList(std::string_view text,
                                    std::string_view what) {
  std::vector<double> out;
  for (const auto& item : SplitList(text)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument("trailing");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ArgumentError(fmt::format("{}: '{}' is not a number", what, item));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared state for one invocation.

struct Globals {
  std::string config_path;
  std::optional<std::string> workdir;
  std::optional<std::string> log_level;
  bool json = false;

  GlobalConfig config;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

void Emit(const Globals& g, Io& io, const std::string& text,
          const ordered_json& json) {
  if (g.json) {
    io.out << json.dump(2) << '\n';
  } else {
    io.out << text;
  }
}

uint64_t SeedOr(const std::optional<uint64_t>& flag, const Globals& g) {
  return flag.value_or(g.config.master_seed);
}

ordered_json CountsJson(const std::map<int64_t, int64_t>& counts) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, n] : counts) j[std::to_string(id)] = n;
  return j;
}

std::string DatasetSummaryText(const DetDataset& ds) {
  std::string out = fmt::format(
      "{} images, {} annotations, {} categories (split {})\n",
      ds.images.size(), ds.annotations.size(), ds.categories.size(),
      ds.split_tag);
  for (const auto& [id, n] : ds.CountsByCategory()) {
    const auto* c = ds.FindCategory(id);
    out += fmt::format("  {:>6}  {:<24} {:>6}\n", id,
                       c != nullptr ? c->name : "", n);
  }
  return out;
}

ordered_json DatasetSummaryJson(const DetDataset& ds) {
  return {{"images", ds.images.size()},
          {"annotations", ds.annotations.size()},
          {"categories", ds.categories.size()},
          {"split", ds.split_tag},
          {"counts", CountsJson(ds.CountsByCategory())}};
}

ordered_json AssignmentJson(const TrialConfig& t) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : t.assignment) j[k] = v;
  return j;
}

std::string AssignmentText(const TrialConfig& t) {
  std::string out;
  for (const auto& [k, v] : t.assignment) {
    if (!out.empty()) out += ' ';
    out += k + "=" + v;
  }
  return out;
}

void WriteWarnings(Io& io, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) io.err << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------
// dataset

struct IngestArgs {
  std::string in, out, split;
  bool lenient = false;
};

void RunIngest(const IngestArgs& a, const Globals& g, Io& io) {
  ParseOptions opts;
  opts.lenient = a.lenient;
  if (!a.split.empty()) opts.default_split = a.split;
  std::vector<std::string> warnings;
  DetDataset ds = ReadCoco(a.in, opts, &warnings);
  if (!a.split.empty()) ds.split_tag = a.split;
  WriteWarnings(io, warnings);
  if (!a.out.empty()) WriteCoco(a.out, ds);
  ordered_json j = DatasetSummaryJson(ds);
  j["dropped"] = warnings.size();
  Emit(g, io, DatasetSummaryText(ds), j);
}

struct EpisodeArgs {
  std::string in, out;
  int k = 0;
  std::optional<uint64_t> seed;
};

void RunEpisode(const EpisodeArgs& a, const Globals& g, Io& io) {
  const DetDataset ds = ReadCoco(a.in);
  const uint64_t seed = SeedOr(a.seed, g);
  const Episode ep = SampleKShot(ds, a.k, seed);
  WriteWarnings(io, ep.warnings);
  WriteCoco(a.out, ep.base);
  ordered_json j = DatasetSummaryJson(ep.base);
  j["k"] = a.k;
  j["seed"] = seed;
  Emit(g, io,
       fmt::format("episode k={} seed={}: ", a.k, seed) +
           DatasetSummaryText(ep.base),
       j);
}

struct ValsetArgs {
  std::string in, out, remainder_out, coarse_map;
  double rate = 0;
  bool disjoint = false;
  std::optional<uint64_t> seed;
};

void RunValset(const ValsetArgs& a, const Globals& g, Io& io) {
  const DetDataset test = ReadCoco(a.in);
  const CoarseLabelMap coarse = a.coarse_map.empty()
                                    ? CoarseLabelMap::Identity(test)
                                    : ReadCoarseMap(a.coarse_map);
  const uint64_t seed = SeedOr(a.seed, g);
  const ValidationSplit split =
      BuildValidationSet(test, a.rate, coarse, seed, a.disjoint);
  WriteWarnings(io, split.warnings);
  WriteCoco(a.out, split.val);

  ordered_json j = DatasetSummaryJson(split.val);
  if (split.remainder) {
    fs::path rem = a.remainder_out;
    if (rem.empty()) {
      const fs::path out(a.out);
      rem = out.parent_path() / (out.stem().string() + "_remainder.json");
    }
    WriteCoco(rem, *split.remainder);
    j["remainder"] = rem.string();
    j["remainder_images"] = split.remainder->images.size();
  }

  const auto counts = test.CountsByCategory();
  std::string text = fmt::format("valset rate={} seed={}{}: {} images, {} "
                                 "annotations\n",
                                 a.rate, seed, a.disjoint ? " disjoint" : "",
                                 split.val.images.size(),
                                 split.val.annotations.size());
  text += fmt::format("  {:>6}  {:>6}  {:>9}  {:>6}  {:>8}  {:>7}\n",
                      "cat_id", "n", "rate*n", "target", "selected", "present");
  ordered_json rows = ordered_json::array();
  for (const auto& [id, n] : counts) {
    const int64_t target = split.target_counts.count(id)
                               ? split.target_counts.at(id)
                               : 0;
    const int64_t selected = split.selected_counts.count(id)
                                 ? split.selected_counts.at(id)
                                 : 0;
    const int64_t present = split.present_counts.count(id)
                                ? split.present_counts.at(id)
                                : 0;
    text += fmt::format("  {:>6}  {:>6}  {:>9.2f}  {:>6}  {:>8}  {:>7}\n", id,
                        n, a.rate * n, target, selected, present);
    rows.push_back({{"category_id", id},
                    {"n", n},
                    {"expected", a.rate * static_cast<double>(n)},
                    {"target", target},
                    {"selected", selected},
                    {"present", present}});
  }
  j["rate"] = a.rate;
  j["seed"] = seed;
  j["disjoint"] = a.disjoint;
  j["per_category"] = rows;
  Emit(g, io, text, j);
}

// ---------------------------------------------------------------------------
// augment

struct PreviewArgs {
  std::string spec, ann, images, out;
  int count = 0;
  std::optional<uint64_t> seed;
};

Sample LoadSample(const DetDataset& ds, const ImageRecord& rec,
                  const fs::path& images_dir) {
  Sample s;
  s.image = ReadImage(images_dir / rec.file_name);
  const double w = s.image.width();
  const double h = s.image.height();
  for (const auto& a : ds.annotations) {
    if (a.image_id != rec.id || a.iscrowd) continue;
    // Annotations may overhang by half a pixel; clamp onto the raster.
    const double x1 = std::clamp(a.bbox.x, 0.0, w);
    const double y1 = std::clamp(a.bbox.y, 0.0, h);
    const double x2 = std::clamp(a.bbox.right(), 0.0, w);
    const double y2 = std::clamp(a.bbox.bottom(), 0.0, h);
    const BBox b = SnapBox(BBox{x1, y1, x2 - x1, y2 - y1});
    if (b.valid()) s.boxes.push_back(LabeledBox{b, a.category_id});
  }
  return s;
}

void RunPreview(const PreviewArgs& a, const Globals& g, Io& io) {
  AugPipelineSpec spec;
  if (!a.spec.empty()) {
    spec = ReadPipelineSpec(a.spec);
  } else if (!g.config.aug_spec.empty()) {
    spec = ReadPipelineSpec(g.config.aug_spec);
  } else {
    spec = AugPipelineSpec::Default();
  }
  spec.Validate();
  const DetDataset ds = ReadCoco(a.ann);
  const uint64_t seed = SeedOr(a.seed, g);
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);

  std::size_t n = ds.images.size();
  if (a.count > 0) n = std::min<std::size_t>(n, a.count);
  SampleCache cache(spec.cache_capacity);
  ordered_json sidecar = ordered_json::array();
  std::map<std::string, int> fired;
  for (std::size_t i = 0; i < n; ++i) {
    const ImageRecord& rec = ds.images[i];
    const Sample s = LoadSample(ds, rec, a.images);
    const PipelineResult r = ApplyPipeline(s, spec, cache, seed, i);
    const std::string file = fmt::format("{:05d}.png", i);
    WritePng(out_dir / file, r.sample.image);

    ordered_json ops = ordered_json::array();
    for (std::size_t k = 0; k < spec.ops.size(); ++k) {
      const char* state = r.outcomes[k] == OpOutcome::kFired     ? "fired"
                          : r.outcomes[k] == OpOutcome::kSkipped ? "skipped"
                                                                 : "off";
      const std::string name(AugKindName(spec.ops[k].kind));
      if (r.outcomes[k] == OpOutcome::kFired) ++fired[name];
      ops.push_back({{"op", name}, {"state", state}});
    }
    ordered_json boxes = ordered_json::array();
    for (const auto& b : r.sample.boxes) {
      boxes.push_back({{"category_id", b.category_id},
                       {"bbox", {b.box.x, b.box.y, b.box.w, b.box.h}}});
    }
    sidecar.push_back({{"index", i},
                       {"source_image_id", rec.id},
                       {"source_file", rec.file_name},
                       {"file", file},
                       {"width", r.sample.image.width()},
                       {"height", r.sample.image.height()},
                       {"ops", ops},
                       {"boxes", boxes}});
  }
  WriteTextFile(out_dir / "boxes.json", sidecar.dump(1) + "\n");
  WriteTextFile(out_dir / "spec.txt", SerializePipelineSpec(spec));

  std::string text = fmt::format("wrote {} previews to {}\n", n, a.out);
  ordered_json counts = ordered_json::object();
  for (const auto& op : spec.ops) {
    const std::string name(AugKindName(op.kind));
    text += fmt::format("  {:<8} p={:.2f} fired {}\n", name, op.probability,
                        fired[name]);
    counts[name] = fired[name];
  }
  Emit(g, io, text,
       {{"images", n}, {"out", a.out}, {"seed", seed}, {"fired", counts}});
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string gt, dets, iou_thrs, coarse_map;
};

EvalOptions MakeEvalOptions(const std::string& flag, const Globals& g) {
  EvalOptions opts;
  if (!flag.empty()) {
    opts.iou_thresholds = ParseNumberList(flag, "--iou-thrs");
  } else if (!g.config.iou_thresholds.empty()) {
    opts.iou_thresholds = g.config.iou_thresholds;
  }
  return opts;
}

void RunEval(const EvalArgs& a, const Globals& g, Io& io) {
  const DetDataset gt = ReadCoco(a.gt);
  Detections dets = ReadDetections(a.dets);
  if (!a.coarse_map.empty()) {
    const CoarseLabelMap coarse = ReadCoarseMap(a.coarse_map);
    for (auto& d : dets) d.category_id = coarse.Map(d.category_id);
  }
  const EvalResult r = Evaluate(dets, gt, MakeEvalOptions(a.iou_thrs, g));
  if (g.json) {
    io.out << EvalSummaryJson(r, gt) << '\n';
  } else {
    io.out << EvalReportText(r, gt);
  }
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  std::string grid, trainer, episode, valset, images, coarse_map;
  int parallelism = 1;
  int patience = 0;
  std::optional<uint64_t> seed;
  std::string iou_thrs;
};

void AddSearchRunOptions(CLI::App* app, SearchArgs& a, bool required) {
  app->add_option("--grid", a.grid, "Grid file (one `axis = v1, v2` per line)")
      ->required(required);
  app->add_option("--trainer", a.trainer, "Trainer command file")
      ->required(required);
  app->add_option("--episode", a.episode, "Training episode annotations")
      ->required(required);
  app->add_option("--valset", a.valset, "Validation annotations")
      ->required(required);
  app->add_option("--images", a.images, "Image directory passed to the trainer");
  app->add_option("--coarse-map", a.coarse_map,
                  "Map trainer labels onto the validation set's coarse ids");
  app->add_option("--parallelism", a.parallelism, "Concurrent trials")
      ->check(CLI::Range(1, 1024));
  app->add_option("--patience", a.patience,
                  "Stop after P trials without improvement (0 = off)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", a.seed, "Master seed");
  app->add_option("--iou-thrs", a.iou_thrs, "Comma-separated IoU thresholds");
}

void WriteCanonical(const fs::path& ledger_path) {
  const Ledger ledger = ReadLedger(ledger_path);
  WriteTextFile(ledger_path.parent_path() / "ledger.canonical.txt",
                ledger.CanonicalText());
}

void RunSearchCmd(const SearchArgs& a, const Globals& g, Io& io) {
  const ParamGrid grid = ReadGrid(a.grid);
  const TrainerCommand trainer = ReadTrainerCommand(a.trainer);
  const DetDataset episode = ReadCoco(a.episode);
  const DetDataset valset = ReadCoco(a.valset);

  SearchOptions opts;
  opts.workdir = ResolveWorkdir(g.workdir, g.config);
  opts.images_dir = a.images;
  opts.parallelism = a.parallelism;
  opts.early_stop.patience = a.patience;
  opts.master_seed = SeedOr(a.seed, g);
  opts.eval = MakeEvalOptions(a.iou_thrs, g);
  if (!a.coarse_map.empty()) {
    opts.coarse = ReadCoarseMap(a.coarse_map);
    opts.coarse_map_path = fs::absolute(a.coarse_map).string();
  }

  SearchOutcome outcome;
  try {
    outcome = RunSearch(grid, trainer, episode, valset, opts);
  } catch (const SearchFailure& e) {
    WriteCanonical(opts.workdir / "ledger.jsonl");
    throw;
  }
  WriteCanonical(outcome.ledger_path);
  const TrialResult& best = SelectBest(outcome.ledger);

  int succeeded = 0, failed = 0, skipped = 0;
  for (const auto& r : outcome.ledger.results) {
    if (r.status == TrialStatus::kSucceeded) ++succeeded;
    if (r.status == TrialStatus::kFailed) ++failed;
    if (r.status == TrialStatus::kSkipped) ++skipped;
  }
  const std::string text = fmt::format(
      "{} trials: {} succeeded, {} failed, {} skipped\n"
      "best trial {}: {} (val mAP {:.4f})\nledger: {}\n",
      outcome.ledger.results.size(), succeeded, failed, skipped,
      best.trial_id(), AssignmentText(best.config), *best.val_map,
      outcome.ledger_path.string());
  Emit(g, io, text,
       {{"best_trial_id", best.trial_id()},
        {"best_assignment", AssignmentJson(best.config)},
        {"val_map", *best.val_map},
        {"trials", outcome.ledger.results.size()},
        {"succeeded", succeeded},
        {"failed", failed},
        {"skipped", skipped},
        {"ledger", outcome.ledger_path.string()}});
}

struct BestArgs {
  std::string ledger;
  bool canonical = false;
};

void RunBest(const BestArgs& a, const Globals& g, Io& io) {
  const Ledger ledger = ReadLedger(a.ledger);
  if (a.canonical) {
    io.out << ledger.CanonicalText();
    return;
  }
  const TrialResult& best = SelectBest(ledger);
  Emit(g, io,
       fmt::format("best trial {}: {} (val mAP {:.4f})\n", best.trial_id(),
                   AssignmentText(best.config), *best.val_map),
       {{"best_trial_id", best.trial_id()},
        {"best_assignment", AssignmentJson(best.config)},
        {"seed", best.config.seed},
        {"val_map", *best.val_map}});
}

struct FinalArgs {
  std::string ledger, testset, iou_thrs;
};

void RunFinal(const FinalArgs& a, const Globals& g, Io& io) {
  const DetDataset test = ReadCoco(a.testset);
  const FinalOutcome f =
      FinalEvaluation(a.ledger, test, MakeEvalOptions(a.iou_thrs, g));
  WriteCanonical(a.ledger);
  if (g.json) {
    ordered_json j = {{"best_trial_id", f.best.trial_id},
                      {"best_assignment", AssignmentJson(f.best)},
                      {"test_map", f.result.map},
                      {"test_map50", f.record.test_map50
                                         ? ordered_json(*f.record.test_map50)
                                         : ordered_json(nullptr)},
                      {"predictions", f.record.predictions_path},
                      {"summary", ordered_json::parse(EvalSummaryJson(
                                      f.result, test))}};
    io.out << j.dump(2) << '\n';
  } else {
    io.out << fmt::format("final trial {}: {}\n", f.best.trial_id,
                          AssignmentText(f.best))
           << EvalReportText(f.result, test);
  }
}

// ---------------------------------------------------------------------------
// runner

struct SyntheticArgs {
  std::string config, val, out;
  std::vector<std::string> targets;
  double noise_scale = 1.0;
};

void RunSynthetic(const SyntheticArgs& a, const Globals& g, Io& io) {
  const TrialConfig trial = ParseTrialConfig(ReadTextFile(a.config));
  const DetDataset val = ReadCoco(a.val);
  SyntheticObjective objective;
  objective.noise_scale = a.noise_scale;
  for (const auto& t : a.targets) {
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ArgumentError(
          fmt::format("--target expects axis=value, got '{}'", t));
    }
    objective.targets[Trim(t.substr(0, eq))] = Trim(t.substr(eq + 1));
  }
  const Detections dets = SyntheticTrainer(trial, val, trial.seed, objective);
  WriteDetections(a.out, dets);
  const double q = objective.Quality(trial);
  Emit(g, io,
       fmt::format("trial {}: q={:.6f}, {} detections -> {}\n", trial.trial_id,
                   q, dets.size(), a.out),
       {{"trial_id", trial.trial_id},
        {"quality", q},
        {"detections", dets.size()},
        {"out", a.out}});
}

// ---------------------------------------------------------------------------

void SetupLogging(const std::string& level) {
  auto logger = spdlog::get("ets");
  if (!logger) {
    logger = spdlog::stderr_color_mt("ets");
    logger->set_pattern("%^%l%$: %v");
  }
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    throw ArgumentError(fmt::format("unknown log level '{}'", level));
  }
  spdlog::set_level(lvl);
}

CLI::Validator RateValidator() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0;
        try {
          std::size_t used = 0;
          v = std::stod(s, &used);
          if (used != s.size()) return "rate must be a number in (0, 1]";
        } catch (const std::exception&) {
          return "rate must be a number in (0, 1]";
        }
        if (!(v > 0 && v <= 1)) {
          return fmt::format("rate must be in (0, 1], got {}", s);
        }
        return {};
      },
      "in (0, 1]", "rate");
}

}  // namespace

GlobalConfig ParseGlobalConfig(std::string_view text) {
  const KvDocument doc = ParseKv(text);
  for (const auto& s : doc.sections) {
    if (!s.name.empty()) {
      throw ArgumentError(
          fmt::format("config: unexpected section [{}]", s.name));
    }
  }
  const KvSection& root = doc.Root();
  GlobalConfig c;
  for (const auto& [k, v] : root.entries) {
    if (k == "master_seed") {
      try {
        std::size_t used = 0;
        c.master_seed = std::stoull(v, &used);
        if (used != v.size() || v.front() == '-') throw std::out_of_range("");
      } catch (const std::exception&) {
        throw ArgumentError(fmt::format("config: bad master_seed '{}'", v));
      }
    } else if (k == "workdir") {
      c.workdir = v;
    } else if (k == "log_level") {
      c.log_level = v;
    } else if (k == "iou_thresholds") {
      c.iou_thresholds = ParseNumberList(v, "config iou_thresholds");
    } else if (k == "aug_spec") {
      c.aug_spec = v;
    } else {
      throw ArgumentError(fmt::format("config: unknown key '{}'", k));
    }
  }
  return c;
}

fs::path ResolveWorkdir(const std::optional<std::string>& flag,
                        const GlobalConfig& config) {
  if (flag && !flag->empty()) return *flag;
  if (!config.workdir.empty()) return config.workdir;
  if (const char* env = std::getenv("ETS_WORKDIR"); env && *env) return env;
  return "ets_work";
}

int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  Io io{out, err};
  Globals g;

  CLI::App app{"Enhance-then-search toolkit for few-shot detection", "ets"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--config", g.config_path, "Global config file");
  app.add_option("--workdir", g.workdir,
                 "Working directory (else config, $ETS_WORKDIR, ./ets_work)");
  app.add_option("--log-level", g.log_level,
                 "trace, debug, info, warn, error, off");
  app.add_flag("--json", g.json, "Machine-readable output");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Annotation ingest and sampling");
  dataset->require_subcommand(1);
  dataset->fallthrough();

  IngestArgs ingest;
  auto* ingest_cmd =
      dataset->add_subcommand("ingest", "Validate and canonicalize a COCO file");
  ingest_cmd->fallthrough();
  ingest_cmd->add_option("--in", ingest.in, "COCO annotation file")->required();
  ingest_cmd->add_option("--out", ingest.out, "Canonical output file");
  ingest_cmd->add_option("--split", ingest.split, "Split tag to record");
  ingest_cmd->add_flag("--lenient", ingest.lenient,
                       "Drop invalid boxes with a warning");

  EpisodeArgs episode;
  auto* episode_cmd =
      dataset->add_subcommand("episode", "Sample a K-shot training episode");
  episode_cmd->fallthrough();
  episode_cmd->add_option("--in", episode.in, "Source annotations")->required();
  episode_cmd->add_option("--out", episode.out, "Episode output")->required();
  episode_cmd->add_option("--k", episode.k, "Instances per category")
      ->required()
      ->check(CLI::PositiveNumber);
  episode_cmd->add_option("--seed", episode.seed, "Sampling seed");

  ValsetArgs valset;
  auto* valset_cmd = dataset->add_subcommand(
      "valset", "Build a stratified, coarse-labeled validation set");
  valset_cmd->fallthrough();
  valset_cmd->add_option("--in", valset.in, "Annotated test set")->required();
  valset_cmd->add_option("--out", valset.out, "Validation set output")
      ->required();
  valset_cmd->add_option("--rate", valset.rate, "Sampling rate in (0, 1]")
      ->required()
      ->check(RateValidator());
  valset_cmd->add_option("--seed", valset.seed, "Sampling seed");
  valset_cmd->add_flag("--disjoint", valset.disjoint,
                       "Also write the unsampled remainder as a test set");
  valset_cmd->add_option("--remainder-out", valset.remainder_out,
                         "Remainder output in disjoint mode");
  valset_cmd->add_option("--coarse-map", valset.coarse_map,
                         "Lines of `fine_id coarse_id coarse_name`");

  // augment
  auto* augment = app.add_subcommand("augment", "Augmentation pipeline");
  augment->require_subcommand(1);
  augment->fallthrough();
  PreviewArgs preview;
  auto* preview_cmd = augment->add_subcommand(
      "preview", "Write augmented images plus a box sidecar");
  preview_cmd->fallthrough();
  preview_cmd->add_option("--spec", preview.spec, "Pipeline spec file");
  preview_cmd->add_option("--ann", preview.ann, "COCO annotations")->required();
  preview_cmd->add_option("--images", preview.images, "Image directory")
      ->required();
  preview_cmd->add_option("--out", preview.out, "Output directory")->required();
  preview_cmd->add_option("--count", preview.count,
                          "Process only the first N images");
  preview_cmd->add_option("--seed", preview.seed, "Pipeline seed");

  // eval
  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "COCO-protocol mAP");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth annotations")->required();
  eval_cmd->add_option("--dets", eval.dets, "COCO results JSON")->required();
  eval_cmd->add_option("--iou-thrs", eval.iou_thrs,
                       "Comma-separated IoU thresholds");
  eval_cmd->add_option("--coarse-map", eval.coarse_map,
                       "Relabel detections before scoring");

  // search
  SearchArgs search_root;
  SearchArgs search_run;
  auto* search = app.add_subcommand("search", "Grid search over trials");
  search->fallthrough();
  search->require_subcommand(0, 1);
  auto* run_cmd = search->add_subcommand("run", "Run every grid point");
  run_cmd->fallthrough();
  AddSearchRunOptions(run_cmd, search_run, /*required=*/true);
  // `ets search --grid ...` is shorthand for `ets search run --grid ...`.
  AddSearchRunOptions(search, search_root, /*required=*/false);

  BestArgs best;
  auto* best_cmd = search->add_subcommand("best", "Select the best trial");
  best_cmd->fallthrough();
  best_cmd->add_option("--ledger", best.ledger, "Ledger file")->required();
  best_cmd->add_flag("--canonical", best.canonical,
                     "Print the canonical ledger instead");

  FinalArgs final_args;
  auto* final_cmd = search->add_subcommand(
      "final", "Re-run the best trial on the test set");
  final_cmd->fallthrough();
  final_cmd->add_option("--ledger", final_args.ledger, "Ledger file")
      ->required();
  final_cmd->add_option("--testset", final_args.testset, "Test annotations")
      ->required();
  final_cmd->add_option("--iou-thrs", final_args.iou_thrs, "IoU thresholds");

  // runner
  auto* runner = app.add_subcommand("runner", "Trainer protocol helpers");
  runner->require_subcommand(1);
  runner->fallthrough();
  SyntheticArgs synth;
  auto* synth_cmd = runner->add_subcommand(
      "synthetic", "Deterministic stand-in trainer speaking the protocol");
  synth_cmd->fallthrough();
  synth_cmd->add_option("--config", synth.config, "Trial config file")
      ->required();
  synth_cmd->add_option("--val", synth.val, "Annotations to predict")
      ->required();
  synth_cmd->add_option("--out", synth.out, "Detections output")->required();
  synth_cmd->add_option("--target", synth.targets,
                        "Optimum per axis as axis=value (repeatable)");
  synth_cmd->add_option("--noise-scale", synth.noise_scale,
                        "Perturbation scale")
      ->check(CLI::NonNegativeNumber);

  // Name an unknown subcommand outright rather than a generic complaint.
  {
    CLI::App* node = &app;
    for (const auto& tok : args) {
      if (tok.empty() || tok[0] == '-') break;
      CLI::App* child = nullptr;
      try {
        child = node->get_subcommand(tok);
      } catch (const CLI::OptionNotFound&) {
      }
      if (child == nullptr) {
        if (node->get_require_subcommand_min() == 0) break;
        err << "ets: usage error: unknown subcommand '" << tok << "'\n\n"
            << node->help();
        return kExitUsageError;
      }
      node = child;
    }
  }

  // CLI11 wants the arguments in reverse.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ets: usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsageError;
  }

  try {
    if (!g.config_path.empty()) {
      g.config = ParseGlobalConfig(ReadTextFile(g.config_path));
    }
    SetupLogging(g.log_level.value_or(g.config.log_level));

    if (ingest_cmd->parsed()) {
      RunIngest(ingest, g, io);
    } else if (episode_cmd->parsed()) {
      RunEpisode(episode, g, io);
    } else if (valset_cmd->parsed()) {
      RunValset(valset, g, io);
    } else if (preview_cmd->parsed()) {
      RunPreview(preview, g, io);
    } else if (eval_cmd->parsed()) {
      RunEval(eval, g, io);
    } else if (run_cmd->parsed()) {
      RunSearchCmd(search_run, g, io);
    } else if (best_cmd->parsed()) {
      RunBest(best, g, io);
    } else if (final_cmd->parsed()) {
      RunFinal(final_args, g, io);
    } else if (search->parsed()) {
      for (const char* name : {"--grid", "--trainer", "--episode", "--valset"}) {
        if (search->count(name) == 0) {
          err << "ets: usage error: search needs " << name << "\n\n"
              << search->help();
          return kExitUsageError;
        }
      }
      RunSearchCmd(search_root, g, io);
    } else if (synth_cmd->parsed()) {
      RunSynthetic(synth, g, io);
    }
  } catch (const ArgumentError& e) {
    err << "ets: usage error: " << e.what() << '\n';
    return kExitUsageError;
  } catch (const ParseError& e) {
    err << "ets: error: " << e.what() << " (byte " << e.byte_offset()
        << ")\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "ets: error: " << e.what() << '\n';
    return kExitDomainError;
  }
  return kExitOk;
}

int Dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return Dispatch(args, std::cout, std::cerr);
}

}  // namespace ets
