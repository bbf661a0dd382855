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
#ifndef ETS_EVAL_HPP_
#define ETS_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ets/box.hpp"
#include "ets/dataset.hpp"

namespace ets {

struct Detection {
  int64_t image_id = 0;
  int64_t category_id = 0;
  BBox bbox;
  double score = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

using Detections = std::vector<Detection>;

// COCO results JSON: [{image_id, category_id, bbox: [x, y, w, h], score}].
Detections ParseDetections(std::string_view raw);
Detections ReadDetections(const std::filesystem::path& path);
std::string SerializeDetections(const Detections& dets);
void WriteDetections(const std::filesystem::path& path, const Detections& dets);

double Iou(const BBox& a, const BBox& b);

// Overlap against a crowd region: intersection over the detection's own
// area, so several detections can sit inside one crowd box.
double CrowdOverlap(const BBox& det, const BBox& crowd);

enum class MatchFlag { kTruePositive, kFalsePositive, kIgnored };

struct GroundTruthBox {
  BBox bbox;
  bool iscrowd = false;
};

struct ScoredBox {
  BBox bbox;
  double score = 0;
};

struct MatchResult {
  // Detection indices in evaluation order: score descending, ties by input
  // position.
  std::vector<std::size_t> order;
  // One flag per entry of `order`.
  std::vector<MatchFlag> flags;
  // Index of the matched ground-truth box per entry of `order`, or -1.
  std::vector<int> matched_gt;
};

// Greedy matching for one (image, category) at one IoU threshold. Crowd
// boxes never count as misses and detections landing on them are ignored.
MatchResult MatchDetections(std::span<const ScoredBox> dets,
                            std::span<const GroundTruthBox> gts,
                            double iou_threshold);

// 101-point interpolated AP of score-ordered flags (ignored entries are
// skipped). Undefined when `n_gt` is zero.
std::optional<double> AveragePrecision(std::span<const MatchFlag> flags,
                                       int64_t n_gt);

// Recall sample points 0.00, 0.01, ..., 1.00.
std::vector<double> RecallThresholds();

// 0.50, 0.55, ..., 0.95.
std::vector<double> DefaultIouThresholds();

struct EvalOptions {
  std::vector<double> iou_thresholds = DefaultIouThresholds();
  // Top-scoring detections kept per (image, category).
  int max_detections = 100;
};

struct EvalResult {
  std::vector<double> iou_thresholds;
  std::vector<int64_t> category_ids;
  std::map<int64_t, int64_t> n_gt;
  // ap[category index][threshold index]; empty when the category has no
  // ground truth.
  std::vector<std::vector<std::optional<double>>> ap;
  double map = 0;
  std::vector<std::optional<double>> per_threshold_map;
  std::map<int64_t, std::optional<double>> per_category_ap;
  int defined_cells = 0;

  // AP averaged over categories at the threshold nearest `iou`.
  std::optional<double> MapAt(double iou) const;
};

EvalResult Evaluate(std::span<const Detection> dets, const DetDataset& gt,
                    const EvalOptions& options = {});

// {map, map50, per_threshold_map[], per_category_ap{}} as JSON text.
std::string EvalSummaryJson(const EvalResult& result, const DetDataset& gt);
std::string EvalReportText(const EvalResult& result, const DetDataset& gt);

}  // namespace ets

#endif  // ETS_EVAL_HPP_
