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
#include "ets/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/core.h>

#include "ets/error.hpp"
#include "ets/kv_file.hpp"
#include "json.hpp"

namespace ets {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kRecallPoints = 101;

// Same construction as numpy.linspace so threshold values agree bit for bit
// with the reference tooling.
std::vector<double> Linspace(double start, double stop, int n) {
  std::vector<double> out(n);
  const double step = (stop - start) / (n - 1);
  for (int i = 0; i < n; ++i) out[i] = static_cast<double>(i) * step + start;
  out.back() = stop;
  return out;
}

std::vector<std::size_t> ScoreOrder(std::span<const ScoredBox> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  return order;
}

struct ImageKey {
  int64_t image_id;
  int64_t category_id;
  bool operator==(const ImageKey&) const = default;
};

struct ImageKeyHash {
  std::size_t operator()(const ImageKey& k) const {
    return std::hash<int64_t>()(k.image_id) * 1000003u ^
           std::hash<int64_t>()(k.category_id);
  }
};

std::optional<double> Mean(const std::vector<std::optional<double>>& values) {
  double sum = 0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

json OptionalJson(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

Detections ParseDetections(std::string_view raw) {
  json root;
  try {
    root = json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed detections JSON: {}", e.what()),
                     e.byte);
  }
  if (!root.is_array()) {
    throw ParseError("detections JSON must be an array", 0);
  }
  Detections dets;
  dets.reserve(root.size());
  try {
    for (std::size_t i = 0; i < root.size(); ++i) {
      const auto& r = root[i];
      Detection d;
      d.image_id = r.at("image_id").get<int64_t>();
      d.category_id = r.at("category_id").get<int64_t>();
      const auto& box = r.at("bbox");
      if (!box.is_array() || box.size() != 4) {
        throw ValidationError(
            fmt::format("detection {}: bbox must be [x, y, w, h]", i));
      }
      d.bbox = BBox{box[0].get<double>(), box[1].get<double>(),
                    box[2].get<double>(), box[3].get<double>()};
      d.score = r.at("score").get<double>();
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw ValidationError(fmt::format(
            "detection {}: score {} outside [0, 1]", i, d.score));
      }
      if (!d.bbox.valid()) {
        throw ValidationError(fmt::format(
            "detection {}: non-positive box size {}x{}", i, d.bbox.w,
            d.bbox.h));
      }
      dets.push_back(d);
    }
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("invalid detection record: {}", e.what()), 0);
  }
  return dets;
}

Detections ReadDetections(const std::filesystem::path& path) {
  return ParseDetections(ReadTextFile(path));
}

std::string SerializeDetections(const Detections& dets) {
  ordered_json out = ordered_json::array();
  for (const auto& d : dets) {
    out.push_back({{"image_id", d.image_id},
                   {"category_id", d.category_id},
                   {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                   {"score", d.score}});
  }
  return out.dump() + "\n";
}

void WriteDetections(const std::filesystem::path& path,
                     const Detections& dets) {
  WriteTextFile(path, SerializeDetections(dets));
}

double Iou(const BBox& a, const BBox& b) {
  const double inter = Intersect(a, b).area();
  if (inter <= 0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double CrowdOverlap(const BBox& det, const BBox& crowd) {
  const double inter = Intersect(det, crowd).area();
  if (inter <= 0 || det.area() <= 0) return 0.0;
  return inter / det.area();
}

MatchResult MatchDetections(std::span<const ScoredBox> dets,
                            std::span<const GroundTruthBox> gts,
                            double iou_threshold) {
  MatchResult result;
  result.order = ScoreOrder(dets);

  // Regular boxes first, crowd boxes last; a detection holding a regular
  // match never trades it for a crowd region.
  std::vector<std::size_t> gt_order(gts.size());
  std::iota(gt_order.begin(), gt_order.end(), 0);
  std::stable_partition(gt_order.begin(), gt_order.end(),
                        [&](std::size_t g) { return !gts[g].iscrowd; });

  std::vector<bool> taken(gts.size(), false);
  const double floor_iou = std::min(iou_threshold, 1.0 - 1e-10);
  for (std::size_t d : result.order) {
    double best = floor_iou;
    int match = -1;
    for (std::size_t g : gt_order) {
      const bool crowd = gts[g].iscrowd;
      if (taken[g] && !crowd) continue;
      if (match > -1 && !gts[match].iscrowd && crowd) break;
      const double overlap = crowd ? CrowdOverlap(dets[d].bbox, gts[g].bbox)
                                   : Iou(dets[d].bbox, gts[g].bbox);
      if (overlap < best) continue;
      best = overlap;
      match = static_cast<int>(g);
    }
    result.matched_gt.push_back(match);
    if (match < 0) {
      result.flags.push_back(MatchFlag::kFalsePositive);
      continue;
    }
    taken[match] = true;
    result.flags.push_back(gts[match].iscrowd ? MatchFlag::kIgnored
                                              : MatchFlag::kTruePositive);
  }
  return result;
}

std::vector<double> RecallThresholds() {
  return Linspace(0.0, 1.0, kRecallPoints);
}

std::vector<double> DefaultIouThresholds() { return Linspace(0.5, 0.95, 10); }

std::optional<double> AveragePrecision(std::span<const MatchFlag> flags,
                                       int64_t n_gt) {
  if (n_gt <= 0) return std::nullopt;
  std::vector<double> recall;
  std::vector<double> precision;
  int64_t tp = 0;
  int64_t fp = 0;
  for (MatchFlag f : flags) {
    if (f == MatchFlag::kIgnored) continue;
    (f == MatchFlag::kTruePositive ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precision.push_back(static_cast<double>(tp) /
                        static_cast<double>(tp + fp));
  }
  // Precision envelope: best precision achievable at this recall or beyond.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0;
  for (double r : RecallThresholds()) {
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[it - recall.begin()];
  }
  return sum / kRecallPoints;
}

std::optional<double> EvalResult::MapAt(double iou) const {
  for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
    if (std::abs(iou_thresholds[t] - iou) < 1e-9) return per_threshold_map[t];
  }
  return std::nullopt;
}

EvalResult Evaluate(std::span<const Detection> dets, const DetDataset& gt,
                    const EvalOptions& options) {
  if (options.iou_thresholds.empty()) {
    throw ArgumentError("at least one IoU threshold is required");
  }
  for (double t : options.iou_thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ArgumentError(fmt::format("IoU threshold {} outside [0, 1]", t));
    }
  }

  std::unordered_set<int64_t> image_ids;
  for (const auto& img : gt.images) image_ids.insert(img.id);
  std::set<int64_t> category_ids;
  for (const auto& c : gt.categories) category_ids.insert(c.id);

  std::vector<std::string> offenders;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& d = dets[i];
    if (!image_ids.contains(d.image_id) ||
        !category_ids.contains(d.category_id)) {
      offenders.push_back(fmt::format("#{} (image_id {}, category_id {})", i,
                                      d.image_id, d.category_id));
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (std::size_t i = 0; i < offenders.size() && i < 10; ++i) {
      list += (i ? ", " : "") + offenders[i];
    }
    if (offenders.size() > 10) {
      list += fmt::format(" and {} more", offenders.size() - 10);
    }
    throw ValidationError(
        fmt::format("{} detection(s) do not resolve against the ground truth: "
                    "{}",
                    offenders.size(), list));
  }

  std::unordered_map<ImageKey, std::vector<GroundTruthBox>, ImageKeyHash>
      gt_boxes;
  std::map<int64_t, int64_t> n_gt;
  for (int64_t c : category_ids) n_gt[c] = 0;
  for (const auto& a : gt.annotations) {
    gt_boxes[{a.image_id, a.category_id}].push_back({a.bbox, a.iscrowd});
    if (!a.iscrowd) ++n_gt[a.category_id];
  }
  std::unordered_map<ImageKey, std::vector<std::size_t>, ImageKeyHash>
      det_index;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    det_index[{dets[i].image_id, dets[i].category_id}].push_back(i);
  }
  std::vector<int64_t> sorted_images(image_ids.begin(), image_ids.end());
  std::sort(sorted_images.begin(), sorted_images.end());

  EvalResult result;
  result.iou_thresholds = options.iou_thresholds;
  result.category_ids.assign(category_ids.begin(), category_ids.end());
  result.n_gt = n_gt;

  const std::size_t n_thr = options.iou_thresholds.size();
  static const std::vector<GroundTruthBox> kNoGt;

  struct Scored {
    double score;
    std::size_t input_index;
    MatchFlag flag;
  };

  for (int64_t cat : result.category_ids) {
    std::vector<std::optional<double>> row(n_thr);
    if (n_gt[cat] == 0) {
      result.ap.push_back(std::move(row));
      continue;
    }
    std::vector<std::vector<Scored>> pooled(n_thr);
    for (int64_t img : sorted_images) {
      auto det_it = det_index.find({img, cat});
      if (det_it == det_index.end()) continue;
      auto gt_it = gt_boxes.find({img, cat});
      const auto& gts = gt_it == gt_boxes.end() ? kNoGt : gt_it->second;

      // Keep the top-scoring detections for this image.
      std::vector<ScoredBox> boxes;
      for (std::size_t i : det_it->second) {
        boxes.push_back({dets[i].bbox, dets[i].score});
      }
      auto order = ScoreOrder(boxes);
      if (order.size() > static_cast<std::size_t>(options.max_detections)) {
        order.resize(options.max_detections);
      }
      std::vector<ScoredBox> kept;
      std::vector<std::size_t> kept_index;
      for (std::size_t o : order) {
        kept.push_back(boxes[o]);
        kept_index.push_back(det_it->second[o]);
      }

      for (std::size_t t = 0; t < n_thr; ++t) {
        const auto match =
            MatchDetections(kept, gts, options.iou_thresholds[t]);
        for (std::size_t j = 0; j < match.order.size(); ++j) {
          const std::size_t k = match.order[j];
          pooled[t].push_back({kept[k].score, kept_index[k], match.flags[j]});
        }
      }
    }
    for (std::size_t t = 0; t < n_thr; ++t) {
      auto& entries = pooled[t];
      std::sort(entries.begin(), entries.end(),
                [](const Scored& a, const Scored& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.input_index < b.input_index;
                });
      std::vector<MatchFlag> flags;
      flags.reserve(entries.size());
      for (const auto& e : entries) flags.push_back(e.flag);
      row[t] = AveragePrecision(flags, n_gt[cat]);
    }
    result.ap.push_back(std::move(row));
  }

  double sum = 0;
  for (std::size_t k = 0; k < result.category_ids.size(); ++k) {
    for (const auto& cell : result.ap[k]) {
      if (cell) {
        sum += *cell;
        ++result.defined_cells;
      }
    }
    result.per_category_ap[result.category_ids[k]] = Mean(result.ap[k]);
  }
  result.map = result.defined_cells > 0 ? sum / result.defined_cells : 0.0;
  for (std::size_t t = 0; t < n_thr; ++t) {
    std::vector<std::optional<double>> column;
    for (const auto& row : result.ap) column.push_back(row[t]);
    result.per_threshold_map.push_back(Mean(column));
  }
  return result;
}

std::string EvalSummaryJson(const EvalResult& result, const DetDataset& gt) {
  ordered_json out;
  out["map"] = result.map;
  out["map50"] = OptionalJson(result.MapAt(0.5));
  out["iou_thresholds"] = result.iou_thresholds;
  json per_thr = json::array();
  for (const auto& v : result.per_threshold_map) {
    per_thr.push_back(OptionalJson(v));
  }
  out["per_threshold_map"] = per_thr;
  ordered_json per_cat = ordered_json::object();
  for (const auto& [id, v] : result.per_category_ap) {
    per_cat[std::to_string(id)] = OptionalJson(v);
  }
  out["per_category_ap"] = per_cat;
  ordered_json counts = ordered_json::object();
  for (const auto& [id, n] : result.n_gt) counts[std::to_string(id)] = n;
  out["n_gt"] = counts;
  ordered_json names = ordered_json::object();
  for (const auto& c : gt.categories) names[std::to_string(c.id)] = c.name;
  out["category_names"] = names;
  return out.dump();
}

std::string EvalReportText(const EvalResult& result, const DetDataset& gt) {
  auto fmt_ap = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.4f}", *v) : std::string("   n/a");
  };
  std::string out;
  out += fmt::format("mAP@[{:.2f}:{:.2f}] = {:.4f}\n",
                     result.iou_thresholds.front(),
                     result.iou_thresholds.back(), result.map);
  if (auto m50 = result.MapAt(0.5)) {
    out += fmt::format("mAP@0.50 = {:.4f}\n", *m50);
  }
  if (auto m75 = result.MapAt(0.75)) {
    out += fmt::format("mAP@0.75 = {:.4f}\n", *m75);
  }
  out += fmt::format("{:>8}  {:<24} {:>6}  {:>7}\n", "cat_id", "name", "n_gt",
                     "AP");
  for (const auto& [id, ap] : result.per_category_ap) {
    const auto* c = gt.FindCategory(id);
    out += fmt::format("{:>8}  {:<24} {:>6}  {:>7}\n", id,
                       c != nullptr ? c->name : "", result.n_gt.at(id),
                       fmt_ap(ap));
  }
  return out;
}

}  // namespace ets
