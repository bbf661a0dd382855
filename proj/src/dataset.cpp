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
#include "ets/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "ets/error.hpp"
#include "ets/kv_file.hpp"
#include "ets/rng.hpp"
#include "json.hpp"

namespace ets {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void Warn(std::vector<std::string>* sink, std::string msg) {
  spdlog::warn("{}", msg);
  if (sink != nullptr) sink->push_back(std::move(msg));
}

const json& RequireArray(const json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end() || !it->is_array()) {
    throw ParseError(fmt::format("COCO JSON is missing the '{}' array", key),
                     0);
  }
  return *it;
}

// Geometry problem with `ann`, or empty when the box is acceptable.
std::string CheckBox(const Annotation& ann, const ImageRecord& img) {
  const BBox& b = ann.bbox;
  if (!(b.w > 0) || !(b.h > 0)) {
    return fmt::format("annotation {} has non-positive box size {}x{}", ann.id,
                       b.w, b.h);
  }
  if (b.x < -kBoundsSlack || b.y < -kBoundsSlack ||
      b.right() > img.width + kBoundsSlack ||
      b.bottom() > img.height + kBoundsSlack) {
    return fmt::format(
        "annotation {} box [{}, {}, {}, {}] exceeds image {} bounds {}x{}",
        ann.id, b.x, b.y, b.w, b.h, img.id, img.width, img.height);
  }
  return {};
}

// rate * n snapped to the nearest integer when within float noise of it.
double ScaledCount(double rate, int64_t n) {
  const double x = rate * static_cast<double>(n);
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

ordered_json ToJson(const DetDataset& ds) {
  ordered_json out;
  out["info"] = {{"split", ds.split_tag}};
  ordered_json images = ordered_json::array();
  for (const auto& img : ds.images) {
    images.push_back({{"id", img.id},
                      {"file_name", img.file_name},
                      {"width", img.width},
                      {"height", img.height}});
  }
  ordered_json anns = ordered_json::array();
  for (const auto& a : ds.annotations) {
    anns.push_back({{"id", a.id},
                    {"image_id", a.image_id},
                    {"category_id", a.category_id},
                    {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                    {"area", a.bbox.area()},
                    {"iscrowd", a.iscrowd ? 1 : 0}});
  }
  ordered_json cats = ordered_json::array();
  for (const auto& c : ds.categories) {
    cats.push_back({{"id", c.id}, {"name", c.name}});
  }
  out["images"] = std::move(images);
  out["annotations"] = std::move(anns);
  out["categories"] = std::move(cats);
  return out;
}

}  // namespace

const ImageRecord* DetDataset::FindImage(int64_t id) const {
  for (const auto& img : images) {
    if (img.id == id) return &img;
  }
  return nullptr;
}

const Category* DetDataset::FindCategory(int64_t id) const {
  for (const auto& c : categories) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::map<int64_t, int64_t> DetDataset::CountsByCategory() const {
  std::map<int64_t, int64_t> counts;
  for (const auto& c : categories) counts[c.id] = 0;
  for (const auto& a : annotations) ++counts[a.category_id];
  return counts;
}

DetDataset ParseCoco(std::string_view raw, const ParseOptions& options,
                     std::vector<std::string>* warnings) {
  json root;
  try {
    root = json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed COCO JSON: {}", e.what()), e.byte);
  }
  if (!root.is_object()) {
    throw ParseError("COCO JSON root must be an object", 0);
  }

  DetDataset ds;
  ds.split_tag = options.default_split;
  if (auto info = root.find("info");
      info != root.end() && info->is_object() && info->contains("split") &&
      (*info)["split"].is_string()) {
    ds.split_tag = (*info)["split"].get<std::string>();
  }

  try {
    for (const auto& c : RequireArray(root, "categories")) {
      ds.categories.push_back(
          Category{c.at("id").get<int64_t>(), c.value("name", std::string())});
    }
    for (const auto& im : RequireArray(root, "images")) {
      ds.images.push_back(ImageRecord{im.at("id").get<int64_t>(),
                                      im.value("file_name", std::string()),
                                      im.at("width").get<int>(),
                                      im.at("height").get<int>()});
    }
    for (const auto& an : RequireArray(root, "annotations")) {
      Annotation a;
      a.id = an.at("id").get<int64_t>();
      a.image_id = an.at("image_id").get<int64_t>();
      a.category_id = an.at("category_id").get<int64_t>();
      const auto& box = an.at("bbox");
      if (!box.is_array() || box.size() != 4) {
        throw ParseError(
            fmt::format("annotation {}: bbox must be [x, y, w, h]", a.id), 0);
      }
      a.bbox = BBox{box[0].get<double>(), box[1].get<double>(),
                    box[2].get<double>(), box[3].get<double>()};
      if (auto crowd = an.find("iscrowd"); crowd != an.end()) {
        a.iscrowd = crowd->is_boolean() ? crowd->get<bool>()
                                        : crowd->get<int>() != 0;
      }
      ds.annotations.push_back(a);
    }
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("invalid COCO record: {}", e.what()), 0);
  }

  if (options.lenient) {
    std::unordered_map<int64_t, const ImageRecord*> by_id;
    for (const auto& img : ds.images) by_id.emplace(img.id, &img);
    std::vector<Annotation> kept;
    kept.reserve(ds.annotations.size());
    for (const auto& a : ds.annotations) {
      auto it = by_id.find(a.image_id);
      if (it != by_id.end()) {
        if (auto problem = CheckBox(a, *it->second); !problem.empty()) {
          Warn(warnings, problem + " (dropped)");
          continue;
        }
      }
      kept.push_back(a);
    }
    ds.annotations = std::move(kept);
  }
  ValidateDataset(ds);
  return ds;
}

DetDataset ReadCoco(const std::filesystem::path& path,
                    const ParseOptions& options,
                    std::vector<std::string>* warnings) {
  return ParseCoco(ReadTextFile(path), options, warnings);
}

std::string SerializeCoco(const DetDataset& ds) {
  return ToJson(ds).dump(1) + "\n";
}

void WriteCoco(const std::filesystem::path& path, const DetDataset& ds) {
  WriteTextFile(path, SerializeCoco(ds));
}

void ValidateDataset(const DetDataset& ds) {
  std::unordered_map<int64_t, const ImageRecord*> images;
  for (const auto& img : ds.images) {
    if (!images.emplace(img.id, &img).second) {
      throw IntegrityError(fmt::format("duplicate image id {}", img.id),
                           img.id);
    }
    if (img.width <= 0 || img.height <= 0) {
      throw ValidationError(fmt::format("image {} has non-positive size {}x{}",
                                        img.id, img.width, img.height));
    }
  }
  std::unordered_set<int64_t> categories;
  for (const auto& c : ds.categories) {
    if (!categories.insert(c.id).second) {
      throw IntegrityError(fmt::format("duplicate category id {}", c.id), c.id);
    }
  }
  std::unordered_set<int64_t> ann_ids;
  for (const auto& a : ds.annotations) {
    if (!ann_ids.insert(a.id).second) {
      throw IntegrityError(fmt::format("duplicate annotation id {}", a.id),
                           a.id);
    }
    auto img = images.find(a.image_id);
    if (img == images.end()) {
      throw IntegrityError(
          fmt::format("annotation {} references missing image_id {}", a.id,
                      a.image_id),
          a.id);
    }
    if (!categories.contains(a.category_id)) {
      throw IntegrityError(
          fmt::format("annotation {} references missing category_id {}", a.id,
                      a.category_id),
          a.id);
    }
    if (auto problem = CheckBox(a, *img->second); !problem.empty()) {
      throw ValidationError(problem);
    }
  }
}

CoarseLabelMap CoarseLabelMap::Identity(const DetDataset& ds) {
  CoarseLabelMap map;
  for (const auto& c : ds.categories) {
    map.fine_to_coarse[c.id] = c.id;
    map.coarse_categories.push_back(c);
  }
  return map;
}

void CoarseLabelMap::CheckTotal(const DetDataset& ds) const {
  for (const auto& c : ds.categories) {
    if (!fine_to_coarse.contains(c.id)) {
      throw ArgumentError(fmt::format(
          "coarse label map has no entry for category {} ('{}')", c.id,
          c.name));
    }
  }
}

int64_t CoarseLabelMap::Map(int64_t fine_id) const {
  auto it = fine_to_coarse.find(fine_id);
  if (it == fine_to_coarse.end()) {
    throw ArgumentError(
        fmt::format("coarse label map has no entry for category {}", fine_id));
  }
  return it->second;
}

CoarseLabelMap ParseCoarseMap(std::string_view text) {
  CoarseLabelMap map;
  std::map<int64_t, std::string> names;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    std::istringstream fields(trimmed);
    int64_t fine = 0;
    int64_t coarse = 0;
    if (!(fields >> fine >> coarse)) {
      throw ParseError(
          fmt::format("coarse map line {}: expected 'fine_id coarse_id name'",
                      line_no),
          0);
    }
    std::string rest;
    std::getline(fields, rest);
    const std::string name = Trim(rest);
    if (!map.fine_to_coarse.emplace(fine, coarse).second) {
      throw ParseError(
          fmt::format("coarse map line {}: fine id {} mapped twice", line_no,
                      fine),
          0);
    }
    auto [it, inserted] = names.emplace(coarse, name);
    if (!inserted && !name.empty() && it->second != name) {
      if (it->second.empty()) {
        it->second = name;
      } else {
        throw ParseError(fmt::format("coarse map line {}: coarse id {} named "
                                     "both '{}' and '{}'",
                                     line_no, coarse, it->second, name),
                         0);
      }
    }
  }
  for (const auto& [id, name] : names) {
    map.coarse_categories.push_back(
        Category{id, name.empty() ? fmt::format("coarse_{}", id) : name});
  }
  return map;
}

CoarseLabelMap ReadCoarseMap(const std::filesystem::path& path) {
  return ParseCoarseMap(ReadTextFile(path));
}

std::string SerializeCoarseMap(const CoarseLabelMap& map) {
  std::string out;
  for (const auto& [fine, coarse] : map.fine_to_coarse) {
    std::string name;
    for (const auto& c : map.coarse_categories) {
      if (c.id == coarse) name = c.name;
    }
    out += fmt::format("{} {} {}\n", fine, coarse, name);
  }
  return out;
}

DetDataset RelabelCoarse(const DetDataset& ds, const CoarseLabelMap& map) {
  map.CheckTotal(ds);
  DetDataset out = ds;
  for (auto& a : out.annotations) a.category_id = map.Map(a.category_id);
  out.categories = map.coarse_categories;
  return out;
}

Episode SampleKShot(const DetDataset& ds, int k, uint64_t seed) {
  if (k <= 0) {
    throw ArgumentError(fmt::format("k must be >= 1, got {}", k));
  }
  if (ds.images.empty()) {
    throw ArgumentError("cannot sample an episode from an empty dataset");
  }
  Episode ep;
  ep.k = k;
  ep.seed = seed;

  std::map<int64_t, std::vector<std::size_t>> by_category;
  for (const auto& c : ds.categories) by_category[c.id];
  for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
    if (!ds.annotations[i].iscrowd) {
      by_category[ds.annotations[i].category_id].push_back(i);
    }
  }

  std::vector<bool> keep(ds.annotations.size(), false);
  for (auto& [cat, indices] : by_category) {
    if (indices.empty()) {
      Warn(&ep.warnings,
           fmt::format("category {} has no instances; skipped", cat));
      continue;
    }
    // Shuffling the full list and taking a prefix keeps episode(k1) a subset
    // of episode(k2) for k1 <= k2 under the same seed.
    auto stream =
        RandomStream::Derive(seed, {0x6b73686f74ULL, static_cast<uint64_t>(cat)});
    stream.Shuffle(indices);
    const auto take = std::min<std::size_t>(indices.size(), k);
    for (std::size_t i = 0; i < take; ++i) keep[indices[i]] = true;
  }

  std::unordered_set<int64_t> used_images;
  for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
    if (keep[i]) {
      ep.base.annotations.push_back(ds.annotations[i]);
      used_images.insert(ds.annotations[i].image_id);
    }
  }
  for (const auto& img : ds.images) {
    if (used_images.contains(img.id)) ep.base.images.push_back(img);
  }
  ep.base.categories = ds.categories;
  ep.base.split_tag = "train";
  return ep;
}

std::map<int64_t, int64_t> StratifiedTargets(
    const std::map<int64_t, int64_t>& counts, double rate,
    std::vector<std::string>* warnings) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ArgumentError(
        fmt::format("sampling rate must lie in (0, 1], got {}", rate));
  }
  struct Share {
    int64_t id;
    int64_t floor;
    double frac;
  };
  std::vector<Share> shares;
  double total = 0;
  int64_t floor_sum = 0;
  for (const auto& [id, n] : counts) {
    const double x = ScaledCount(rate, n);
    const auto f = static_cast<int64_t>(std::floor(x));
    shares.push_back(Share{id, f, x - static_cast<double>(f)});
    total += x;
    floor_sum += f;
  }
  auto remaining = static_cast<int64_t>(std::llround(total)) - floor_sum;
  std::vector<std::size_t> order(shares.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return shares[a].frac > shares[b].frac;
  });

  std::map<int64_t, int64_t> targets;
  for (const auto& s : shares) targets[s.id] = s.floor;
  for (std::size_t i : order) {
    if (remaining <= 0) break;
    if (shares[i].frac <= 0) break;
    ++targets[shares[i].id];
    --remaining;
  }
  for (auto& [id, t] : targets) {
    if (t == 0 && counts.at(id) > 0) {
      t = 1;
      Warn(warnings,
           fmt::format("category {} rounds to zero instances at rate {}; "
                       "one instance force-included",
                       id, rate));
    }
  }
  return targets;
}

ValidationSplit BuildValidationSet(const DetDataset& test, double rate,
                                   const CoarseLabelMap& coarse, uint64_t seed,
                                   bool disjoint) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ArgumentError(
        fmt::format("sampling rate must lie in (0, 1], got {}", rate));
  }
  coarse.CheckTotal(test);

  ValidationSplit split;
  const auto counts = test.CountsByCategory();
  split.target_counts = StratifiedTargets(counts, rate, &split.warnings);

  // Upper bound per category before the stratification contract breaks.
  std::map<int64_t, int64_t> caps;
  for (const auto& [id, n] : counts) {
    caps[id] = std::max<int64_t>(
        split.target_counts[id],
        static_cast<int64_t>(std::ceil(ScaledCount(rate, n))));
  }

  // Instance histogram per image, keyed by image index.
  std::unordered_map<int64_t, std::size_t> image_index;
  for (std::size_t i = 0; i < test.images.size(); ++i) {
    image_index.emplace(test.images[i].id, i);
  }
  std::vector<std::map<int64_t, int64_t>> contents(test.images.size());
  for (const auto& a : test.annotations) {
    ++contents[image_index.at(a.image_id)][a.category_id];
  }

  std::vector<bool> selected(test.images.size(), false);
  std::map<int64_t, int64_t> have;
  for (const auto& [id, n] : counts) have[id] = 0;
  auto take = [&](std::size_t img) {
    selected[img] = true;
    for (const auto& [cat, n] : contents[img]) have[cat] += n;
  };
  auto fits_all_caps = [&](std::size_t img) {
    for (const auto& [cat, n] : contents[img]) {
      if (have[cat] + n > caps[cat]) return false;
    }
    return true;
  };

  // Rarest categories first so that they are not crowded out by residual
  // instances riding along on images picked for common categories.
  std::vector<int64_t> order;
  for (const auto& [id, n] : counts) order.push_back(id);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return counts.at(a) < counts.at(b);
  });

  for (int64_t cat : order) {
    const int64_t target = split.target_counts[cat];
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < contents.size(); ++i) {
      if (contents[i].contains(cat)) candidates.push_back(i);
    }
    auto stream =
        RandomStream::Derive(seed, {0x76616cULL, static_cast<uint64_t>(cat)});
    stream.Shuffle(candidates);

    // Pass 0 respects every category's cap; pass 1 only this category's;
    // pass 2 fills up to the target regardless.
    for (int pass = 0; pass < 3 && have[cat] < target; ++pass) {
      for (std::size_t img : candidates) {
        if (have[cat] >= target) break;
        if (selected[img]) continue;
        const int64_t n = contents[img].at(cat);
        if (pass < 2 && have[cat] + n > caps[cat]) continue;
        if (pass == 0 && !fits_all_caps(img)) continue;
        take(img);
      }
    }
  }

  // Unannotated images are a stratum of their own.
  std::vector<std::size_t> background;
  for (std::size_t i = 0; i < contents.size(); ++i) {
    if (contents[i].empty()) background.push_back(i);
  }
  if (!background.empty()) {
    auto stream = RandomStream::Derive(seed, {0x6267ULL});
    stream.Shuffle(background);
    const auto n_bg = static_cast<std::size_t>(std::llround(
        ScaledCount(rate, static_cast<int64_t>(background.size()))));
    for (std::size_t i = 0; i < n_bg && i < background.size(); ++i) {
      selected[background[i]] = true;
    }
  }

  // Images carry their residual instances, so `have` can overshoot; the
  // drawn set is exactly the target, taken from the induced images.
  for (const auto& [cat, n] : counts) {
    if (have[cat] > caps[cat] && n > 0) {
      Warn(&split.warnings,
           fmt::format("category {}: induced images hold {} instances, "
                       "{} drawn",
                       cat, have[cat], split.target_counts[cat]));
    }
  }
  split.present_counts = have;
  {
    std::map<int64_t, std::vector<int64_t>> pool;
    for (const auto& a : test.annotations) {
      if (selected[image_index.at(a.image_id)]) {
        pool[a.category_id].push_back(a.id);
      }
    }
    for (const auto& [cat, n] : counts) {
      auto& ids = pool[cat];
      auto stream =
          RandomStream::Derive(seed, {0x64726177ULL, static_cast<uint64_t>(cat)});
      stream.Shuffle(ids);
      const auto take_n = static_cast<std::size_t>(
          std::min<int64_t>(split.target_counts[cat],
                            static_cast<int64_t>(ids.size())));
      split.selected_counts[cat] = static_cast<int64_t>(take_n);
      split.selected_annotation_ids.insert(split.selected_annotation_ids.end(),
                                           ids.begin(), ids.begin() + take_n);
    }
    std::sort(split.selected_annotation_ids.begin(),
              split.selected_annotation_ids.end());
  }

  std::unordered_set<int64_t> val_images;
  DetDataset& val = split.val;
  DetDataset rest;
  for (std::size_t i = 0; i < test.images.size(); ++i) {
    if (selected[i]) {
      val.images.push_back(test.images[i]);
      val_images.insert(test.images[i].id);
    } else {
      rest.images.push_back(test.images[i]);
    }
  }
  for (const auto& a : test.annotations) {
    if (val_images.contains(a.image_id)) {
      Annotation relabeled = a;
      relabeled.category_id = coarse.Map(a.category_id);
      val.annotations.push_back(relabeled);
    } else {
      rest.annotations.push_back(a);
    }
  }
  val.categories = coarse.coarse_categories;
  val.split_tag = "val";
  if (disjoint) {
    rest.categories = test.categories;
    rest.split_tag = "test";
    split.remainder = std::move(rest);
  }
  return split;
}

DistributionReport CompareDistributions(const DetDataset& val,
                                        const DetDataset& reference) {
  std::set<int64_t> val_ids;
  std::set<int64_t> ref_ids;
  for (const auto& c : val.categories) val_ids.insert(c.id);
  for (const auto& c : reference.categories) ref_ids.insert(c.id);
  bool shared = false;
  for (int64_t id : val_ids) shared = shared || ref_ids.contains(id);
  if (!shared && !(val_ids.empty() && ref_ids.empty())) {
    throw ArgumentError("category tables of the two datasets are disjoint");
  }

  const auto val_counts = val.CountsByCategory();
  const auto ref_counts = reference.CountsByCategory();
  const auto val_total = static_cast<double>(val.annotations.size());
  const auto ref_total = static_cast<double>(reference.annotations.size());

  std::set<int64_t> ids = val_ids;
  ids.insert(ref_ids.begin(), ref_ids.end());
  DistributionReport report;
  for (int64_t id : ids) {
    DistributionRow row;
    row.category_id = id;
    if (const auto* c = reference.FindCategory(id)) {
      row.name = c->name;
    } else if (const auto* c2 = val.FindCategory(id)) {
      row.name = c2->name;
    }
    if (auto it = val_counts.find(id); it != val_counts.end()) {
      row.count_val = it->second;
    }
    if (auto it = ref_counts.find(id); it != ref_counts.end()) {
      row.count_ref = it->second;
    }
    row.p_val = val_total > 0 ? static_cast<double>(row.count_val) / val_total
                              : 0.0;
    row.p_ref = ref_total > 0 ? static_cast<double>(row.count_ref) / ref_total
                              : 0.0;
    report.max_abs_deviation =
        std::max(report.max_abs_deviation, std::abs(row.p_val - row.p_ref));
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ets
