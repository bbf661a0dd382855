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
#ifndef ETS_DATASET_HPP_
#define ETS_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ets/box.hpp"

namespace ets {

// Annotations may overhang the image by half a pixel (float annotations).
inline constexpr double kBoundsSlack = 0.5;

struct Annotation {
  int64_t id = 0;
  int64_t image_id = 0;
  int64_t category_id = 0;
  BBox bbox;
  bool iscrowd = false;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct ImageRecord {
  int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Category {
  int64_t id = 0;
  std::string name;

  friend bool operator==(const Category&, const Category&) = default;
};

// COCO-style detection dataset. Annotation order is significant and is
// preserved through every transformation.
struct DetDataset {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
  std::string split_tag = "train";

  const ImageRecord* FindImage(int64_t id) const;
  const Category* FindCategory(int64_t id) const;

  // Annotation count per category id, including categories with zero.
  std::map<int64_t, int64_t> CountsByCategory() const;
};

struct ParseOptions {
  // Drop annotations with non-positive or out-of-bounds boxes instead of
  // failing.
  bool lenient = false;
  std::string default_split = "train";
};

// Parses COCO annotation JSON. Throws ParseError (with byte offset) on
// malformed input, IntegrityError on dangling ids and ValidationError on bad
// geometry. Warnings for dropped records are appended to `warnings`.
DetDataset ParseCoco(std::string_view raw, const ParseOptions& options = {},
                     std::vector<std::string>* warnings = nullptr);
DetDataset ReadCoco(const std::filesystem::path& path,
                    const ParseOptions& options = {},
                    std::vector<std::string>* warnings = nullptr);

// Canonical serialization: fixed key order, stable across runs.
std::string SerializeCoco(const DetDataset& ds);
void WriteCoco(const std::filesystem::path& path, const DetDataset& ds);

// Checks every dataset invariant; throws on the first violation.
void ValidateDataset(const DetDataset& ds);

// Fine category id -> coarse category id, plus the coarse category table.
struct CoarseLabelMap {
  std::map<int64_t, int64_t> fine_to_coarse;
  std::vector<Category> coarse_categories;

  static CoarseLabelMap Identity(const DetDataset& ds);

  // Throws ArgumentError when some category of `ds` is unmapped.
  void CheckTotal(const DetDataset& ds) const;
  int64_t Map(int64_t fine_id) const;
};

// Lines of `fine_id coarse_id coarse_name`; `#` comments allowed.
CoarseLabelMap ParseCoarseMap(std::string_view text);
CoarseLabelMap ReadCoarseMap(const std::filesystem::path& path);
std::string SerializeCoarseMap(const CoarseLabelMap& map);

// Returns a copy with every annotation relabeled to its coarse id and the
// category table replaced by the coarse table.
DetDataset RelabelCoarse(const DetDataset& ds, const CoarseLabelMap& map);

struct Episode {
  DetDataset base;
  int k = 0;
  uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// K annotated instances per category, drawn uniformly without replacement.
Episode SampleKShot(const DetDataset& ds, int k, uint64_t seed);

struct ValidationSplit {
  DetDataset val;
  // Only filled in disjoint mode: the test images not drawn into `val`,
  // with their original fine labels.
  std::optional<DetDataset> remainder;
  // Per fine category: instances wanted by the rounding rule, instances
  // drawn by the sampler, and instances present in `val` once residual
  // annotations on the induced images are included.
  std::map<int64_t, int64_t> target_counts;
  std::map<int64_t, int64_t> selected_counts;
  std::map<int64_t, int64_t> present_counts;
  // Ids of the drawn annotations, sorted.
  std::vector<int64_t> selected_annotation_ids;
  std::vector<std::string> warnings;
};

// Category-stratified sample of `test` at `rate`, relabeled with `coarse`.
ValidationSplit BuildValidationSet(const DetDataset& test, double rate,
                                   const CoarseLabelMap& coarse, uint64_t seed,
                                   bool disjoint);

// Per-category targets: floor(rate * n_c), remainders handed to the largest
// fractional parts (ties by ascending id), empty categories bumped to one.
std::map<int64_t, int64_t> StratifiedTargets(
    const std::map<int64_t, int64_t>& counts, double rate,
    std::vector<std::string>* warnings = nullptr);

struct DistributionRow {
  int64_t category_id = 0;
  std::string name;
  int64_t count_val = 0;
  int64_t count_ref = 0;
  double p_val = 0;
  double p_ref = 0;
};

struct DistributionReport {
  std::vector<DistributionRow> rows;
  double max_abs_deviation = 0;
};

DistributionReport CompareDistributions(const DetDataset& val,
                                        const DetDataset& reference);

}  // namespace ets

#endif  // ETS_DATASET_HPP_
