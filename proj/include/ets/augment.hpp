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
#ifndef ETS_AUGMENT_HPP_
#define ETS_AUGMENT_HPP_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ets/box.hpp"
#include "ets/error.hpp"
#include "ets/image.hpp"
#include "ets/rng.hpp"

namespace ets {

struct LabeledBox {
  BBox box;
  int64_t category_id = 0;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

// One training sample: pixels plus its boxes. Every box lies inside the
// image and has positive area.
struct Sample {
  Image image;
  std::vector<LabeledBox> boxes;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Box coordinates of samples live on a 1/1024-pixel lattice. Every
// geometric operator snaps its output onto it, which keeps mirror and
// translation arithmetic exact (flip twice returns the original bytes).
inline constexpr double kBoxLattice = 1024.0;

double SnapCoord(double v);
BBox SnapBox(const BBox& b);

// Empty when `s` satisfies containment and positive area, otherwise a
// description of the first offending box.
std::string CheckSample(const Sample& s);

// Boxes that lose too much to clipping are discarded.
struct DropRule {
  double min_box_area = 1.0;
  double min_visibility = 0.1;
};

// Raised when a multi-image operator is called with too few partners.
class CacheUnderfillError : public Error {
 public:
  using Error::Error;
};

struct Size {
  int width = 0;
  int height = 0;

  friend bool operator==(const Size&, const Size&) = default;
};

// ---------------------------------------------------------------------------
// Operators. Each one is pure; randomness comes from the stream argument.

struct MosaicParams {
  // Half-width of the center window as a fraction of the base size: the
  // center is drawn from [base * (1 - j), base * (1 + j)] on each axis.
  double center_jitter = 0.5;
  uint8_t pad_value = 114;
  // Quadrant size; the target's own size when unset. Canvas is twice this.
  std::optional<Size> base_size;
};

// Four-image composite on a 2x canvas. `target` fills the top-left
// quadrant and `partners` (exactly three) the others, clockwise.
Sample Mosaic(const Sample& target, std::span<const Sample> partners,
              const MosaicParams& params, const DropRule& drop,
              RandomStream& rng);

// Mosaic with the composite center given explicitly.
Sample MosaicAt(const Sample& target, std::span<const Sample> partners,
                const MosaicParams& params, const DropRule& drop,
                int center_x, int center_y);

struct HsvParams {
  // Maximum offsets on the 8-bit HSV scale: hue in 2-degree steps (0..179
  // covers the circle), saturation and value in 1/255 steps.
  int hue = 5;
  int saturation = 30;
  int value = 30;
};

Sample HsvJitter(const Sample& s, const HsvParams& params, RandomStream& rng);

// Applies fixed offsets. Hue wraps around; saturation and value clamp.
Sample HsvShift(const Sample& s, int hue_delta, int sat_delta, int val_delta);

struct FlipParams {
  bool horizontal = true;
  bool vertical = false;
};

Sample Flip(const Sample& s, bool horizontal, bool vertical);

struct MixUpParams {
  // Weight of the incoming sample; the partner gets 1 - ratio.
  double ratio = 0.5;
  uint8_t pad_value = 114;
};

// Letterboxes `b` onto `a`'s canvas (top-left anchored), blends pixels as
// round(lambda * a + (1 - lambda) * b) and unions the boxes.
Sample MixUp(const Sample& a, const Sample& b, double lambda,
             uint8_t pad_value = 114);

struct ResizeParams {
  // Fixed output size, or a scale factor drawn from [scale_min, scale_max].
  std::optional<Size> target;
  double scale_min = 0.5;
  double scale_max = 1.5;
  bool keep_ratio = true;
  uint8_t pad_value = 114;
};

Sample Resize(const Sample& s, const ResizeParams& params, RandomStream& rng);

// Resizes to `target`. With keep_ratio the image is scaled uniformly to fit
// and letterboxed (top-left anchored) into the target canvas.
Sample ResizeTo(const Sample& s, Size target, bool keep_ratio,
                uint8_t pad_value = 114);
Sample ResizeByFactor(const Sample& s, double factor);

struct CropParams {
  // Absolute crop size, or a fraction of the current image size.
  std::optional<Size> size;
  double size_ratio = 0.8;
  uint8_t pad_value = 114;
};

Sample Crop(const Sample& s, Size crop_size, uint8_t pad_value,
            const DropRule& drop, RandomStream& rng);
Sample Crop(const Sample& s, const CropParams& params, const DropRule& drop,
            RandomStream& rng);

// Crop window with a given origin. The image is padded (bottom/right) when
// the window reaches past it.
Sample CropAt(const Sample& s, int x, int y, Size crop_size,
              uint8_t pad_value, const DropRule& drop);

// ---------------------------------------------------------------------------
// Pipeline.

enum class AugKind { kMosaic, kHsvJitter, kFlip, kMixUp, kResize, kCrop };

std::string_view AugKindName(AugKind kind);
std::optional<AugKind> AugKindFromName(std::string_view name);

using AugParams = std::variant<MosaicParams, HsvParams, FlipParams,
                               MixUpParams, ResizeParams, CropParams>;

struct AugOpSpec {
  AugKind kind = AugKind::kFlip;
  double probability = 0.0;
  AugParams params;

  static AugOpSpec Default(AugKind kind, double probability);
};

struct AugPipelineSpec {
  std::vector<AugOpSpec> ops;
  int cache_capacity = 8;
  DropRule drop;

  // Throws ArgumentError on out-of-range values.
  void Validate() const;

  // Mosaic 0.6, HSV 0.5, Flip 0.5, MixUp 0.3, Resize 1.0, Crop 0.5.
  static AugPipelineSpec Default();
};

// Structured text: root keys `cache_capacity`, `min_box_area`,
// `min_visibility`, then one `[kind]` section per operator in order, each
// with `p` and that operator's parameters.
AugPipelineSpec ParsePipelineSpec(std::string_view text);
AugPipelineSpec ReadPipelineSpec(const std::filesystem::path& path);
std::string SerializePipelineSpec(const AugPipelineSpec& spec);

// FIFO ring of recent samples used as Mosaic/MixUp partners.
class SampleCache {
 public:
  explicit SampleCache(std::size_t capacity) : capacity_(capacity) {}

  void Push(Sample s);
  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Sample& at(std::size_t i) const { return samples_.at(i); }

 private:
  std::size_t capacity_;
  std::deque<Sample> samples_;
};

enum class OpOutcome { kNotFired, kFired, kSkipped };

struct PipelineResult {
  Sample sample;
  // One entry per op of the spec.
  std::vector<OpOutcome> outcomes;
};

// Runs the ops in order, each gated by its probability. The stream for op i
// of the image at `image_index` is derived from (master_seed, image_index,
// i), so results do not depend on which worker processed which image. The
// input sample is pushed into `cache` afterwards.
PipelineResult ApplyPipeline(const Sample& s, const AugPipelineSpec& spec,
                             SampleCache& cache, uint64_t master_seed,
                             uint64_t image_index);

}  // namespace ets

#endif  // ETS_AUGMENT_HPP_
