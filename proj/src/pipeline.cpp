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
#include <array>
#include <set>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "ets/augment.hpp"
#include "ets/kv_file.hpp"

namespace ets {
namespace {

constexpr std::array<std::pair<AugKind, std::string_view>, 6> kKindNames = {{
    {AugKind::kMosaic, "mosaic"},
    {AugKind::kHsvJitter, "hsv"},
    {AugKind::kFlip, "flip"},
    {AugKind::kMixUp, "mixup"},
    {AugKind::kResize, "resize"},
    {AugKind::kCrop, "crop"},
}};

// Keys each section may carry besides `p`.
const std::set<std::string>& AllowedKeys(AugKind kind) {
  static const std::set<std::string> kMosaicKeys = {
      "center_jitter", "pad_value", "base_width", "base_height"};
  static const std::set<std::string> kHsvKeys = {"hue", "saturation", "value"};
  static const std::set<std::string> kFlipKeys = {"horizontal", "vertical"};
  static const std::set<std::string> kMixUpKeys = {"ratio", "pad_value"};
  static const std::set<std::string> kResizeKeys = {
      "width", "height", "scale_min", "scale_max", "keep_ratio", "pad_value"};
  static const std::set<std::string> kCropKeys = {"width", "height",
                                                  "size_ratio", "pad_value"};
  switch (kind) {
    case AugKind::kMosaic: return kMosaicKeys;
    case AugKind::kHsvJitter: return kHsvKeys;
    case AugKind::kFlip: return kFlipKeys;
    case AugKind::kMixUp: return kMixUpKeys;
    case AugKind::kResize: return kResizeKeys;
    case AugKind::kCrop: return kCropKeys;
  }
  return kHsvKeys;
}

uint8_t ReadPad(const KvSection& s, uint8_t fallback) {
  const long long v = s.GetInt("pad_value", fallback);
  if (v < 0 || v > 255) {
    throw ArgumentError(fmt::format("pad_value {} outside [0, 255]", v));
  }
  return static_cast<uint8_t>(v);
}

std::optional<Size> ReadSize(const KvSection& s, const char* wkey,
                             const char* hkey) {
  const bool has_w = s.Find(wkey).has_value();
  const bool has_h = s.Find(hkey).has_value();
  if (has_w != has_h) {
    throw ArgumentError(fmt::format("[{}] needs both '{}' and '{}'", s.name,
                                    wkey, hkey));
  }
  if (!has_w) return std::nullopt;
  return Size{static_cast<int>(s.GetInt(wkey, 0)),
              static_cast<int>(s.GetInt(hkey, 0))};
}

AugParams ParseParams(AugKind kind, const KvSection& s) {
  switch (kind) {
    case AugKind::kMosaic: {
      MosaicParams p;
      p.center_jitter = s.GetDouble("center_jitter", p.center_jitter);
      p.pad_value = ReadPad(s, p.pad_value);
      p.base_size = ReadSize(s, "base_width", "base_height");
      return p;
    }
    case AugKind::kHsvJitter: {
      HsvParams p;
      p.hue = static_cast<int>(s.GetInt("hue", p.hue));
      p.saturation = static_cast<int>(s.GetInt("saturation", p.saturation));
      p.value = static_cast<int>(s.GetInt("value", p.value));
      return p;
    }
    case AugKind::kFlip: {
      FlipParams p;
      p.horizontal = s.GetBool("horizontal", p.horizontal);
      p.vertical = s.GetBool("vertical", p.vertical);
      return p;
    }
    case AugKind::kMixUp: {
      MixUpParams p;
      p.ratio = s.GetDouble("ratio", p.ratio);
      p.pad_value = ReadPad(s, p.pad_value);
      return p;
    }
    case AugKind::kResize: {
      ResizeParams p;
      p.target = ReadSize(s, "width", "height");
      p.scale_min = s.GetDouble("scale_min", p.scale_min);
      p.scale_max = s.GetDouble("scale_max", p.scale_max);
      p.keep_ratio = s.GetBool("keep_ratio", p.keep_ratio);
      p.pad_value = ReadPad(s, p.pad_value);
      return p;
    }
    case AugKind::kCrop: {
      CropParams p;
      p.size = ReadSize(s, "width", "height");
      p.size_ratio = s.GetDouble("size_ratio", p.size_ratio);
      p.pad_value = ReadPad(s, p.pad_value);
      return p;
    }
  }
  return FlipParams{};
}

std::string FormatParams(const AugParams& params) {
  struct Visitor {
    std::string operator()(const MosaicParams& p) const {
      std::string s = fmt::format("center_jitter = {}\npad_value = {}\n",
                                  p.center_jitter, p.pad_value);
      if (p.base_size) {
        s += fmt::format("base_width = {}\nbase_height = {}\n",
                         p.base_size->width, p.base_size->height);
      }
      return s;
    }
    std::string operator()(const HsvParams& p) const {
      return fmt::format("hue = {}\nsaturation = {}\nvalue = {}\n", p.hue,
                         p.saturation, p.value);
    }
    std::string operator()(const FlipParams& p) const {
      return fmt::format("horizontal = {}\nvertical = {}\n", p.horizontal,
                         p.vertical);
    }
    std::string operator()(const MixUpParams& p) const {
      return fmt::format("ratio = {}\npad_value = {}\n", p.ratio, p.pad_value);
    }
    std::string operator()(const ResizeParams& p) const {
      std::string s;
      if (p.target) {
        s += fmt::format("width = {}\nheight = {}\n", p.target->width,
                         p.target->height);
      } else {
        s += fmt::format("scale_min = {}\nscale_max = {}\n", p.scale_min,
                         p.scale_max);
      }
      s += fmt::format("keep_ratio = {}\npad_value = {}\n", p.keep_ratio,
                       p.pad_value);
      return s;
    }
    std::string operator()(const CropParams& p) const {
      std::string s;
      if (p.size) {
        s += fmt::format("width = {}\nheight = {}\n", p.size->width,
                         p.size->height);
      } else {
        s += fmt::format("size_ratio = {}\n", p.size_ratio);
      }
      s += fmt::format("pad_value = {}\n", p.pad_value);
      return s;
    }
  };
  return std::visit(Visitor{}, params);
}

std::size_t PartnersNeeded(AugKind kind) {
  switch (kind) {
    case AugKind::kMosaic: return 3;
    case AugKind::kMixUp: return 1;
    default: return 0;
  }
}

}  // namespace

std::string_view AugKindName(AugKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<AugKind> AugKindFromName(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

AugOpSpec AugOpSpec::Default(AugKind kind, double probability) {
  AugOpSpec op;
  op.kind = kind;
  op.probability = probability;
  switch (kind) {
    case AugKind::kMosaic: op.params = MosaicParams{}; break;
    case AugKind::kHsvJitter: op.params = HsvParams{}; break;
    case AugKind::kFlip: op.params = FlipParams{}; break;
    case AugKind::kMixUp: op.params = MixUpParams{}; break;
    case AugKind::kResize: op.params = ResizeParams{}; break;
    case AugKind::kCrop: op.params = CropParams{}; break;
  }
  return op;
}

AugPipelineSpec AugPipelineSpec::Default() {
  AugPipelineSpec spec;
  spec.ops = {
      AugOpSpec::Default(AugKind::kMosaic, 0.6),
      AugOpSpec::Default(AugKind::kHsvJitter, 0.5),
      AugOpSpec::Default(AugKind::kFlip, 0.5),
      AugOpSpec::Default(AugKind::kMixUp, 0.3),
      AugOpSpec::Default(AugKind::kResize, 1.0),
      AugOpSpec::Default(AugKind::kCrop, 0.5),
  };
  return spec;
}

void AugPipelineSpec::Validate() const {
  if (drop.min_box_area < 0) {
    throw ArgumentError("min_box_area must be non-negative");
  }
  if (drop.min_visibility < 0 || drop.min_visibility > 1) {
    throw ArgumentError("min_visibility must lie in [0, 1]");
  }
  for (const auto& op : ops) {
    const auto name = AugKindName(op.kind);
    if (!(op.probability >= 0 && op.probability <= 1)) {
      throw ArgumentError(fmt::format("[{}] probability {} outside [0, 1]",
                                      name, op.probability));
    }
    if (op.kind == AugKind::kMosaic && cache_capacity < 4) {
      throw ArgumentError(fmt::format(
          "cache_capacity must be >= 4 with mosaic, got {}", cache_capacity));
    }
    if (op.kind == AugKind::kMixUp && cache_capacity < 2) {
      throw ArgumentError(fmt::format(
          "cache_capacity must be >= 2 with mixup, got {}", cache_capacity));
    }
    if (const auto* p = std::get_if<MosaicParams>(&op.params)) {
      if (p->center_jitter < 0 || p->center_jitter > 1) {
        throw ArgumentError("[mosaic] center_jitter must lie in [0, 1]");
      }
    } else if (const auto* p = std::get_if<HsvParams>(&op.params)) {
      if (p->hue < 0 || p->saturation < 0 || p->value < 0) {
        throw ArgumentError("[hsv] deltas must be non-negative");
      }
    } else if (const auto* p = std::get_if<FlipParams>(&op.params)) {
      if (!p->horizontal && !p->vertical) {
        throw ArgumentError("[flip] needs horizontal or vertical enabled");
      }
    } else if (const auto* p = std::get_if<MixUpParams>(&op.params)) {
      if (!(p->ratio > 0 && p->ratio < 1)) {
        throw ArgumentError("[mixup] ratio must lie in (0, 1)");
      }
    } else if (const auto* p = std::get_if<ResizeParams>(&op.params)) {
      if (p->target && (p->target->width <= 0 || p->target->height <= 0)) {
        throw ArgumentError("[resize] width and height must be positive");
      }
      if (!p->target && (!(p->scale_min > 0) || p->scale_max < p->scale_min)) {
        throw ArgumentError("[resize] needs 0 < scale_min <= scale_max");
      }
    } else if (const auto* p = std::get_if<CropParams>(&op.params)) {
      if (p->size && (p->size->width <= 0 || p->size->height <= 0)) {
        throw ArgumentError("[crop] width and height must be positive");
      }
      if (!p->size && !(p->size_ratio > 0 && p->size_ratio <= 1)) {
        throw ArgumentError("[crop] size_ratio must lie in (0, 1]");
      }
    }
  }
}

AugPipelineSpec ParsePipelineSpec(std::string_view text) {
  const KvDocument doc = ParseKv(text);
  AugPipelineSpec spec;
  spec.ops.clear();
  const KvSection& root = doc.Root();
  for (const auto& [key, value] : root.entries) {
    if (key != "cache_capacity" && key != "min_box_area" &&
        key != "min_visibility") {
      throw ArgumentError(fmt::format("unknown pipeline key '{}'", key));
    }
  }
  spec.cache_capacity =
      static_cast<int>(root.GetInt("cache_capacity", spec.cache_capacity));
  spec.drop.min_box_area = root.GetDouble("min_box_area", spec.drop.min_box_area);
  spec.drop.min_visibility =
      root.GetDouble("min_visibility", spec.drop.min_visibility);

  for (const auto& section : doc.sections) {
    if (section.name.empty()) continue;
    const auto kind = AugKindFromName(section.name);
    if (!kind) {
      throw ArgumentError(fmt::format("line {}: unknown operator '[{}]'",
                                      section.line, section.name));
    }
    const auto& allowed = AllowedKeys(*kind);
    for (const auto& [key, value] : section.entries) {
      if (key != "p" && !allowed.contains(key)) {
        throw ArgumentError(fmt::format("[{}] has no parameter '{}'",
                                        section.name, key));
      }
    }
    AugOpSpec op;
    op.kind = *kind;
    op.probability = section.GetDouble("p", 0.0);
    op.params = ParseParams(*kind, section);
    spec.ops.push_back(std::move(op));
  }
  spec.Validate();
  return spec;
}

AugPipelineSpec ReadPipelineSpec(const std::filesystem::path& path) {
  return ParsePipelineSpec(ReadTextFile(path));
}

std::string SerializePipelineSpec(const AugPipelineSpec& spec) {
  std::string out = fmt::format(
      "cache_capacity = {}\nmin_box_area = {}\nmin_visibility = {}\n",
      spec.cache_capacity, spec.drop.min_box_area, spec.drop.min_visibility);
  for (const auto& op : spec.ops) {
    out += fmt::format("\n[{}]\np = {}\n", AugKindName(op.kind),
                       op.probability);
    out += FormatParams(op.params);
  }
  return out;
}

void SampleCache::Push(Sample s) {
  if (capacity_ == 0) return;
  if (samples_.size() == capacity_) samples_.pop_front();
  samples_.push_back(std::move(s));
}

PipelineResult ApplyPipeline(const Sample& s, const AugPipelineSpec& spec,
                             SampleCache& cache, uint64_t master_seed,
                             uint64_t image_index) {
  PipelineResult result;
  result.sample = s;
  result.outcomes.reserve(spec.ops.size());

  for (std::size_t i = 0; i < spec.ops.size(); ++i) {
    const AugOpSpec& op = spec.ops[i];
    auto rng = RandomStream::Derive(master_seed, {image_index, i});
    if (!rng.Bernoulli(op.probability)) {
      result.outcomes.push_back(OpOutcome::kNotFired);
      continue;
    }
    const std::size_t needed = PartnersNeeded(op.kind);
    if (cache.size() < needed) {
      spdlog::warn("{} skipped for image {}: cache holds {} of {} partners",
                   AugKindName(op.kind), image_index, cache.size(), needed);
      result.outcomes.push_back(OpOutcome::kSkipped);
      continue;
    }
    std::vector<Sample> partners;
    for (std::size_t k = 0; k < needed; ++k) {
      const auto pick = static_cast<std::size_t>(
          rng.UniformInt(0, static_cast<int64_t>(cache.size()) - 1));
      partners.push_back(cache.at(pick));
    }

    Sample& cur = result.sample;
    switch (op.kind) {
      case AugKind::kMosaic:
        cur = Mosaic(cur, partners, std::get<MosaicParams>(op.params),
                     spec.drop, rng);
        break;
      case AugKind::kHsvJitter:
        cur = HsvJitter(cur, std::get<HsvParams>(op.params), rng);
        break;
      case AugKind::kFlip: {
        const auto& p = std::get<FlipParams>(op.params);
        cur = Flip(cur, p.horizontal, p.vertical);
        break;
      }
      case AugKind::kMixUp: {
        const auto& p = std::get<MixUpParams>(op.params);
        cur = MixUp(cur, partners.front(), p.ratio, p.pad_value);
        break;
      }
      case AugKind::kResize:
        cur = Resize(cur, std::get<ResizeParams>(op.params), rng);
        break;
      case AugKind::kCrop:
        cur = Crop(cur, std::get<CropParams>(op.params), spec.drop, rng);
        break;
    }
    result.outcomes.push_back(OpOutcome::kFired);
  }
  cache.Push(s);
  return result;
}

}  // namespace ets
