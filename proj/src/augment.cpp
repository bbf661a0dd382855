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
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include <fmt/core.h>

#include "ets/augment.hpp"

namespace ets {
namespace {

uint8_t RoundToByte(double v) {
  return static_cast<uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

// Snaps `box`, clips it to `region` and applies the drop rule.
// `reference_area` is what the visibility ratio is measured against.
std::optional<BBox> ClipBox(const BBox& box, const BBox& region,
                            double reference_area, const DropRule& drop) {
  const BBox clipped = Intersect(SnapBox(box), region);
  if (!clipped.valid()) return std::nullopt;
  const double area = clipped.area();
  if (area < drop.min_box_area) return std::nullopt;
  if (reference_area > 0 && area / reference_area < drop.min_visibility) {
    return std::nullopt;
  }
  return clipped;
}

// Scales boxes and clamps them to the new canvas without applying any drop
// rule; only boxes that vanish entirely are removed.
std::vector<LabeledBox> ScaleBoxes(const std::vector<LabeledBox>& boxes,
                                   double sx, double sy, int width,
                                   int height) {
  const BBox canvas{0, 0, static_cast<double>(width),
                    static_cast<double>(height)};
  std::vector<LabeledBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    const BBox scaled{b.box.x * sx, b.box.y * sy, b.box.w * sx, b.box.h * sy};
    const BBox clipped = Intersect(SnapBox(scaled), canvas);
    if (clipped.valid()) out.push_back({clipped, b.category_id});
  }
  return out;
}

struct Hsv {
  double h;  // degrees in [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

Hsv RgbToHsv(const uint8_t* px) {
  const double r = px[0] / 255.0;
  const double g = px[1] / 255.0;
  const double b = px[2] / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double chroma = mx - mn;
  double h = 0;
  if (chroma > 0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / chroma + 6.0, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / chroma + 2.0);
    } else {
      h = 60.0 * ((r - g) / chroma + 4.0);
    }
  }
  return Hsv{h, mx > 0 ? chroma / mx : 0.0, mx};
}

void HsvToRgb(const Hsv& hsv, uint8_t* px) {
  auto channel = [&](double n) {
    const double k = std::fmod(n + hsv.h / 60.0, 6.0);
    return hsv.v -
           hsv.v * hsv.s * std::max(0.0, std::min({k, 4.0 - k, 1.0}));
  };
  px[0] = RoundToByte(255.0 * channel(5));
  px[1] = RoundToByte(255.0 * channel(3));
  px[2] = RoundToByte(255.0 * channel(1));
}

}  // namespace

double SnapCoord(double v) { return std::round(v * kBoxLattice) / kBoxLattice; }

BBox SnapBox(const BBox& b) {
  const double x1 = SnapCoord(b.x);
  const double y1 = SnapCoord(b.y);
  return BBox{x1, y1, SnapCoord(b.right()) - x1, SnapCoord(b.bottom()) - y1};
}

std::string CheckSample(const Sample& s) {
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    const BBox& b = s.boxes[i].box;
    if (!b.valid()) {
      return fmt::format("box {} has non-positive size {}x{}", i, b.w, b.h);
    }
    if (b.x < 0 || b.y < 0 || b.right() > s.image.width() + 1e-9 ||
        b.bottom() > s.image.height() + 1e-9) {
      return fmt::format("box {} [{}, {}, {}, {}] leaves the {}x{} image", i,
                         b.x, b.y, b.w, b.h, s.image.width(),
                         s.image.height());
    }
  }
  return {};
}

Sample MosaicAt(const Sample& target, std::span<const Sample> partners,
                const MosaicParams& params, const DropRule& drop,
                int center_x, int center_y) {
  if (partners.size() < 3) {
    throw CacheUnderfillError(fmt::format(
        "mosaic needs 3 partner samples, got {}", partners.size()));
  }
  const Size base = params.base_size.value_or(
      Size{target.image.width(), target.image.height()});
  if (base.width <= 0 || base.height <= 0) {
    throw ArgumentError("mosaic base size must be positive");
  }

  Sample out;
  out.image = Image(2 * base.width, 2 * base.height, params.pad_value);
  const BBox canvas{0, 0, static_cast<double>(out.image.width()),
                    static_cast<double>(out.image.height())};

  const std::array<const Sample*, 4> sources = {&target, &partners[0],
                                                &partners[1], &partners[2]};
  for (int q = 0; q < 4; ++q) {
    const Sample& src = *sources[q];
    const double scale =
        std::min(static_cast<double>(base.width) / src.image.width(),
                 static_cast<double>(base.height) / src.image.height());
    const int sw = std::max(1, static_cast<int>(std::lround(src.image.width() * scale)));
    const int sh = std::max(1, static_cast<int>(std::lround(src.image.height() * scale)));
    const Image scaled = ResizeBilinear(src.image, sw, sh);
    const double sx = static_cast<double>(sw) / src.image.width();
    const double sy = static_cast<double>(sh) / src.image.height();

    // 0: top-left, 1: top-right, 2: bottom-left, 3: bottom-right. Each tile
    // touches the composite center with its inner corner.
    const int ox = (q == 0 || q == 2) ? center_x - sw : center_x;
    const int oy = (q == 0 || q == 1) ? center_y - sh : center_y;
    Paste(scaled, out.image, ox, oy);

    const BBox region =
        Intersect(BBox{static_cast<double>(ox), static_cast<double>(oy),
                       static_cast<double>(sw), static_cast<double>(sh)},
                  canvas);
    for (const auto& b : src.boxes) {
      const BBox moved{b.box.x * sx + ox, b.box.y * sy + oy, b.box.w * sx,
                       b.box.h * sy};
      if (auto kept = ClipBox(moved, region, moved.area(), drop)) {
        out.boxes.push_back({*kept, b.category_id});
      }
    }
  }
  return out;
}

Sample Mosaic(const Sample& target, std::span<const Sample> partners,
              const MosaicParams& params, const DropRule& drop,
              RandomStream& rng) {
  if (partners.size() < 3) {
    throw CacheUnderfillError(fmt::format(
        "mosaic needs 3 partner samples, got {}", partners.size()));
  }
  if (params.center_jitter < 0 || params.center_jitter > 1) {
    throw ArgumentError(fmt::format("mosaic center_jitter {} outside [0, 1]",
                                    params.center_jitter));
  }
  const Size base = params.base_size.value_or(
      Size{target.image.width(), target.image.height()});
  const double j = params.center_jitter;
  const int cx = static_cast<int>(rng.UniformInt(
      std::lround(base.width * (1 - j)), std::lround(base.width * (1 + j))));
  const int cy = static_cast<int>(rng.UniformInt(
      std::lround(base.height * (1 - j)), std::lround(base.height * (1 + j))));
  return MosaicAt(target, partners, params, drop, cx, cy);
}

Sample HsvShift(const Sample& s, int hue_delta, int sat_delta, int val_delta) {
  if (hue_delta == 0 && sat_delta == 0 && val_delta == 0) return s;
  Sample out = s;
  const double dh = 2.0 * hue_delta;
  const double ds = sat_delta / 255.0;
  const double dv = val_delta / 255.0;
  for (int y = 0; y < out.image.height(); ++y) {
    for (int x = 0; x < out.image.width(); ++x) {
      uint8_t* px = out.image.pixel(x, y);
      Hsv hsv = RgbToHsv(px);
      hsv.h = std::fmod(hsv.h + dh + 720.0, 360.0);
      hsv.s = std::clamp(hsv.s + ds, 0.0, 1.0);
      hsv.v = std::clamp(hsv.v + dv, 0.0, 1.0);
      HsvToRgb(hsv, px);
    }
  }
  return out;
}

Sample HsvJitter(const Sample& s, const HsvParams& params, RandomStream& rng) {
  if (params.hue < 0 || params.saturation < 0 || params.value < 0) {
    throw ArgumentError("HSV deltas must be non-negative");
  }
  const auto dh = static_cast<int>(rng.UniformInt(-params.hue, params.hue));
  const auto ds =
      static_cast<int>(rng.UniformInt(-params.saturation, params.saturation));
  const auto dv = static_cast<int>(rng.UniformInt(-params.value, params.value));
  return HsvShift(s, dh, ds, dv);
}

Sample Flip(const Sample& s, bool horizontal, bool vertical) {
  const int w = s.image.width();
  const int h = s.image.height();
  Sample out;
  out.image = Image(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = vertical ? h - 1 - y : y;
    for (int x = 0; x < w; ++x) {
      const int sx = horizontal ? w - 1 - x : x;
      std::memcpy(out.image.pixel(x, y), s.image.pixel(sx, sy),
                  Image::kChannels);
    }
  }
  out.boxes = s.boxes;
  for (auto& b : out.boxes) {
    if (horizontal) b.box.x = w - b.box.x - b.box.w;
    if (vertical) b.box.y = h - b.box.y - b.box.h;
    b.box = SnapBox(b.box);
  }
  return out;
}

Sample MixUp(const Sample& a, const Sample& b, double lambda,
             uint8_t pad_value) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw ArgumentError(
        fmt::format("mixup ratio must lie in (0, 1), got {}", lambda));
  }
  const Sample boxed =
      ResizeTo(b, Size{a.image.width(), a.image.height()}, true, pad_value);

  Sample out;
  out.image = Image(a.image.width(), a.image.height());
  const auto& pa = a.image.bytes();
  const auto& pb = boxed.image.bytes();
  auto& po = out.image.bytes();
  for (std::size_t i = 0; i < po.size(); ++i) {
    po[i] = RoundToByte(lambda * pa[i] + (1.0 - lambda) * pb[i]);
  }
  out.boxes = a.boxes;
  out.boxes.insert(out.boxes.end(), boxed.boxes.begin(), boxed.boxes.end());
  return out;
}

Sample ResizeTo(const Sample& s, Size target, bool keep_ratio,
                uint8_t pad_value) {
  if (target.width <= 0 || target.height <= 0) {
    throw ArgumentError(fmt::format("resize target {}x{} must be positive",
                                    target.width, target.height));
  }
  const int w = s.image.width();
  const int h = s.image.height();
  if (!keep_ratio) {
    Sample out;
    out.image = ResizeBilinear(s.image, target.width, target.height);
    out.boxes = ScaleBoxes(s.boxes, static_cast<double>(target.width) / w,
                           static_cast<double>(target.height) / h,
                           target.width, target.height);
    return out;
  }
  const double scale = std::min(static_cast<double>(target.width) / w,
                                static_cast<double>(target.height) / h);
  const int nw = std::clamp(static_cast<int>(std::lround(w * scale)), 1,
                            target.width);
  const int nh = std::clamp(static_cast<int>(std::lround(h * scale)), 1,
                            target.height);
  Sample out;
  if (nw == target.width && nh == target.height) {
    out.image = ResizeBilinear(s.image, nw, nh);
  } else {
    out.image = Image(target.width, target.height, pad_value);
    Paste(ResizeBilinear(s.image, nw, nh), out.image, 0, 0);
  }
  // Boxes follow the pixels, which land on the rounded nw x nh region.
  out.boxes = ScaleBoxes(s.boxes, static_cast<double>(nw) / w,
                         static_cast<double>(nh) / h, nw, nh);
  return out;
}

Sample ResizeByFactor(const Sample& s, double factor) {
  if (!(factor > 0)) {
    throw ArgumentError(fmt::format("resize factor {} must be positive", factor));
  }
  const int nw = std::max(1, static_cast<int>(std::lround(s.image.width() * factor)));
  const int nh = std::max(1, static_cast<int>(std::lround(s.image.height() * factor)));
  return ResizeTo(s, Size{nw, nh}, false);
}

Sample Resize(const Sample& s, const ResizeParams& params, RandomStream& rng) {
  if (params.target) {
    return ResizeTo(s, *params.target, params.keep_ratio, params.pad_value);
  }
  if (!(params.scale_min > 0) || params.scale_max < params.scale_min) {
    throw ArgumentError(fmt::format("invalid resize scale range [{}, {}]",
                                    params.scale_min, params.scale_max));
  }
  return ResizeByFactor(s, rng.Uniform(params.scale_min, params.scale_max));
}

Sample CropAt(const Sample& s, int x, int y, Size crop_size,
              uint8_t pad_value, const DropRule& drop) {
  if (crop_size.width <= 0 || crop_size.height <= 0) {
    throw ArgumentError(fmt::format("crop size {}x{} must be positive",
                                    crop_size.width, crop_size.height));
  }
  const int pw = std::max(s.image.width(), crop_size.width);
  const int ph = std::max(s.image.height(), crop_size.height);
  if (x < 0 || y < 0 || x + crop_size.width > pw ||
      y + crop_size.height > ph) {
    throw ArgumentError(fmt::format("crop window at ({}, {}) leaves the image",
                                    x, y));
  }
  if (x == 0 && y == 0 && crop_size.width == s.image.width() &&
      crop_size.height == s.image.height()) {
    return s;
  }

  Sample out;
  out.image = Image(crop_size.width, crop_size.height, pad_value);
  // Source pixels that fall inside the window.
  const int x1 = std::min(s.image.width(), x + crop_size.width);
  const int y1 = std::min(s.image.height(), y + crop_size.height);
  for (int yy = y; yy < y1; ++yy) {
    if (x1 > x) {
      std::memcpy(out.image.pixel(0, yy - y), s.image.pixel(x, yy),
                  static_cast<std::size_t>(x1 - x) * Image::kChannels);
    }
  }

  const BBox window{0, 0, static_cast<double>(crop_size.width),
                    static_cast<double>(crop_size.height)};
  for (const auto& b : s.boxes) {
    const BBox moved{b.box.x - x, b.box.y - y, b.box.w, b.box.h};
    if (auto kept = ClipBox(moved, window, b.box.area(), drop)) {
      out.boxes.push_back({*kept, b.category_id});
    }
  }
  return out;
}

Sample Crop(const Sample& s, Size crop_size, uint8_t pad_value,
            const DropRule& drop, RandomStream& rng) {
  const int pw = std::max(s.image.width(), crop_size.width);
  const int ph = std::max(s.image.height(), crop_size.height);
  const auto x = static_cast<int>(rng.UniformInt(0, pw - crop_size.width));
  const auto y = static_cast<int>(rng.UniformInt(0, ph - crop_size.height));
  return CropAt(s, x, y, crop_size, pad_value, drop);
}

Sample Crop(const Sample& s, const CropParams& params, const DropRule& drop,
            RandomStream& rng) {
  Size size;
  if (params.size) {
    size = *params.size;
  } else {
    if (!(params.size_ratio > 0 && params.size_ratio <= 1)) {
      throw ArgumentError(
          fmt::format("crop size_ratio {} outside (0, 1]", params.size_ratio));
    }
    size.width = std::max(
        1, static_cast<int>(std::lround(s.image.width() * params.size_ratio)));
    size.height = std::max(
        1, static_cast<int>(std::lround(s.image.height() * params.size_ratio)));
  }
  return Crop(s, size, params.pad_value, drop, rng);
}

}  // namespace ets
