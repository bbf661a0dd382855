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
#include <gtest/gtest.h>

#include <cmath>

#include "ets/augment.hpp"
#include "ets/error.hpp"
#include "property_checks.hpp"
#include "test_util.hpp"

namespace ets {
namespace {

Sample Solid(int w, int h, uint8_t value,
             std::vector<LabeledBox> boxes = {}) {
  Sample s;
  s.image = Image(w, h, value);
  s.boxes = std::move(boxes);
  return s;
}

TEST(Flip, HorizontalExample) {
  const Sample s = Solid(100, 50, 0, {{{10, 5, 20, 10}, 1}});
  EXPECT_EQ(Flip(s, true, false).boxes[0].box, (BBox{70, 5, 20, 10}));
  EXPECT_EQ(Flip(s, false, true).boxes[0].box, (BBox{10, 35, 20, 10}));
  EXPECT_EQ(Flip(s, true, true).boxes[0].box, (BBox{70, 35, 20, 10}));
}

TEST(Flip, CenteredBoxIsFixedPoint) {
  const Sample s = Solid(100, 100, 0, {{{40, 40, 20, 20}, 3}});
  EXPECT_EQ(Flip(s, true, false).boxes, s.boxes);
}

TEST(Flip, MirrorsPixels) {
  Sample s = Solid(3, 2, 0);
  s.image.pixel(0, 0)[0] = 200;
  const Sample f = Flip(s, true, false);
  EXPECT_EQ(f.image.pixel(2, 0)[0], 200);
  EXPECT_EQ(f.image.pixel(0, 0)[0], 0);
}

TEST(Flip, InvolutionOnRandomSamples) {
  EXPECT_EQ(testing::CheckFlipInvolution(1000, 101), "");
}

// Textbook sector conversion, kept separate from the library's own.
void ReferenceRgbToHsv(double r, double g, double b, double& h, double& s,
                       double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  v = mx;
  s = mx == 0 ? 0 : (mx - mn) / mx;
  if (mx == mn) {
    h = 0;
    return;
  }
  const double rc = (mx - r) / (mx - mn);
  const double gc = (mx - g) / (mx - mn);
  const double bc = (mx - b) / (mx - mn);
  if (r == mx) {
    h = bc - gc;
  } else if (g == mx) {
    h = 2.0 + rc - bc;
  } else {
    h = 4.0 + gc - rc;
  }
  h = std::fmod(h / 6.0 + 1.0, 1.0);  // turns
}

void ReferenceHsvToRgb(double h, double s, double v, double& r, double& g,
                       double& b) {
  const int i = static_cast<int>(std::floor(h * 6.0)) % 6;
  const double f = h * 6.0 - std::floor(h * 6.0);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

std::array<int, 3> ReferenceShift(const uint8_t* px, int dh, int ds, int dv) {
  double h, s, v;
  ReferenceRgbToHsv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0, h, s, v);
  h = std::fmod(h + dh * 2.0 / 360.0 + 2.0, 1.0);
  s = std::clamp(s + ds / 255.0, 0.0, 1.0);
  v = std::clamp(v + dv / 255.0, 0.0, 1.0);
  double r, g, b;
  ReferenceHsvToRgb(h, s, v, r, g, b);
  auto byte = [](double c) {
    return static_cast<int>(std::clamp(std::floor(c * 255.0 + 0.5), 0.0, 255.0));
  };
  return {byte(r), byte(g), byte(b)};
}

TEST(Hsv, SinglePixelMatchesReferenceConversion) {
  RandomStream pixels(7);
  int off_by_one = 0;
  for (int i = 0; i < 2000; ++i) {
    Sample s = Solid(1, 1, 0, {{{0, 0, 1, 1}, 2}});
    for (int c = 0; c < 3; ++c) {
      s.image.pixel(0, 0)[c] = static_cast<uint8_t>(pixels.UniformInt(0, 255));
    }
    const uint64_t seed = 1000 + i;
    // Offsets drawn in hue, saturation, value order from the op stream.
    RandomStream mirror(seed);
    const int dh = static_cast<int>(mirror.UniformInt(-5, 5));
    const int ds = static_cast<int>(mirror.UniformInt(-30, 30));
    const int dv = static_cast<int>(mirror.UniformInt(-30, 30));
    RandomStream rng(seed);
    const Sample out = HsvJitter(s, HsvParams{5, 30, 30}, rng);
    EXPECT_EQ(out.boxes, s.boxes);
    const auto want = ReferenceShift(s.image.pixel(0, 0), dh, ds, dv);
    for (int c = 0; c < 3; ++c) {
      const int diff = std::abs(out.image.pixel(0, 0)[c] - want[c]);
      ASSERT_LE(diff, 1) << "pixel " << i << " channel " << c;
      off_by_one += diff;
    }
  }
  // Rounding ties may land differently; anything beyond a handful is a bug.
  EXPECT_LE(off_by_one, 10);
}

TEST(Hsv, HueWrapsAndSaturationClamps) {
  Sample red = Solid(1, 1, 0);
  red.image.pixel(0, 0)[0] = 255;
  // -10 steps of 2 degrees from 0 lands on 340 degrees: magenta-ish red.
  const Sample wrapped = HsvShift(red, -10, 0, 0);
  EXPECT_EQ(wrapped.image.pixel(0, 0)[0], 255);
  EXPECT_EQ(wrapped.image.pixel(0, 0)[1], 0);
  EXPECT_EQ(wrapped.image.pixel(0, 0)[2], 85);
  const Sample grey = HsvShift(red, 0, -255, 0);
  EXPECT_EQ(grey.image.pixel(0, 0)[0], 255);
  EXPECT_EQ(grey.image.pixel(0, 0)[1], 255);
  EXPECT_EQ(grey.image.pixel(0, 0)[2], 255);
  EXPECT_THROW(
      {
        RandomStream rng(1);
        HsvJitter(red, HsvParams{-1, 0, 0}, rng);
      },
      ArgumentError);
}

TEST(MixUp, BlackWhiteMidpointRoundsUp) {
  const Sample out = MixUp(Solid(4, 4, 0, {{{0, 0, 2, 2}, 1}}),
                           Solid(4, 4, 255, {{{1, 1, 2, 2}, 2}}), 0.5);
  for (uint8_t v : out.image.bytes()) ASSERT_EQ(v, 128);
  ASSERT_EQ(out.boxes.size(), 2u);
  EXPECT_EQ(out.boxes[1].category_id, 2);
}

TEST(MixUp, ElementwiseBlendOracle) {
  RandomStream rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Sample a = testing::RandomSample(rng, 2, 2, 1);
    const Sample b = testing::RandomSample(rng, 2, 2, 2);
    const Sample out = MixUp(a, b, 0.3);
    for (std::size_t i = 0; i < out.image.bytes().size(); ++i) {
      const double want =
          std::floor(0.3 * a.image.bytes()[i] + 0.7 * b.image.bytes()[i] + 0.5);
      ASSERT_EQ(out.image.bytes()[i], static_cast<uint8_t>(want));
    }
    EXPECT_EQ(out.boxes.size(), a.boxes.size() + b.boxes.size());
  }
}

TEST(MixUp, LetterboxesPartnerTopLeft) {
  const Sample out = MixUp(Solid(10, 10, 0), Solid(5, 10, 200, {{{0, 0, 5, 5}, 1}}),
                           0.5);
  EXPECT_EQ(out.image.pixel(2, 2)[0], 100);
  EXPECT_EQ(out.image.pixel(8, 2)[0], 57);  // half of pad value 114
  EXPECT_EQ(out.boxes[0].box, (BBox{0, 0, 5, 5}));
}

TEST(MixUp, DegenerateRatiosRejected) {
  const Sample s = Solid(2, 2, 0);
  EXPECT_THROW(MixUp(s, s, 0.0), ArgumentError);
  EXPECT_THROW(MixUp(s, s, 1.0), ArgumentError);
}

TEST(Resize, AnisotropicExample) {
  const Sample s = Solid(100, 100, 9, {{{10, 10, 20, 20}, 1}});
  const Sample out = ResizeTo(s, Size{200, 100}, false);
  EXPECT_EQ(out.image.width(), 200);
  EXPECT_EQ(out.boxes[0].box, (BBox{20, 10, 40, 20}));
}

TEST(Resize, UnitScaleIsIdentity) {
  const Sample s = testing::RandomSample(3, 30, 20, 4);
  EXPECT_EQ(ResizeByFactor(s, 1.0), s);
  EXPECT_EQ(ResizeTo(s, Size{30, 20}, true), s);
}

TEST(Resize, RoundTripWithinHalfPixel) {
  RandomStream rng(11);
  for (int i = 0; i < 200; ++i) {
    const Sample s = testing::RandomSample(rng, 20 + i % 17, 15 + i % 11, 4);
    const Sample back = ResizeByFactor(ResizeByFactor(s, 2.0), 0.5);
    ASSERT_EQ(back.boxes.size(), s.boxes.size());
    for (std::size_t k = 0; k < s.boxes.size(); ++k) {
      const BBox& a = s.boxes[k].box;
      const BBox& b = back.boxes[k].box;
      EXPECT_LE(std::abs(a.x - b.x), 0.5);
      EXPECT_LE(std::abs(a.y - b.y), 0.5);
      EXPECT_LE(std::abs(a.right() - b.right()), 0.5);
      EXPECT_LE(std::abs(a.bottom() - b.bottom()), 0.5);
    }
  }
}

TEST(Resize, KeepRatioLetterboxes) {
  const Sample s = Solid(20, 10, 50, {{{0, 0, 20, 10}, 1}});
  const Sample out = ResizeTo(s, Size{40, 40}, true);
  EXPECT_EQ(out.image.width(), 40);
  EXPECT_EQ(out.image.height(), 40);
  EXPECT_EQ(out.boxes[0].box, (BBox{0, 0, 40, 20}));
  EXPECT_EQ(out.image.pixel(5, 30)[0], 114);
  // 3x7 into 10x10 lands on a 4x10 region; the box must cover exactly it.
  const Sample odd = ResizeTo(Solid(3, 7, 50, {{{0, 0, 3, 7}, 1}}),
                              Size{10, 10}, true);
  EXPECT_EQ(odd.boxes[0].box, (BBox{0, 0, 4, 10}));
  EXPECT_EQ(odd.image.pixel(3, 5)[0], 50);
  EXPECT_EQ(odd.image.pixel(4, 5)[0], 114);
  EXPECT_THROW(ResizeTo(s, Size{0, 4}, true), ArgumentError);
  EXPECT_THROW(ResizeByFactor(s, -1), ArgumentError);
}

TEST(Crop, FullSizeIsIdentity) {
  const Sample s = testing::RandomSample(4, 30, 20, 5);
  RandomStream rng(1);
  EXPECT_EQ(Crop(s, Size{30, 20}, 114, {}, rng), s);
}

TEST(Crop, HandDerivedClip) {
  const Sample s = Solid(100, 100, 0, {{{20, 20, 20, 20}, 4}});
  // 15 * 15 / 400 = 0.5625 of the box survives.
  const Sample kept = CropAt(s, 25, 25, Size{50, 50}, 114, DropRule{1.0, 0.5});
  ASSERT_EQ(kept.boxes.size(), 1u);
  EXPECT_EQ(kept.boxes[0].box, (BBox{0, 0, 15, 15}));
  EXPECT_EQ(kept.boxes[0].category_id, 4);
  EXPECT_TRUE(
      CropAt(s, 25, 25, Size{50, 50}, 114, DropRule{1.0, 0.6}).boxes.empty());
}

TEST(Crop, BoxOutsideWindowDropped) {
  const Sample s = Solid(100, 100, 0, {{{0, 0, 10, 10}, 1}, {{60, 60, 10, 10}, 2}});
  const Sample out = CropAt(s, 50, 50, Size{50, 50}, 114, {});
  ASSERT_EQ(out.boxes.size(), 1u);
  EXPECT_EQ(out.boxes[0].box, (BBox{10, 10, 10, 10}));
}

TEST(Crop, OversizedWindowPads) {
  const Sample s = Solid(10, 10, 7, {{{2, 2, 4, 4}, 1}});
  RandomStream rng(2);
  const Sample out = Crop(s, Size{16, 12}, 114, {}, rng);
  EXPECT_EQ(out.image.width(), 16);
  EXPECT_EQ(out.image.height(), 12);
  EXPECT_EQ(out.image.pixel(15, 11)[0], 114);
  EXPECT_EQ(out.boxes, s.boxes);
}

TEST(Mosaic, SymmetricQuadrants) {
  const Sample s = Solid(100, 100, 10, {{{0, 0, 100, 100}, 1}});
  const std::vector<Sample> partners(3, s);
  RandomStream rng(3);
  MosaicParams params;
  params.center_jitter = 0;
  const Sample out = Mosaic(s, partners, params, {}, rng);
  EXPECT_EQ(out.image.width(), 200);
  ASSERT_EQ(out.boxes.size(), 4u);
  EXPECT_EQ(out.boxes[0].box, (BBox{0, 0, 100, 100}));
  EXPECT_EQ(out.boxes[1].box, (BBox{100, 0, 100, 100}));
  EXPECT_EQ(out.boxes[2].box, (BBox{0, 100, 100, 100}));
  EXPECT_EQ(out.boxes[3].box, (BBox{100, 100, 100, 100}));
}

TEST(Mosaic, ClippedAwayBoxDropsOthersUntouched) {
  const Sample s = Solid(100, 100, 10, {{{0, 0, 10, 10}, 1}, {{50, 50, 50, 50}, 2}});
  const std::vector<Sample> partners(3, Solid(100, 100, 20, {{{0, 0, 100, 100}, 3}}));
  // Center at (50, 50): the target tile spans [-50, 50), so the box in its
  // top-left corner falls off the canvas.
  const Sample out = MosaicAt(s, partners, {}, {}, 50, 50);
  ASSERT_EQ(out.boxes[0].category_id, 2);
  EXPECT_EQ(out.boxes[0].box, (BBox{0, 0, 50, 50}));
  EXPECT_EQ(out.boxes[1].box, (BBox{50, 0, 100, 50}));
  EXPECT_EQ(out.boxes.size(), 4u);
}

TEST(Mosaic, NeedsThreePartners) {
  const Sample s = Solid(4, 4, 0);
  const std::vector<Sample> two(2, s);
  RandomStream rng(1);
  EXPECT_THROW(Mosaic(s, two, {}, {}, rng), CacheUnderfillError);
}

TEST(Mosaic, AffineOracleWithinHalfPixel) {
  const auto stats = testing::CheckMosaicAffine(1000, 202);
  EXPECT_EQ(stats.error, "");
  EXPECT_GT(stats.boxes_compared, 1000);
  EXPECT_LT(stats.borderline_skipped, stats.boxes_compared / 10);
}

TEST(Properties, ContainmentAcrossOperators) {
  EXPECT_EQ(testing::CheckContainment(1000, 303), "");
}

TEST(Properties, ZeroDeltaAndZeroProbabilityIdentities) {
  EXPECT_EQ(testing::CheckIdentities(1000, 404), "");
}

TEST(Properties, SeededDeterminism) {
  EXPECT_EQ(testing::CheckDeterminism(300, 505), "");
}

TEST(Snap, LatticeRounding) {
  EXPECT_EQ(SnapCoord(0.1), std::round(0.1 * 1024) / 1024);
  EXPECT_EQ(SnapBox(BBox{1, 2, 3, 4}), (BBox{1, 2, 3, 4}));
  Sample bad = Solid(10, 10, 0, {{{8, 8, 4, 1}, 1}});
  EXPECT_NE(CheckSample(bad), "");
}

}  // namespace
}  // namespace ets
