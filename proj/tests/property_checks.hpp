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
#ifndef ETS_TESTS_PROPERTY_CHECKS_HPP_
#define ETS_TESTS_PROPERTY_CHECKS_HPP_

// Randomized augmentation properties. Each check runs `n` cases and returns
// an empty string on success, else a description of the first failure.

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "ets/augment.hpp"
#include "test_util.hpp"

namespace ets::testing {

inline Sample RandomSmallSample(RandomStream& rng) {
  const int w = static_cast<int>(rng.UniformInt(6, 40));
  const int h = static_cast<int>(rng.UniformInt(6, 40));
  return RandomSample(rng, w, h, static_cast<int>(rng.UniformInt(0, 6)));
}

inline std::map<int64_t, int> CategoryHistogram(const Sample& s) {
  std::map<int64_t, int> out;
  for (const auto& b : s.boxes) ++out[b.category_id];
  return out;
}

// True when every category of `out` occurs in `in` at most as often.
inline bool CategoriesWithin(const Sample& out,
                             const std::map<int64_t, int>& in) {
  for (const auto& [c, n] : CategoryHistogram(out)) {
    const auto it = in.find(c);
    if (it == in.end() || it->second < n) return false;
  }
  return true;
}

inline std::string CheckFlipInvolution(int n, uint64_t seed) {
  RandomStream rng(seed);
  for (int i = 0; i < n; ++i) {
    const Sample s = RandomSmallSample(rng);
    const int mode = static_cast<int>(rng.UniformInt(1, 3));
    const bool hz = mode & 1;
    const bool vt = mode & 2;
    if (Flip(Flip(s, hz, vt), hz, vt) != s) {
      return fmt::format("case {}: flip({}, {}) twice differs", i, hz, vt);
    }
  }
  return {};
}

// Every operator on random inputs: containment, category preservation and
// count bounds.
inline std::string CheckContainment(int n, uint64_t seed) {
  RandomStream rng(seed);
  const DropRule drop;
  for (int i = 0; i < n; ++i) {
    const Sample s = RandomSmallSample(rng);
    std::array<Sample, 3> partners = {RandomSmallSample(rng),
                                      RandomSmallSample(rng),
                                      RandomSmallSample(rng)};
    auto in_hist = CategoryHistogram(s);
    auto all_hist = in_hist;
    std::size_t all_count = s.boxes.size();
    for (const auto& p : partners) {
      for (const auto& [c, k] : CategoryHistogram(p)) all_hist[c] += k;
      all_count += p.boxes.size();
    }

    struct Case {
      const char* name;
      Sample out;
      const std::map<int64_t, int>* allowed;
      std::size_t max_count;
      bool exact_count;
    };
    auto ab_hist = in_hist;
    for (const auto& [c, k] : CategoryHistogram(partners[0])) ab_hist[c] += k;
    MosaicParams mp;
    mp.center_jitter = rng.Uniform(0, 1);
    HsvParams hp{static_cast<int>(rng.UniformInt(0, 90)),
                 static_cast<int>(rng.UniformInt(0, 255)),
                 static_cast<int>(rng.UniformInt(0, 255))};
    ResizeParams rp;
    rp.keep_ratio = rng.Bernoulli(0.5);
    if (rng.Bernoulli(0.5)) {
      rp.target = Size{static_cast<int>(rng.UniformInt(3, 60)),
                       static_cast<int>(rng.UniformInt(3, 60))};
    } else {
      rp.scale_min = 0.3;
      rp.scale_max = 2.0;
    }
    CropParams cp;
    if (rng.Bernoulli(0.5)) {
      cp.size = Size{static_cast<int>(rng.UniformInt(2, 50)),
                     static_cast<int>(rng.UniformInt(2, 50))};
    } else {
      cp.size_ratio = rng.Uniform(0.2, 1.0);
    }
    std::vector<Case> cases;
    cases.push_back({"mosaic", Mosaic(s, partners, mp, drop, rng), &all_hist,
                     all_count, false});
    cases.push_back({"hsv", HsvJitter(s, hp, rng), &in_hist, s.boxes.size(),
                     true});
    cases.push_back({"flip", Flip(s, rng.Bernoulli(0.5), true), &in_hist,
                     s.boxes.size(), true});
    cases.push_back({"mixup",
                     MixUp(s, partners[0], rng.Uniform(0.05, 0.95)),
                     &ab_hist, s.boxes.size() + partners[0].boxes.size(),
                     false});
    cases.push_back({"resize", Resize(s, rp, rng), &in_hist, s.boxes.size(),
                     false});
    cases.push_back({"crop", Crop(s, cp, drop, rng), &in_hist, s.boxes.size(),
                     false});
    for (const auto& c : cases) {
      if (const std::string err = CheckSample(c.out); !err.empty()) {
        return fmt::format("case {} {}: {}", i, c.name, err);
      }
      if (!CategoriesWithin(c.out, *c.allowed)) {
        return fmt::format("case {} {}: category ids changed", i, c.name);
      }
      if (c.out.boxes.size() > c.max_count ||
          (c.exact_count && c.out.boxes.size() != c.max_count)) {
        return fmt::format("case {} {}: {} boxes, bound {}", i, c.name,
                           c.out.boxes.size(), c.max_count);
      }
    }
  }
  return {};
}

inline AugPipelineSpec ZeroProbabilitySpec() {
  AugPipelineSpec spec = AugPipelineSpec::Default();
  for (auto& op : spec.ops) op.probability = 0.0;
  return spec;
}

inline std::string CheckIdentities(int n, uint64_t seed) {
  RandomStream rng(seed);
  const AugPipelineSpec zero = ZeroProbabilitySpec();
  SampleCache cache(zero.cache_capacity);
  for (int i = 0; i < n; ++i) {
    const Sample s = RandomSmallSample(rng);
    if (HsvShift(s, 0, 0, 0) != s) {
      return fmt::format("case {}: zero HSV shift changed the sample", i);
    }
    if (HsvJitter(s, HsvParams{0, 0, 0}, rng) != s) {
      return fmt::format("case {}: zero-delta HSV jitter changed it", i);
    }
    if (ApplyPipeline(s, zero, cache, seed, i).sample != s) {
      return fmt::format("case {}: zero-probability pipeline changed it", i);
    }
  }
  return {};
}

inline AugPipelineSpec EveryOpSpec() {
  AugPipelineSpec spec = AugPipelineSpec::Default();
  for (auto& op : spec.ops) op.probability = 0.7;
  return spec;
}

// Runs the same image stream through two fresh caches and compares bytes.
inline std::string CheckDeterminism(int n, uint64_t seed) {
  const AugPipelineSpec spec = EveryOpSpec();
  SampleCache a(spec.cache_capacity);
  SampleCache b(spec.cache_capacity);
  RandomStream rng_a(seed);
  RandomStream rng_b(seed);
  for (int i = 0; i < n; ++i) {
    const Sample sa = RandomSmallSample(rng_a);
    const Sample sb = RandomSmallSample(rng_b);
    const PipelineResult ra = ApplyPipeline(sa, spec, a, seed, i);
    const PipelineResult rb = ApplyPipeline(sb, spec, b, seed, i);
    if (ra.sample != rb.sample || ra.outcomes != rb.outcomes) {
      return fmt::format("case {}: pipeline rerun differs", i);
    }
    if (const std::string err = CheckSample(ra.sample); !err.empty()) {
      return fmt::format("case {} pipeline: {}", i, err);
    }
    RandomStream op_a = RandomStream::Derive(seed, {static_cast<uint64_t>(i)});
    RandomStream op_b = RandomStream::Derive(seed, {static_cast<uint64_t>(i)});
    const std::array<Sample, 3> partners = {sa, ra.sample, sa};
    if (Mosaic(sa, partners, {}, {}, op_a) !=
        Mosaic(sa, partners, {}, {}, op_b)) {
      return fmt::format("case {}: mosaic rerun differs", i);
    }
  }
  return {};
}

// Box remap of one mosaic tile written as a homogeneous transform:
// translate(ox, oy) * scale(kx, ky), applied to both corners.
struct AffineOracleBox {
  BBox box;
  double area = 0;
  double visibility = 0;
};

inline std::vector<AffineOracleBox> MosaicOracle(
    const std::array<const Sample*, 4>& src, int base_w, int base_h, int cx,
    int cy) {
  std::vector<AffineOracleBox> out;
  for (int q = 0; q < 4; ++q) {
    const Sample& s = *src[q];
    const double scale = std::min(static_cast<double>(base_w) / s.image.width(),
                                  static_cast<double>(base_h) / s.image.height());
    const double tw = std::max(1.0, std::round(s.image.width() * scale));
    const double th = std::max(1.0, std::round(s.image.height() * scale));
    const double ox = (q % 2 == 0) ? cx - tw : cx;
    const double oy = (q < 2) ? cy - th : cy;
    // Pixels land on the rounded tile, so the content map is per axis.
    const double kx = tw / s.image.width();
    const double ky = th / s.image.height();
    const double m[3][3] = {{kx, 0, ox}, {0, ky, oy}, {0, 0, 1}};
    // Visible part of the tile.
    const double vx0 = std::max(0.0, ox);
    const double vy0 = std::max(0.0, oy);
    const double vx1 = std::min(2.0 * base_w, ox + tw);
    const double vy1 = std::min(2.0 * base_h, oy + th);
    for (const auto& b : s.boxes) {
      const double p0[3] = {b.box.x, b.box.y, 1};
      const double p1[3] = {b.box.x + b.box.w, b.box.y + b.box.h, 1};
      double q0[3] = {0, 0, 0};
      double q1[3] = {0, 0, 0};
      for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) {
          q0[r] += m[r][k] * p0[k];
          q1[r] += m[r][k] * p1[k];
        }
      }
      const double full = (q1[0] - q0[0]) * (q1[1] - q0[1]);
      const double x0 = std::max(q0[0], vx0);
      const double y0 = std::max(q0[1], vy0);
      const double x1 = std::min(q1[0], vx1);
      const double y1 = std::min(q1[1], vy1);
      AffineOracleBox o;
      o.box = BBox{x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
      o.area = o.box.w * o.box.h;
      o.visibility = full > 0 ? o.area / full : 0;
      out.push_back(o);
    }
  }
  return out;
}

struct MosaicOracleStats {
  std::string error;
  int boxes_compared = 0;
  int borderline_skipped = 0;
  double max_error = 0;
};

// Compares mosaic output boxes against the transform oracle. An oracle box
// within a hair of a drop threshold may go either way, since lattice
// snapping can legitimately tip it.
inline MosaicOracleStats CheckMosaicAffine(int n, uint64_t seed,
                                           double tolerance = 0.5) {
  MosaicOracleStats stats;
  RandomStream rng(seed);
  const DropRule drop;
  for (int i = 0; i < n; ++i) {
    const Sample target = RandomSmallSample(rng);
    const std::array<Sample, 3> partners = {RandomSmallSample(rng),
                                            RandomSmallSample(rng),
                                            RandomSmallSample(rng)};
    const int bw = target.image.width();
    const int bh = target.image.height();
    const int cx = static_cast<int>(rng.UniformInt(bw / 2, bw + bw / 2));
    const int cy = static_cast<int>(rng.UniformInt(bh / 2, bh + bh / 2));
    const Sample out = MosaicAt(target, partners, {}, drop, cx, cy);

    const auto oracle = MosaicOracle(
        {&target, &partners[0], &partners[1], &partners[2]}, bw, bh, cx, cy);
    // Order-preserving alignment: each clearly kept oracle box takes one
    // output box within tolerance, borderline boxes may take one or none,
    // and every output box must be taken. Cost is the summed error.
    enum class Role { kDropped, kOptional, kRequired };
    std::vector<Role> role(oracle.size(), Role::kDropped);
    for (std::size_t k = 0; k < oracle.size(); ++k) {
      const auto& o = oracle[k];
      if (o.area <= 0) continue;
      const bool borderline =
          std::abs(o.area - drop.min_box_area) < 1.0 ||
          std::abs(o.visibility - drop.min_visibility) < 0.02;
      const bool kept =
          o.area >= drop.min_box_area && o.visibility >= drop.min_visibility;
      if (borderline) {
        role[k] = Role::kOptional;
      } else if (kept) {
        role[k] = Role::kRequired;
      }
    }
    const auto edge_error = [&](std::size_t k, std::size_t j) {
      const BBox& e = oracle[k].box;
      const BBox& g = out.boxes[j].box;
      return std::max({std::abs(e.x - g.x), std::abs(e.y - g.y),
                       std::abs(e.right() - g.right()),
                       std::abs(e.bottom() - g.bottom())});
    };
    const std::size_t K = oracle.size();
    const std::size_t J = out.boxes.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp(K + 1, std::vector<double>(J + 1, kInf));
    dp[0][0] = 0;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j <= J; ++j) {
        if (dp[k][j] == kInf) continue;
        if (role[k] != Role::kRequired) {
          dp[k + 1][j] = std::min(dp[k + 1][j], dp[k][j]);
        }
        if (role[k] != Role::kDropped && j < J) {
          const double err = edge_error(k, j);
          if (err <= tolerance) {
            dp[k + 1][j + 1] = std::min(dp[k + 1][j + 1], dp[k][j] + err);
          }
        }
      }
    }
    if (dp[K][J] == kInf) {
      std::string oracle_text;
      for (std::size_t k = 0; k < K; ++k) {
        if (role[k] == Role::kDropped) continue;
        const BBox& e = oracle[k].box;
        oracle_text += fmt::format(" {}[{:.3f} {:.3f} {:.3f} {:.3f}]",
                                   role[k] == Role::kRequired ? "" : "?",
                                   e.x, e.y, e.w, e.h);
      }
      std::string out_text;
      for (const auto& b : out.boxes) {
        out_text += fmt::format(" [{:.3f} {:.3f} {:.3f} {:.3f}]", b.box.x,
                                b.box.y, b.box.w, b.box.h);
      }
      stats.error = fmt::format("case {}: no alignment; oracle{} vs output{}",
                                i, oracle_text, out_text);
      return stats;
    }
    // Walk back to collect per-box statistics.
    std::size_t j = J;
    for (std::size_t k = K; k-- > 0;) {
      if (role[k] == Role::kOptional) ++stats.borderline_skipped;
      if (j > 0 && role[k] != Role::kDropped && dp[k][j - 1] != kInf &&
          edge_error(k, j - 1) <= tolerance &&
          dp[k][j - 1] + edge_error(k, j - 1) == dp[k + 1][j]) {
        if (role[k] == Role::kRequired) {
          stats.max_error = std::max(stats.max_error, edge_error(k, j - 1));
          ++stats.boxes_compared;
        }
        --j;
      }
    }
  }
  return stats;
}

// Gate frequencies of each op over `draws` consecutive images. A skipped op
// (cache still warming up) counts as fired: the gate opened.
inline std::vector<double> MeasureFiringRates(const AugPipelineSpec& spec,
                                              int draws, uint64_t seed) {
  SampleCache cache(spec.cache_capacity);
  std::vector<int> fired(spec.ops.size(), 0);
  RandomStream rng(seed);
  const Sample tiny = RandomSample(rng, 8, 6, 2);
  for (int i = 0; i < draws; ++i) {
    const PipelineResult r = ApplyPipeline(tiny, spec, cache, seed, i);
    for (std::size_t k = 0; k < r.outcomes.size(); ++k) {
      if (r.outcomes[k] != OpOutcome::kNotFired) ++fired[k];
    }
  }
  std::vector<double> rates;
  for (int f : fired) rates.push_back(static_cast<double>(f) / draws);
  return rates;
}

}  // namespace ets::testing

#endif  // ETS_TESTS_PROPERTY_CHECKS_HPP_
