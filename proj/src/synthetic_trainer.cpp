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
#include <cmath>
#include <optional>
#include <unordered_map>

#include "ets/rng.hpp"
#include "ets/runner.hpp"

namespace ets {
namespace {

std::optional<double> AsNumber(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

constexpr uint64_t kSyntheticStream = 0x73796e7468ULL;

}  // namespace

double SyntheticObjective::Quality(const TrialConfig& trial) const {
  double q = 1.0;
  for (const auto& [axis, value] : trial.assignment) {
    auto it = targets.find(axis);
    if (it == targets.end()) continue;
    const auto v = AsNumber(value);
    const auto t = AsNumber(it->second);
    if (v && t) {
      const double s = *t != 0 ? std::abs(*t) : 1.0;
      const double d = (*v - *t) / s;
      q *= 1.0 / (1.0 + d * d);
    } else {
      q *= value == it->second ? 1.0 : 0.5;
    }
  }
  return q;
}

Detections SyntheticTrainer(const TrialConfig& trial, const DetDataset& valset,
                            uint64_t seed, const SyntheticObjective& objective) {
  const double q = std::clamp(objective.Quality(trial), 0.0, 1.0);
  const double m = (1.0 - q) * objective.noise_scale;
  auto rng = RandomStream::Derive(seed, {kSyntheticStream});

  std::unordered_map<int64_t, const ImageRecord*> images;
  for (const auto& img : valset.images) images.emplace(img.id, &img);

  Detections dets;
  dets.reserve(valset.annotations.size());
  for (const auto& a : valset.annotations) {
    if (a.iscrowd) continue;
    // Five draws per box regardless of q, so trials share noise.
    const double ux = rng.Uniform(-1, 1);
    const double uy = rng.Uniform(-1, 1);
    const double uw = rng.Uniform(-1, 1);
    const double uh = rng.Uniform(-1, 1);
    const double us = rng.Uniform();

    const BBox& g = a.bbox;
    const double w = g.w * std::exp(uw * m);
    const double h = g.h * std::exp(uh * m);
    BBox b{g.x + ux * m * g.w + (g.w - w) / 2, g.y + uy * m * g.h + (g.h - h) / 2,
           w, h};

    const ImageRecord* img = images.at(a.image_id);
    const double x1 = std::clamp(b.x, 0.0, img->width - 1.0);
    const double y1 = std::clamp(b.y, 0.0, img->height - 1.0);
    const double x2 = std::clamp(b.right(), x1 + 1.0, static_cast<double>(img->width));
    const double y2 = std::clamp(b.bottom(), y1 + 1.0, static_cast<double>(img->height));
    if (m > 0) b = BBox{x1, y1, x2 - x1, y2 - y1};

    dets.push_back(Detection{a.image_id, a.category_id, b, q + (1.0 - q) * us});
  }
  return dets;
}

}  // namespace ets
