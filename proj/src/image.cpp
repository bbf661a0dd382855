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
#include "ets/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <fmt/core.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ets/error.hpp"

namespace ets {

Image::Image(int width, int height, uint8_t fill)
    : width_(width),
      height_(height),
      data_(static_cast<std::size_t>(width) * height * kChannels, fill) {
  if (width < 0 || height < 0) {
    throw ArgumentError(fmt::format("invalid image size {}x{}", width, height));
  }
}

Image ReadImage(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(fmt::format("cannot decode image '{}'", path.string()));
  }
  Image out(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      uint8_t* px = out.pixel(x, y);
      px[0] = row[x][2];
      px[1] = row[x][1];
      px[2] = row[x][0];
    }
  }
  return out;
}

void WritePng(const std::filesystem::path& path, const Image& image) {
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      const uint8_t* px = image.pixel(x, y);
      row[x] = cv::Vec3b(px[2], px[1], px[0]);
    }
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), bgr, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
    throw Error(fmt::format("cannot write PNG '{}'", path.string()));
  }
}

Image ResizeBilinear(const Image& src, int out_width, int out_height) {
  if (out_width <= 0 || out_height <= 0) {
    throw ArgumentError(
        fmt::format("resize target {}x{} must be positive", out_width,
                    out_height));
  }
  if (out_width == src.width() && out_height == src.height()) return src;

  struct Tap {
    int lo;
    int hi;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double pos = (i + 0.5) * ratio - 0.5;
      pos = std::clamp(pos, 0.0, static_cast<double>(in - 1));
      const int lo = static_cast<int>(std::floor(pos));
      t[i] = Tap{lo, std::min(lo + 1, in - 1), pos - lo};
    }
    return t;
  };
  const auto xs = taps(src.width(), out_width);
  const auto ys = taps(src.height(), out_height);

  Image out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    const Tap& ty = ys[y];
    for (int x = 0; x < out_width; ++x) {
      const Tap& tx = xs[x];
      const uint8_t* p00 = src.pixel(tx.lo, ty.lo);
      const uint8_t* p01 = src.pixel(tx.hi, ty.lo);
      const uint8_t* p10 = src.pixel(tx.lo, ty.hi);
      const uint8_t* p11 = src.pixel(tx.hi, ty.hi);
      uint8_t* dst = out.pixel(x, y);
      for (int c = 0; c < Image::kChannels; ++c) {
        const double top = p00[c] + (p01[c] - p00[c]) * tx.frac;
        const double bottom = p10[c] + (p11[c] - p10[c]) * tx.frac;
        const double v = top + (bottom - top) * ty.frac;
        dst[c] = static_cast<uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

void Paste(const Image& src, Image& dst, int x, int y) {
  const int x0 = std::max(0, x);
  const int y0 = std::max(0, y);
  const int x1 = std::min(dst.width(), x + src.width());
  const int y1 = std::min(dst.height(), y + src.height());
  if (x0 >= x1 || y0 >= y1) return;
  const std::size_t row_bytes =
      static_cast<std::size_t>(x1 - x0) * Image::kChannels;
  for (int yy = y0; yy < y1; ++yy) {
    std::memcpy(dst.pixel(x0, yy), src.pixel(x0 - x, yy - y), row_bytes);
  }
}

}  // namespace ets
