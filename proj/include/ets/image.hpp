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
#ifndef ETS_IMAGE_HPP_
#define ETS_IMAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ets {

// 8-bit interleaved RGB image, row-major.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  uint8_t* pixel(int x, int y) {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }
  const uint8_t* pixel(int x, int y) const {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  std::vector<uint8_t>& bytes() { return data_; }
  const std::vector<uint8_t>& bytes() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> data_;
};

// PNG or JPEG in; decoded to RGB. Throws ets::Error when unreadable.
Image ReadImage(const std::filesystem::path& path);
// Lossless PNG out.
void WritePng(const std::filesystem::path& path, const Image& image);

// Bilinear resampling with half-pixel centers: output pixel (X, Y) samples
// the source at ((X + 0.5) * w / out_w - 0.5, ...), clamped at the borders.
Image ResizeBilinear(const Image& src, int out_width, int out_height);

// Copies `src` into `dst` with its top-left corner at (x, y); parts outside
// `dst` are cut off.
void Paste(const Image& src, Image& dst, int x, int y);

}  // namespace ets

#endif  // ETS_IMAGE_HPP_
