// Copyright 2026 The bofkit Authors. All Rights Reserved.
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

#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bofkit/geometry.hpp"

namespace bofkit {

// 3-channel image with intensities in [0, 1], stored row-major and
// channel-interleaved (RGBRGB...).
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  ImageTensor() = default;
  ImageTensor(int width, int height, float fill = 0.0f)
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("ImageTensor: dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  float& at(int x, int y, int c) { return pixels_[offset(x, y, c)]; }
  float at(int x, int y, int c) const { return pixels_[offset(x, y, c)]; }

  std::vector<float>& pixels() { return pixels_; }
  const std::vector<float>& pixels() const { return pixels_; }

  void clamp() {
    for (float& v : pixels_) v = std::clamp(v, 0.0f, 1.0f);
  }

  bool same_shape(const ImageTensor& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t offset(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

// Ground-truth label. weight < 1 marks a mixed label (MixUp/CutMix).
struct Label {
  Box box;
  int class_id = 0;
  double weight = 1.0;

  friend bool operator==(const Label&, const Label&) = default;
};

struct Sample {
  ImageTensor image;
  std::vector<Label> labels;
};

// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long long area() const {
    return x1 > x0 && y1 > y0 ? static_cast<long long>(width()) * height() : 0;
  }
  Box box() const { return {double(x0), double(y0), double(x1), double(y1)}; }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

}  // namespace bofkit
