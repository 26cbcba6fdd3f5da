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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bofkit/decode.hpp"
#include "bofkit/random.hpp"

namespace bofkit {

// Dense C x H x W map, channel-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width) {
    if (channels <= 0 || height <= 0 || width <= 0) {
      throw std::invalid_argument("FeatureMap: dimensions must be positive");
    }
    values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }

  double& at(int c, int y, int x) { return values_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values_[index(c, y, x)]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const FeatureMap& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

inline const std::vector<int>& default_spp_kernels() {
  static const std::vector<int> kernels{1, 5, 9, 13};
  return kernels;
}

// Stride-1 k x k max pooling of every plane. Windows are truncated at the
// border, which equals padding with -inf, so spatial size is preserved.
// Computed separably (row max, then column max).
inline FeatureMap max_pool_same(const FeatureMap& f, int k) {
  if (k <= 0 || k % 2 == 0) throw std::invalid_argument("max_pool_same: kernel must be odd and positive");
  const int r = k / 2;
  const int h = f.height();
  const int w = f.width();
  FeatureMap rows(f.channels(), h, w);
  FeatureMap out(f.channels(), h, w);
  for (int c = 0; c < f.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double m = -std::numeric_limits<double>::infinity();
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) m = std::max(m, f.at(c, y, xx));
        rows.at(c, y, x) = m;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double m = -std::numeric_limits<double>::infinity();
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) m = std::max(m, rows.at(c, yy, x));
        out.at(c, y, x) = m;
      }
    }
  }
  return out;
}

// Spatial pyramid pooling: one same-size max pool per kernel, concatenated
// along channels in kernel order.
inline FeatureMap spp(const FeatureMap& f, std::span<const int> kernels) {
  if (kernels.empty()) throw std::invalid_argument("spp: no kernels");
  for (int k : kernels) {
    if (k <= 0 || k % 2 == 0) throw std::invalid_argument("spp: kernels must be odd and positive");
  }
  FeatureMap out(f.channels() * static_cast<int>(kernels.size()), f.height(), f.width());
  auto dst = out.values().begin();
  for (int k : kernels) {
    const FeatureMap pooled = max_pool_same(f, k);
    dst = std::copy(pooled.values().begin(), pooled.values().end(), dst);
  }
  return out;
}

inline FeatureMap spp(const FeatureMap& f) { return spp(f, default_spp_kernels()); }

// ---------------------------------------------------------------------------
// DropBlock

struct DropBlockMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> keep;  // 1 = keep, row-major
  double scale = 1.0;              // total / kept, for rescaling activations

  bool kept(int y, int x) const { return keep[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t kept_count() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
  }
};

// Seed rate for a target keep probability.
inline double dropblock_gamma(int height, int width, int block_size, double keep_prob) {
  const double valid = static_cast<double>(height - block_size + 1) * (width - block_size + 1);
  return (1.0 - keep_prob) / (static_cast<double>(block_size) * block_size) *
         (static_cast<double>(height) * width) / valid;
}

// Seeds are drawn on positions where a full block fits; each seed zeroes the
// block_size x block_size square whose top-left corner it marks.
inline DropBlockMask dropblock_mask(int height, int width, int block_size, double keep_prob,
                                    Rng& rng) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("dropblock_mask: sizes must be positive");
  if (block_size <= 0 || block_size > std::min(height, width)) {
    throw std::invalid_argument("dropblock_mask: block_size must lie in [1, min(height, width)]");
  }
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("dropblock_mask: keep_prob must lie in (0, 1]");
  }
  DropBlockMask m{height, width,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1), 1.0};
  if (keep_prob == 1.0) return m;

  const double gamma = dropblock_gamma(height, width, block_size, keep_prob);
  for (int y = 0; y + block_size <= height; ++y) {
    for (int x = 0; x + block_size <= width; ++x) {
      if (!rng.bernoulli(gamma)) continue;
      for (int dy = 0; dy < block_size; ++dy) {
        std::fill_n(m.keep.begin() + static_cast<std::ptrdiff_t>((y + dy) * width + x), block_size,
                    std::uint8_t{0});
      }
    }
  }
  const std::size_t kept = m.kept_count();
  m.scale = kept > 0 ? static_cast<double>(m.keep.size()) / static_cast<double>(kept) : 0.0;
  return m;
}

// Multiplies every channel by the mask and its scale factor.
inline FeatureMap apply_dropblock(const FeatureMap& f, const DropBlockMask& m) {
  if (m.height != f.height() || m.width != f.width()) {
    throw std::invalid_argument("apply_dropblock: mask shape does not match feature map");
  }
  FeatureMap out = f;
  for (int c = 0; c < f.channels(); ++c) {
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) out.at(c, y, x) = m.kept(y, x) ? f.at(c, y, x) * m.scale : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention and aggregation

// Point-wise attention: every element gated by the sigmoid of its own logit.
inline FeatureMap pointwise_sam(const FeatureMap& f, const FeatureMap& attention_logits) {
  if (!f.same_shape(attention_logits)) {
    throw std::invalid_argument("pointwise_sam: feature map and logits differ in shape");
  }
  FeatureMap out = f;
  auto& v = out.values();
  const auto& a = attention_logits.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= sigmoid(a[i]);
  return out;
}

enum class PanMode { kAdd, kConcat };

inline FeatureMap pan_aggregate(const FeatureMap& a, const FeatureMap& b, PanMode mode) {
  if (mode == PanMode::kAdd) {
    if (!a.same_shape(b)) throw std::invalid_argument("pan_aggregate: add requires identical shapes");
    FeatureMap out = a;
    for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += b.values()[i];
    return out;
  }
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("pan_aggregate: concat requires matching height and width");
  }
  FeatureMap out(a.channels() + b.channels(), a.height(), a.width());
  auto it = std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), it);
  return out;
}

// Channels [first, first + count).
inline FeatureMap channel_slice(const FeatureMap& f, int first, int count) {
  if (first < 0 || count <= 0 || first + count > f.channels()) {
    throw std::out_of_range("channel_slice: channel range out of bounds");
  }
  FeatureMap out(count, f.height(), f.width());
  const auto begin = f.values().begin() + static_cast<std::ptrdiff_t>(first * f.plane_size());
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(count * f.plane_size()), out.values().begin());
  return out;
}

// ---------------------------------------------------------------------------
// Activations

struct Activation {
  enum class Kind { kMish, kSwish, kLeakyRelu };
  Kind kind = Kind::kMish;
  double alpha = 0.1;  // negative slope, leaky ReLU only

  static Activation mish() { return {Kind::kMish, 0.0}; }
  static Activation swish() { return {Kind::kSwish, 0.0}; }
  static Activation leaky_relu(double alpha = 0.1) { return {Kind::kLeakyRelu, alpha}; }
};

struct ActivationValue {
  double value = 0.0;
  double derivative = 0.0;
};

// ln(1 + e^x), linear above 20 where the correction is below double precision.
inline double softplus(double x) {
  if (x > 20.0) return x;
  return std::log1p(std::exp(x));
}

inline ActivationValue activate(double x, const Activation& act) {
  switch (act.kind) {
    case Activation::Kind::kMish: {
      const double t = std::tanh(softplus(x));
      const double s = sigmoid(x);
      return {x * t, t + x * (1.0 - t * t) * s};
    }
    case Activation::Kind::kSwish: {
      const double s = sigmoid(x);
      return {x * s, s + x * s * (1.0 - s)};
    }
    case Activation::Kind::kLeakyRelu:
      return x >= 0.0 ? ActivationValue{x, 1.0} : ActivationValue{act.alpha * x, act.alpha};
  }
  return {};
}

inline double mish(double x) { return activate(x, Activation::mish()).value; }
inline double swish(double x) { return activate(x, Activation::swish()).value; }

}  // namespace bofkit
