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

// Detection-aware augmentation. Every operation takes its randomness from an
// explicit Rng and keeps pixels in [0, 1] and boxes inside the image.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "bofkit/geometry.hpp"
#include "bofkit/image.hpp"
#include "bofkit/random.hpp"

namespace bofkit {

// Boxes whose visible part is smaller than this fraction of their transformed
// area are dropped after clipping.
inline constexpr double kDefaultMinAreaFrac = 0.1;

// Clips each box to `region` and drops labels that lose too much of their area
// (or vanish entirely). Boxes are not translated.
inline std::vector<Label> clip_labels(std::span<const Label> labels, const Box& region,
                                      double min_area_frac = kDefaultMinAreaFrac) {
  std::vector<Label> out;
  out.reserve(labels.size());
  for (const Label& l : labels) {
    const Box clipped{std::max(l.box.x_min, region.x_min), std::max(l.box.y_min, region.y_min),
                      std::min(l.box.x_max, region.x_max), std::min(l.box.y_max, region.y_max)};
    if (!clipped.valid()) continue;
    const double full = l.box.area();
    const double visible = clipped.area();
    if (full > 0.0 && (visible <= 0.0 || visible < min_area_frac * full)) continue;
    out.push_back({clipped, l.class_id, l.weight});
  }
  return out;
}

// Nearest-neighbour source index for destination pixel `dst` when `src_len`
// pixels are stretched over `dst_len`.
inline int nearest_source(int dst, int src_len, int dst_len) {
  const auto s = static_cast<int>((dst + 0.5) * src_len / dst_len);
  return std::clamp(s, 0, src_len - 1);
}

// Stretches a sample to new dimensions; boxes scale with the image.
inline Sample resize(const Sample& s, int new_w, int new_h) {
  Sample out{ImageTensor(new_w, new_h), {}};
  const ImageTensor& src = s.image;
  for (int y = 0; y < new_h; ++y) {
    const int sy = nearest_source(y, src.height(), new_h);
    for (int x = 0; x < new_w; ++x) {
      const int sx = nearest_source(x, src.width(), new_w);
      for (int c = 0; c < ImageTensor::kChannels; ++c) out.image.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  const double kx = static_cast<double>(new_w) / src.width();
  const double ky = static_cast<double>(new_h) / src.height();
  std::vector<Label> moved;
  for (const Label& l : s.labels) {
    moved.push_back({{l.box.x_min * kx, l.box.y_min * ky, l.box.x_max * kx, l.box.y_max * ky},
                     l.class_id, l.weight});
  }
  out.labels = clip_labels(moved, {0.0, 0.0, double(new_w), double(new_h)}, 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Mosaic

struct MosaicOptions {
  // The split point is drawn uniformly from [lo, hi] times each output side.
  double split_lo = 0.25;
  double split_hi = 0.75;
  double min_area_frac = kDefaultMinAreaFrac;
};

// Composes four samples into one canvas split at (split_x, split_y). Sources
// are stretched to fill the top-left, top-right, bottom-left and bottom-right
// quadrants in that order.
inline Sample mosaic_at(std::span<const Sample> samples, int out_w, int out_h, int split_x,
                        int split_y, double min_area_frac = kDefaultMinAreaFrac) {
  if (samples.size() != 4) throw std::invalid_argument("mosaic: exactly 4 samples required");
  if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("mosaic: output size must be positive");
  if (split_x <= 0 || split_x >= out_w || split_y <= 0 || split_y >= out_h) {
    throw std::invalid_argument("mosaic: split point must lie strictly inside the canvas");
  }

  const std::array<PixelRect, 4> quadrants{{{0, 0, split_x, split_y},
                                            {split_x, 0, out_w, split_y},
                                            {0, split_y, split_x, out_h},
                                            {split_x, split_y, out_w, out_h}}};
  Sample out{ImageTensor(out_w, out_h), {}};
  for (std::size_t q = 0; q < 4; ++q) {
    const Sample& src = samples[q];
    const PixelRect& r = quadrants[q];
    const int qw = r.width();
    const int qh = r.height();
    for (int y = 0; y < qh; ++y) {
      const int sy = nearest_source(y, src.image.height(), qh);
      for (int x = 0; x < qw; ++x) {
        const int sx = nearest_source(x, src.image.width(), qw);
        for (int c = 0; c < ImageTensor::kChannels; ++c) {
          out.image.at(r.x0 + x, r.y0 + y, c) = src.image.at(sx, sy, c);
        }
      }
    }
    const double kx = static_cast<double>(qw) / src.image.width();
    const double ky = static_cast<double>(qh) / src.image.height();
    std::vector<Label> moved;
    moved.reserve(src.labels.size());
    for (const Label& l : src.labels) {
      moved.push_back({{l.box.x_min * kx + r.x0, l.box.y_min * ky + r.y0,
                        l.box.x_max * kx + r.x0, l.box.y_max * ky + r.y0},
                       l.class_id, l.weight});
    }
    for (Label& l : clip_labels(moved, r.box(), min_area_frac)) out.labels.push_back(l);
  }
  return out;
}

inline Sample mosaic(std::span<const Sample> samples, int out_w, int out_h, Rng& rng,
                     const MosaicOptions& opts = {}) {
  if (samples.size() != 4) throw std::invalid_argument("mosaic: exactly 4 samples required");
  if (out_w < 2 || out_h < 2) throw std::invalid_argument("mosaic: output must be at least 2x2");
  const auto draw = [&](int side) {
    const double v = rng.uniform(opts.split_lo * side, opts.split_hi * side);
    return std::clamp(static_cast<int>(std::lround(v)), 1, side - 1);
  };
  const int split_x = draw(out_w);
  const int split_y = draw(out_h);
  return mosaic_at(samples, out_w, out_h, split_x, split_y, opts.min_area_frac);
}

// ---------------------------------------------------------------------------
// CutMix / MixUp (classification-label mode: boxes pass through, weights mix)

namespace detail {

inline void append_weighted(std::vector<Label>& out, std::span<const Label> labels,
                            double factor) {
  for (const Label& l : labels) {
    const double w = l.weight * factor;
    if (w > 0.0) out.push_back({l.box, l.class_id, w});
  }
}

inline void require_same_shape(const Sample& a, const Sample& b, const char* op) {
  if (!a.image.same_shape(b.image)) {
    throw std::invalid_argument(std::string(op) + ": images must have identical dimensions");
  }
}

}  // namespace detail

// Pastes `region` of b over a. a's labels are weighted by
// lambda = 1 - |region| / |image|, b's by 1 - lambda.
inline Sample cutmix_region(const Sample& a, const Sample& b, const PixelRect& region) {
  detail::require_same_shape(a, b, "cutmix");
  const int w = a.image.width();
  const int h = a.image.height();
  const PixelRect r{std::clamp(region.x0, 0, w), std::clamp(region.y0, 0, h),
                    std::clamp(region.x1, 0, w), std::clamp(region.y1, 0, h)};
  Sample out{a.image, {}};
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      for (int c = 0; c < ImageTensor::kChannels; ++c) out.image.at(x, y, c) = b.image.at(x, y, c);
    }
  }
  const double lambda =
      1.0 - static_cast<double>(r.area()) / (static_cast<double>(w) * static_cast<double>(h));
  detail::append_weighted(out.labels, a.labels, lambda);
  detail::append_weighted(out.labels, b.labels, 1.0 - lambda);
  return out;
}

// Draws lambda ~ U(0, 1), a rectangle with sides proportional to
// sqrt(1 - lambda) at a uniform center, clipped to the image.
inline PixelRect cutmix_sample_region(int width, int height, Rng& rng) {
  const double lambda = rng.uniform();
  const double cut = std::sqrt(1.0 - lambda);
  const auto rw = static_cast<int>(std::lround(width * cut));
  const auto rh = static_cast<int>(std::lround(height * cut));
  const auto cx = static_cast<int>(rng.index(static_cast<std::size_t>(width)));
  const auto cy = static_cast<int>(rng.index(static_cast<std::size_t>(height)));
  return {std::clamp(cx - rw / 2, 0, width), std::clamp(cy - rh / 2, 0, height),
          std::clamp(cx - rw / 2 + rw, 0, width), std::clamp(cy - rh / 2 + rh, 0, height)};
}

inline Sample cutmix(const Sample& a, const Sample& b, Rng& rng) {
  detail::require_same_shape(a, b, "cutmix");
  return cutmix_region(a, b, cutmix_sample_region(a.image.width(), a.image.height(), rng));
}

inline Sample mixup(const Sample& a, const Sample& b, double lambda) {
  detail::require_same_shape(a, b, "mixup");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("mixup: lambda must lie in [0, 1]");
  }
  Sample out{ImageTensor(a.image.width(), a.image.height()), {}};
  const auto la = static_cast<float>(lambda);
  const auto lb = static_cast<float>(1.0 - lambda);
  const auto& pa = a.image.pixels();
  const auto& pb = b.image.pixels();
  auto& po = out.image.pixels();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::clamp(la * pa[i] + lb * pb[i], 0.0f, 1.0f);
  detail::append_weighted(out.labels, a.labels, lambda);
  detail::append_weighted(out.labels, b.labels, 1.0 - lambda);
  return out;
}

// ---------------------------------------------------------------------------
// Photometric

// Identity values: brightness 0, contrast 1, hue 0, saturation 1, noise 0.
struct PhotometricParams {
  double brightness = 0.0;   // added to every channel
  double contrast = 1.0;     // gain about the image mean
  double hue = 0.0;          // hue rotation in turns (1.0 = full circle)
  double saturation = 1.0;   // HSV saturation gain
  double noise_sigma = 0.0;  // additive Gaussian noise
};

// Ranges for drawing random photometric parameters.
struct PhotometricJitter {
  double brightness = 0.1;
  double contrast = 0.2;
  double hue = 0.05;
  double saturation = 0.5;
  double noise_sigma = 0.02;
};

inline PhotometricParams sample_photometric(const PhotometricJitter& j, Rng& rng) {
  PhotometricParams p;
  p.brightness = rng.uniform(-j.brightness, j.brightness);
  p.contrast = rng.uniform(1.0 - j.contrast, 1.0 + j.contrast);
  p.hue = rng.uniform(-j.hue, j.hue);
  p.saturation = rng.uniform(1.0 - j.saturation, 1.0 + j.saturation);
  p.noise_sigma = rng.uniform(0.0, j.noise_sigma);
  return p;
}

namespace detail {

inline void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float d = mx - mn;
  v = mx;
  s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    h = 0.0f;
  } else if (mx == r) {
    h = (g - b) / d / 6.0f;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0f) / 6.0f;
  } else {
    h = ((r - g) / d + 4.0f) / 6.0f;
  }
  if (h < 0.0f) h += 1.0f;
}

inline void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float h6 = h * 6.0f;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const float f = h6 - std::floor(h6);
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace detail

// Applies brightness, contrast, hue/saturation and noise in that order.
// Steps at their identity value are skipped, so identity parameters leave the
// image bit-exact. Labels are unchanged.
inline Sample photometric(const Sample& s, const PhotometricParams& p, Rng& rng) {
  Sample out = s;
  auto& px = out.image.pixels();

  if (p.brightness != 0.0) {
    const auto delta = static_cast<float>(p.brightness);
    for (float& v : px) v = std::clamp(v + delta, 0.0f, 1.0f);
  }
  if (p.contrast != 1.0) {
    double sum = 0.0;
    for (float v : px) sum += v;
    const double mean = sum / static_cast<double>(px.size());
    for (float& v : px) {
      v = static_cast<float>(std::clamp((v - mean) * p.contrast + mean, 0.0, 1.0));
    }
  }
  if (p.hue != 0.0 || p.saturation != 1.0) {
    const auto hue = static_cast<float>(p.hue - std::floor(p.hue));
    const auto sat = static_cast<float>(p.saturation);
    for (std::size_t i = 0; i < px.size(); i += ImageTensor::kChannels) {
      float h, sv, v;
      detail::rgb_to_hsv(px[i], px[i + 1], px[i + 2], h, sv, v);
      h += hue;
      if (h >= 1.0f) h -= 1.0f;
      sv = std::clamp(sv * sat, 0.0f, 1.0f);
      detail::hsv_to_rgb(h, sv, v, px[i], px[i + 1], px[i + 2]);
    }
  }
  if (p.noise_sigma > 0.0) {
    for (float& v : px) {
      v = static_cast<float>(std::clamp(v + rng.normal(0.0, p.noise_sigma), 0.0, 1.0));
    }
  }
  out.image.clamp();
  return out;
}

// ---------------------------------------------------------------------------
// Geometric

struct HFlip {};
struct Scale {
  double factor = 1.0;
};
struct Crop {
  PixelRect region;
};
using GeometricOp = std::variant<HFlip, Scale, Crop>;

inline Sample hflip(const Sample& s) {
  const int w = s.image.width();
  const int h = s.image.height();
  Sample out{ImageTensor(w, h), {}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ImageTensor::kChannels; ++c) out.image.at(w - 1 - x, y, c) = s.image.at(x, y, c);
    }
  }
  for (const Label& l : s.labels) {
    out.labels.push_back({{w - l.box.x_max, l.box.y_min, w - l.box.x_min, l.box.y_max},
                          l.class_id, l.weight});
  }
  return out;
}

// Scales image and boxes by k. The canvas becomes round(k * size); boxes are
// multiplied by k exactly and clipped to the new canvas.
inline Sample scale(const Sample& s, double k, double min_area_frac = kDefaultMinAreaFrac) {
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("scale: factor must be positive");
  const int new_w = std::max(1, static_cast<int>(std::lround(s.image.width() * k)));
  const int new_h = std::max(1, static_cast<int>(std::lround(s.image.height() * k)));
  Sample out{ImageTensor(new_w, new_h), {}};
  for (int y = 0; y < new_h; ++y) {
    const int sy = nearest_source(y, s.image.height(), new_h);
    for (int x = 0; x < new_w; ++x) {
      const int sx = nearest_source(x, s.image.width(), new_w);
      for (int c = 0; c < ImageTensor::kChannels; ++c) out.image.at(x, y, c) = s.image.at(sx, sy, c);
    }
  }
  std::vector<Label> moved;
  for (const Label& l : s.labels) moved.push_back({l.box.scaled(k), l.class_id, l.weight});
  out.labels = clip_labels(moved, {0.0, 0.0, double(new_w), double(new_h)}, min_area_frac);
  return out;
}

inline Sample crop(const Sample& s, const PixelRect& region,
                   double min_area_frac = kDefaultMinAreaFrac) {
  if (region.x0 < 0 || region.y0 < 0 || region.x1 > s.image.width() ||
      region.y1 > s.image.height() || region.width() <= 0 || region.height() <= 0) {
    throw std::invalid_argument("crop: region must be a non-empty rectangle inside the image");
  }
  Sample out{ImageTensor(region.width(), region.height()), {}};
  for (int y = 0; y < region.height(); ++y) {
    for (int x = 0; x < region.width(); ++x) {
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        out.image.at(x, y, c) = s.image.at(region.x0 + x, region.y0 + y, c);
      }
    }
  }
  std::vector<Label> moved;
  for (const Label& l : clip_labels(s.labels, region.box(), min_area_frac)) {
    moved.push_back({l.box.translated(-region.x0, -region.y0), l.class_id, l.weight});
  }
  out.labels = std::move(moved);
  return out;
}

inline Sample geometric(const Sample& s, const GeometricOp& op) {
  return std::visit(
      [&](const auto& o) -> Sample {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, HFlip>) {
          return hflip(s);
        } else if constexpr (std::is_same_v<T, Scale>) {
          return scale(s, o.factor);
        } else {
          return crop(s, o.region);
        }
      },
      op);
}

struct GeometricJitter {
  double flip_prob = 0.5;
  double scale_lo = 0.75;
  double scale_hi = 1.25;
  double min_crop_frac = 0.6;  // minimum crop side as a fraction of the image side
};

// Random flip, then random scale, then a random crop.
inline Sample random_geometric(const Sample& s, const GeometricJitter& j, Rng& rng) {
  Sample out = rng.bernoulli(j.flip_prob) ? hflip(s) : s;
  out = scale(out, rng.uniform(j.scale_lo, j.scale_hi));
  const int w = out.image.width();
  const int h = out.image.height();
  const int cw = std::max(1, static_cast<int>(std::lround(w * rng.uniform(j.min_crop_frac, 1.0))));
  const int ch = std::max(1, static_cast<int>(std::lround(h * rng.uniform(j.min_crop_frac, 1.0))));
  const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(w - cw + 1)));
  const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(h - ch + 1)));
  return crop(out, {x0, y0, x0 + cw, y0 + ch});
}

// ---------------------------------------------------------------------------
// Blur

// Box filter of side 2 * radius + 1 per channel, clamping at the edges.
inline Sample blur(const Sample& s, int radius) {
  if (radius < 0) throw std::invalid_argument("blur: radius must be non-negative");
  if (radius == 0) return s;
  const int w = s.image.width();
  const int h = s.image.height();
  const int n = 2 * radius + 1;
  constexpr int kC = ImageTensor::kChannels;
  std::vector<double> rows(static_cast<std::size_t>(w) * h * kC);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < kC; ++c) {
        double acc = 0.0;
        for (int dx = -radius; dx <= radius; ++dx) acc += s.image.at(std::clamp(x + dx, 0, w - 1), y, c);
        rows[(static_cast<std::size_t>(y) * w + x) * kC + c] = acc / n;
      }
    }
  }
  Sample out{ImageTensor(w, h), s.labels};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < kC; ++c) {
        double acc = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          acc += rows[(static_cast<std::size_t>(std::clamp(y + dy, 0, h - 1)) * w + x) * kC + c];
        }
        out.image.at(x, y, c) = std::clamp(static_cast<float>(acc / n), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

}  // namespace bofkit
