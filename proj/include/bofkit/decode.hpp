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
#include <stdexcept>
#include <vector>

#include "bofkit/geometry.hpp"

namespace bofkit {

// Prior box shape in pixels at network input resolution.
struct Anchor {
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct GridCell {
  int x = 0;
  int y = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct RawPrediction {
  double t_x = 0.0;
  double t_y = 0.0;
  double t_w = 0.0;
  double t_h = 0.0;
  double objectness = 0.0;
  std::vector<double> class_scores;
  GridCell cell;
  std::size_t anchor_index = 0;
};

inline constexpr double kDefaultSensitivityScale = 1.1;
inline constexpr double kDefaultAssignIouThreshold = 0.213;

struct DecodeConfig {
  int grid_w = 0;
  int grid_h = 0;
  double stride = 1.0;
  std::vector<Anchor> anchors;
  // Sigmoid scale for the center offsets; 1.0 gives the plain sigmoid decode.
  double sensitivity_scale = kDefaultSensitivityScale;
};

struct DecodedPrediction {
  CenterBox box;
  double objectness = 0.0;
  std::vector<double> class_probs;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Center offset within the cell: s * sigmoid(t) - (s - 1) / 2, which spans
// (-(s-1)/2, 1 + (s-1)/2) so the cell borders are reachable at finite t.
inline double scaled_offset(double t, double scale) {
  return scale * sigmoid(t) - (scale - 1.0) / 2.0;
}

inline void validate(const DecodeConfig& cfg) {
  if (!(cfg.sensitivity_scale >= 1.0)) {
    throw std::invalid_argument("DecodeConfig: sensitivity_scale must be >= 1");
  }
  if (!(cfg.stride > 0.0)) throw std::invalid_argument("DecodeConfig: stride must be positive");
  if (cfg.grid_w <= 0 || cfg.grid_h <= 0) {
    throw std::invalid_argument("DecodeConfig: grid dimensions must be positive");
  }
  if (cfg.anchors.empty()) throw std::invalid_argument("DecodeConfig: no anchors");
  for (const Anchor& a : cfg.anchors) {
    if (!(a.w > 0.0) || !(a.h > 0.0)) {
      throw std::invalid_argument("DecodeConfig: anchor sizes must be positive");
    }
  }
}

// Decodes one head output into a pixel-space center box. Width and height use
// the exponential anchor form; objectness and class scores go through a sigmoid.
inline DecodedPrediction decode(const RawPrediction& p, const DecodeConfig& cfg) {
  if (p.anchor_index >= cfg.anchors.size()) {
    throw std::out_of_range("decode: anchor_index out of range");
  }
  const Anchor& anchor = cfg.anchors[p.anchor_index];
  const double s = cfg.sensitivity_scale;
  DecodedPrediction out;
  out.box.x_c = (scaled_offset(p.t_x, s) + p.cell.x) * cfg.stride;
  out.box.y_c = (scaled_offset(p.t_y, s) + p.cell.y) * cfg.stride;
  out.box.w = anchor.w * std::exp(p.t_w);
  out.box.h = anchor.h * std::exp(p.t_h);
  out.objectness = sigmoid(p.objectness);
  out.class_probs.reserve(p.class_scores.size());
  for (double c : p.class_scores) out.class_probs.push_back(sigmoid(c));
  return out;
}

// IoU of two shapes sharing a center.
inline double shape_iou(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  const double uni = w1 * h1 + w2 * h2 - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline double shape_iou(const Anchor& a, const Anchor& b) {
  return shape_iou(a.w, a.h, b.w, b.h);
}

struct AnchorAssignment {
  GridCell cell;
  std::size_t anchor_index = 0;
  double iou = 0.0;

  friend bool operator==(const AnchorAssignment&, const AnchorAssignment&) = default;
};

// Every anchor whose shape IoU with the truth exceeds iou_threshold is
// assigned, paired with the cell containing the truth center. When none
// qualifies the best-matching anchor is assigned alone, so the result is never
// empty. Only the center cell is used.
inline std::vector<AnchorAssignment> assign_anchors(
    const CenterBox& truth, const DecodeConfig& cfg,
    double iou_threshold = kDefaultAssignIouThreshold) {
  validate(cfg);
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw std::invalid_argument("assign_anchors: iou_threshold must lie in (0, 1)");
  }
  const GridCell cell{
      std::clamp(static_cast<int>(std::floor(truth.x_c / cfg.stride)), 0, cfg.grid_w - 1),
      std::clamp(static_cast<int>(std::floor(truth.y_c / cfg.stride)), 0, cfg.grid_h - 1)};

  std::vector<AnchorAssignment> out;
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < cfg.anchors.size(); ++i) {
    const double v = shape_iou(truth.w, truth.h, cfg.anchors[i].w, cfg.anchors[i].h);
    if (v > iou_threshold) out.push_back({cell, i, v});
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  if (out.empty()) out.push_back({cell, best, best_iou});
  return out;
}

}  // namespace bofkit
