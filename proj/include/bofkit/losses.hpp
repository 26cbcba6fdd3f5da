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
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "bofkit/geometry.hpp"

namespace bofkit {

enum class BoxLossKind { kMse, kIou, kGiou, kDiou, kCiou };

constexpr std::string_view to_string(BoxLossKind kind) {
  switch (kind) {
    case BoxLossKind::kMse: return "mse";
    case BoxLossKind::kIou: return "iou";
    case BoxLossKind::kGiou: return "giou";
    case BoxLossKind::kDiou: return "diou";
    case BoxLossKind::kCiou: return "ciou";
  }
  return "?";
}

// How the CIoU trade-off weight alpha = v / (1 - IoU + v) enters the gradient.
//   kDifferentiated: the gradient is the exact derivative of the returned value.
//   kConstant: alpha is frozen at its current value, as commonly done in
//     training; the gradient is then that of 1 - DIoU + alpha_frozen * v.
enum class CiouAlpha { kDifferentiated, kConstant };

struct BoxLossOptions {
  CiouAlpha ciou_alpha = CiouAlpha::kDifferentiated;
};

// Gradient is with respect to the predicted box's (x_c, y_c, w, h).
struct BoxLossResult {
  double value = 0.0;
  std::array<double, 4> grad{};
};

namespace detail {

using Grad4 = std::array<double, 4>;

inline Grad4 axpy(double a, const Grad4& x, const Grad4& y) {
  return {a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2], a * x[3] + y[3]};
}
inline Grad4 scale(double a, const Grad4& x) {
  return {a * x[0], a * x[1], a * x[2], a * x[3]};
}

// d/d(x_c, y_c, w, h) given derivatives with respect to the four corners.
inline Grad4 from_corners(double d_x1, double d_y1, double d_x2, double d_y2) {
  return {d_x1 + d_x2, d_y1 + d_y2, 0.5 * (d_x2 - d_x1), 0.5 * (d_y2 - d_y1)};
}

inline bool finite(const CenterBox& b) {
  return std::isfinite(b.x_c) && std::isfinite(b.y_c) && std::isfinite(b.w) &&
         std::isfinite(b.h);
}

}  // namespace detail

// Box regression loss and its analytic gradient.
//
// MSE is the unweighted sum of squared errors over (x_c, y_c, w, h). The IoU
// family returns 1 - metric(pred, truth). Throws std::invalid_argument on
// non-finite input, on a truth box without positive extent, and on a
// degenerate predicted box under an IoU-family loss.
inline BoxLossResult box_loss(const CenterBox& pred, const CenterBox& truth,
                              BoxLossKind kind, const BoxLossOptions& opts = {}) {
  using detail::Grad4;
  if (!detail::finite(pred) || !detail::finite(truth)) {
    throw std::invalid_argument("box_loss: non-finite box coordinates");
  }
  if (!(truth.w > 0) || !(truth.h > 0)) {
    throw std::invalid_argument("box_loss: truth box must have positive width and height");
  }

  if (kind == BoxLossKind::kMse) {
    const Grad4 d{pred.x_c - truth.x_c, pred.y_c - truth.y_c, pred.w - truth.w,
                  pred.h - truth.h};
    BoxLossResult r;
    for (int i = 0; i < 4; ++i) {
      r.value += d[i] * d[i];
      r.grad[i] = 2.0 * d[i];
    }
    return r;
  }

  if (!(pred.w > 0) || !(pred.h > 0)) {
    throw std::invalid_argument(
        "box_loss: predicted box must have positive width and height for IoU losses");
  }

  const Box p = to_corners(pred);
  const Box t = to_corners(truth);

  // Intersection.
  const double iw_raw = std::min(p.x_max, t.x_max) - std::max(p.x_min, t.x_min);
  const double ih_raw = std::min(p.y_max, t.y_max) - std::max(p.y_min, t.y_min);
  const bool overlap = iw_raw > 0 && ih_raw > 0;
  const double iw = overlap ? iw_raw : 0.0;
  const double ih = overlap ? ih_raw : 0.0;
  const double inter = iw * ih;
  Grad4 d_inter{};
  if (overlap) {
    d_inter = detail::from_corners(p.x_min > t.x_min ? -ih : 0.0,
                                   p.y_min > t.y_min ? -iw : 0.0,
                                   p.x_max < t.x_max ? ih : 0.0,
                                   p.y_max < t.y_max ? iw : 0.0);
  }

  // Union and IoU.
  const double area_p = pred.w * pred.h;
  const double area_t = truth.w * truth.h;
  const double uni = area_p + area_t - inter;
  const Grad4 d_area_p{0.0, 0.0, pred.h, pred.w};
  const Grad4 d_uni = detail::axpy(-1.0, d_inter, d_area_p);
  const double iou_value = inter / uni;
  const Grad4 d_iou = detail::scale(
      1.0 / (uni * uni), detail::axpy(-inter, d_uni, detail::scale(uni, d_inter)));

  double metric = iou_value;
  Grad4 d_metric = d_iou;

  if (kind == BoxLossKind::kIou) {
    return {1.0 - metric, detail::scale(-1.0, d_metric)};
  }

  // Enclosing box.
  const double cw = std::max(p.x_max, t.x_max) - std::min(p.x_min, t.x_min);
  const double ch = std::max(p.y_max, t.y_max) - std::min(p.y_min, t.y_min);
  const Grad4 d_cw = detail::from_corners(p.x_min < t.x_min ? -1.0 : 0.0, 0.0,
                                          p.x_max > t.x_max ? 1.0 : 0.0, 0.0);
  const Grad4 d_ch = detail::from_corners(0.0, p.y_min < t.y_min ? -1.0 : 0.0,
                                          0.0, p.y_max > t.y_max ? 1.0 : 0.0);

  if (kind == BoxLossKind::kGiou) {
    // giou = iou - 1 + U / C
    const double hull = cw * ch;
    const Grad4 d_hull = detail::axpy(ch, d_cw, detail::scale(cw, d_ch));
    metric = iou_value - (hull - uni) / hull;
    d_metric = detail::axpy(
        1.0 / (hull * hull),
        detail::axpy(-uni, d_hull, detail::scale(hull, d_uni)), d_iou);
    return {1.0 - metric, detail::scale(-1.0, d_metric)};
  }

  // Center-distance penalty rho^2 / c^2.
  const double dx = pred.x_c - truth.x_c;
  const double dy = pred.y_c - truth.y_c;
  const double rho2 = dx * dx + dy * dy;
  const Grad4 d_rho2{2.0 * dx, 2.0 * dy, 0.0, 0.0};
  const double diag2 = cw * cw + ch * ch;
  const Grad4 d_diag2 = detail::axpy(2.0 * cw, d_cw, detail::scale(2.0 * ch, d_ch));
  metric = iou_value - rho2 / diag2;
  d_metric = detail::axpy(
      -1.0 / (diag2 * diag2),
      detail::axpy(-rho2, d_diag2, detail::scale(diag2, d_rho2)), d_iou);

  if (kind == BoxLossKind::kDiou) {
    return {1.0 - metric, detail::scale(-1.0, d_metric)};
  }

  // Aspect term v and weight alpha.
  constexpr double kFourOverPi2 = 4.0 / (std::numbers::pi * std::numbers::pi);
  const double delta = std::atan(truth.w / truth.h) - std::atan(pred.w / pred.h);
  const double v = kFourOverPi2 * delta * delta;
  const double norm2 = pred.w * pred.w + pred.h * pred.h;
  const Grad4 d_v{0.0, 0.0, -2.0 * kFourOverPi2 * delta * pred.h / norm2,
                  2.0 * kFourOverPi2 * delta * pred.w / norm2};
  const double alpha = v > 0 ? v / (1.0 - iou_value + v) : 0.0;
  metric -= alpha * v;
  if (opts.ciou_alpha == CiouAlpha::kConstant) {
    d_metric = detail::axpy(-alpha, d_v, d_metric);
  } else {
    // d(v^2 / (1 - iou + v)) = 2 alpha dv - alpha^2 (dv - d_iou)
    const Grad4 d_penalty = detail::axpy(
        2.0 * alpha, d_v, detail::scale(-alpha * alpha, detail::axpy(-1.0, d_iou, d_v)));
    d_metric = detail::axpy(-1.0, d_penalty, d_metric);
  }
  return {1.0 - metric, detail::scale(-1.0, d_metric)};
}

// out_i = onehot_i * (1 - epsilon) + epsilon / K.
inline std::vector<double> label_smooth(std::span<const double> onehot, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("label_smooth: epsilon must lie in [0, 1)");
  }
  if (onehot.empty()) {
    throw std::invalid_argument("label_smooth: empty label vector");
  }
  const double k = static_cast<double>(onehot.size());
  std::vector<double> out;
  out.reserve(onehot.size());
  for (double p : onehot) out.push_back(p * (1.0 - epsilon) + epsilon / k);
  return out;
}

// Loss weight found by hyperparameter search for GIoU-trained detectors.
inline constexpr double kDefaultLossNormalizer = 0.07;

inline double loss_normalize(double raw_loss, double normalizer = kDefaultLossNormalizer) {
  if (!(normalizer > 0.0)) {
    throw std::invalid_argument("loss_normalize: normalizer must be positive");
  }
  return raw_loss * normalizer;
}

}  // namespace bofkit
