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
#include <numbers>
#include <ostream>

namespace bofkit {

// Axis-aligned box in corner form. Units are whatever the caller uses
// (pixels or normalized); nothing here depends on them.
template <typename T>
struct BasicBox {
  T x_min{};
  T y_min{};
  T x_max{};
  T y_max{};

  constexpr T width() const { return x_max - x_min; }
  constexpr T height() const { return y_max - y_min; }
  constexpr T area() const { return width() * height(); }
  constexpr T center_x() const { return (x_min + x_max) / 2; }
  constexpr T center_y() const { return (y_min + y_max) / 2; }
  constexpr bool valid() const { return x_max >= x_min && y_max >= y_min; }

  constexpr BasicBox scaled(T k) const {
    return {x_min * k, y_min * k, x_max * k, y_max * k};
  }
  constexpr BasicBox translated(T dx, T dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  friend constexpr bool operator==(const BasicBox&, const BasicBox&) = default;
  friend std::ostream& operator<<(std::ostream& os, const BasicBox& b) {
    return os << "Box(" << b.x_min << ", " << b.y_min << ", " << b.x_max
              << ", " << b.y_max << ")";
  }
};

// Center form: (x_c, y_c) plus width and height.
template <typename T>
struct BasicCenterBox {
  T x_c{};
  T y_c{};
  T w{};
  T h{};

  friend constexpr bool operator==(const BasicCenterBox&,
                                   const BasicCenterBox&) = default;
  friend std::ostream& operator<<(std::ostream& os, const BasicCenterBox& b) {
    return os << "CenterBox(" << b.x_c << ", " << b.y_c << ", " << b.w << ", "
              << b.h << ")";
  }
};

using Box = BasicBox<double>;
using CenterBox = BasicCenterBox<double>;

template <typename T>
constexpr BasicCenterBox<T> to_center(const BasicBox<T>& b) {
  return {b.center_x(), b.center_y(), b.width(), b.height()};
}

template <typename T>
constexpr BasicBox<T> to_corners(const BasicCenterBox<T>& c) {
  return {c.x_c - c.w / 2, c.y_c - c.h / 2, c.x_c + c.w / 2, c.y_c + c.h / 2};
}

template <typename T>
constexpr T intersection_area(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const T ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return T{0};
  return iw * ih;
}

// Smallest box covering both inputs.
template <typename T>
constexpr BasicBox<T> enclosing(const BasicBox<T>& a, const BasicBox<T>& b) {
  return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
          std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

// Returns 0 when the union is empty (two zero-area boxes).
template <typename T>
constexpr T iou(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T inter = intersection_area(a, b);
  const T uni = a.area() + b.area() - inter;
  if (uni <= 0) return T{0};
  return inter / uni;
}

template <typename T>
constexpr T giou(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T inter = intersection_area(a, b);
  const T uni = a.area() + b.area() - inter;
  const T iou_value = uni > 0 ? inter / uni : T{0};
  const T hull = enclosing(a, b).area();
  if (hull <= 0) return iou_value;
  // hull >= uni exactly; rounding can make the difference a hair negative.
  return iou_value - std::max(hull - uni, T{0}) / hull;
}

// Squared center distance over squared enclosing-box diagonal.
template <typename T>
constexpr T center_distance_penalty(const BasicBox<T>& a, const BasicBox<T>& b) {
  const BasicBox<T> c = enclosing(a, b);
  const T diag2 = c.width() * c.width() + c.height() * c.height();
  if (diag2 <= 0) return T{0};
  const T dx = a.center_x() - b.center_x();
  const T dy = a.center_y() - b.center_y();
  return (dx * dx + dy * dy) / diag2;
}

template <typename T>
constexpr T diou(const BasicBox<T>& a, const BasicBox<T>& b) {
  return iou(a, b) - center_distance_penalty(a, b);
}

// Aspect-ratio consistency term v = 4/pi^2 (atan(w_b/h_b) - atan(w_a/h_a))^2.
// Zero when either box has no width or height.
template <typename T>
T aspect_penalty(const BasicBox<T>& a, const BasicBox<T>& b) {
  if (a.width() <= 0 || a.height() <= 0 || b.width() <= 0 || b.height() <= 0) {
    return T{0};
  }
  const T d = std::atan(b.width() / b.height()) - std::atan(a.width() / a.height());
  return T{4} / (std::numbers::pi_v<T> * std::numbers::pi_v<T>) * d * d;
}

template <typename T>
T ciou(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T iou_value = iou(a, b);
  const T v = aspect_penalty(a, b);
  const T alpha = v > 0 ? v / (T{1} - iou_value + v) : T{0};
  return iou_value - center_distance_penalty(a, b) - alpha * v;
}

}  // namespace bofkit
