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
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "bofkit/geometry.hpp"

namespace bofkit {

struct Detection {
  Box box;
  double score = 0.0;
  int class_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class SoftNmsMode { kLinear, kGaussian };

struct SoftNmsParams {
  double iou_threshold = 0.3;
  double sigma = 0.5;
  double score_floor = 0.001;
  SoftNmsMode mode = SoftNmsMode::kGaussian;
};

inline constexpr double kDefaultDiouNmsThreshold = 0.45;

namespace detail {

// Indices ordered by descending score; ties keep input order.
inline std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

// Greedy suppression driven by an arbitrary overlap measure. Each class is an
// independent partition; the output is merged back into global score order.
template <typename Overlap>
std::vector<Detection> greedy_suppress(std::span<const Detection> dets, double threshold,
                                       Overlap overlap) {
  const std::vector<std::size_t> order = score_order(dets);
  std::map<int, std::vector<std::size_t>> kept_by_class;
  std::vector<std::size_t> kept;
  kept.reserve(dets.size());
  for (std::size_t idx : order) {
    auto& same_class = kept_by_class[dets[idx].class_id];
    const bool suppressed = std::any_of(
        same_class.begin(), same_class.end(),
        [&](std::size_t k) { return overlap(dets[k].box, dets[idx].box) > threshold; });
    if (!suppressed) {
      same_class.push_back(idx);
      kept.push_back(idx);
    }
  }
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t idx : kept) out.push_back(dets[idx]);
  return out;
}

}  // namespace detail

// Classic per-class NMS: a detection is dropped when its IoU with an already
// kept detection of the same class exceeds iou_threshold.
inline std::vector<Detection> greedy_nms(std::span<const Detection> dets,
                                         double iou_threshold) {
  return detail::greedy_suppress(dets, iou_threshold,
                                 [](const Box& a, const Box& b) { return iou(a, b); });
}

// Greedy NMS with DIoU as the suppression measure. Overlapping boxes whose
// centers are far apart survive more easily than under plain IoU.
inline std::vector<Detection> diou_nms(std::span<const Detection> dets,
                                       double threshold = kDefaultDiouNmsThreshold) {
  return detail::greedy_suppress(dets, threshold,
                                 [](const Box& a, const Box& b) { return diou(a, b); });
}

// Soft-NMS. Instead of discarding, overlapping same-class scores are decayed:
// linear mode multiplies by (1 - iou) when iou > iou_threshold, gaussian mode
// multiplies by exp(-iou^2 / sigma) for every pair. Detections that fall below
// score_floor are removed. Output is sorted by final score.
inline std::vector<Detection> soft_nms(std::span<const Detection> dets,
                                       const SoftNmsParams& params = {}) {
  if (params.mode == SoftNmsMode::kGaussian && !(params.sigma > 0.0)) {
    throw std::invalid_argument("soft_nms: sigma must be positive");
  }
  if (!(params.score_floor >= 0.0 && params.score_floor < 1.0)) {
    throw std::invalid_argument("soft_nms: score_floor must lie in [0, 1)");
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dets.size(); ++i) by_class[dets[i].class_id].push_back(i);

  struct Survivor {
    std::size_t index;
    double score;
  };
  std::vector<Survivor> survivors;
  for (auto& [cls, members] : by_class) {
    std::vector<Survivor> pending;
    for (std::size_t i : members) {
      if (dets[i].score >= params.score_floor) pending.push_back({i, dets[i].score});
    }
    while (!pending.empty()) {
      // Highest current score; earliest input index on ties.
      auto best = std::min_element(pending.begin(), pending.end(),
                                   [](const Survivor& a, const Survivor& b) {
                                     if (a.score != b.score) return a.score > b.score;
                                     return a.index < b.index;
                                   });
      const Survivor picked = *best;
      pending.erase(best);
      survivors.push_back(picked);

      const Box& ref = dets[picked.index].box;
      for (Survivor& s : pending) {
        const double overlap = iou(ref, dets[s.index].box);
        if (params.mode == SoftNmsMode::kLinear) {
          if (overlap > params.iou_threshold) s.score *= 1.0 - overlap;
        } else {
          s.score *= std::exp(-(overlap * overlap) / params.sigma);
        }
      }
      std::erase_if(pending,
                    [&](const Survivor& s) { return s.score < params.score_floor; });
    }
  }

  std::stable_sort(survivors.begin(), survivors.end(),
                   [](const Survivor& a, const Survivor& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.index < b.index;
                   });
  std::vector<Detection> out;
  out.reserve(survivors.size());
  for (const Survivor& s : survivors) {
    Detection d = dets[s.index];
    d.score = s.score;
    out.push_back(d);
  }
  return out;
}

enum class NmsKind { kNone, kGreedy, kSoft, kDiou };

constexpr std::string_view to_string(NmsKind kind) {
  switch (kind) {
    case NmsKind::kNone: return "none";
    case NmsKind::kGreedy: return "greedy";
    case NmsKind::kSoft: return "soft";
    case NmsKind::kDiou: return "diou";
  }
  return "?";
}

}  // namespace bofkit
