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

// COCO-style box average precision.
//
// Matching follows the reference cocoeval logic: per image and class,
// detections in descending score order take the unmatched truth with the
// highest IoU >= threshold; truths outside the evaluated area range are
// "ignored", and so are detections matched to them or unmatched detections
// outside the range. Precision is made monotone and sampled at 101 recall
// points.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bofkit/geometry.hpp"
#include "bofkit/nms.hpp"

namespace bofkit {

using ImageId = std::int64_t;

struct GroundTruth {
  Box box;
  int class_id = 0;
};

using DetectionsByImage = std::map<ImageId, std::vector<Detection>>;
using TruthsByImage = std::map<ImageId, std::vector<GroundTruth>>;

// Any field is empty when no class has a non-ignored truth in its bucket.
struct EvalResult {
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_small;
  std::optional<double> ap_medium;
  std::optional<double> ap_large;
};

struct AreaRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool lo_inclusive = true;
  bool hi_inclusive = true;

  bool contains(double area) const {
    const bool above = lo_inclusive ? area >= lo : area > lo;
    const bool below = hi_inclusive ? area <= hi : area < hi;
    return above && below;
  }
};

inline constexpr double kSmallAreaLimit = 32.0 * 32.0;
inline constexpr double kLargeAreaLimit = 96.0 * 96.0;

inline AreaRange all_areas() { return {}; }
inline AreaRange small_areas() { return {0.0, kSmallAreaLimit, true, false}; }
inline AreaRange medium_areas() { return {kSmallAreaLimit, kLargeAreaLimit, true, true}; }
inline AreaRange large_areas() {
  return {kLargeAreaLimit, std::numeric_limits<double>::infinity(), false, true};
}

struct EvalParams {
  std::vector<double> iou_thresholds;
  int recall_points = 101;
  std::size_t max_detections = 100;  // per image and class; 0 = unlimited

  static EvalParams coco() {
    EvalParams p;
    for (int i = 0; i < 10; ++i) p.iou_thresholds.push_back(0.5 + 0.05 * i);
    return p;
  }
};

// Recall grid {0, 0.01, ..., 1}.
inline std::vector<double> recall_grid(int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return grid;
}

// Interpolated AP from score-ordered match flags.
//   tp/ignored: per detection in descending score order.
//   num_truths: non-ignored truths.
inline double interpolated_ap(const std::vector<bool>& tp, const std::vector<bool>& ignored,
                              std::size_t num_truths, int recall_points = 101) {
  std::vector<double> recall, precision;
  double tps = 0.0, fps = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (ignored[i]) continue;
    (tp[i] ? tps : fps) += 1.0;
    recall.push_back(tps / static_cast<double>(num_truths));
    precision.push_back(tps / (tps + fps));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (double r : recall_grid(recall_points)) {
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / recall_points;
}

namespace detail {

struct ClassImageMatch {
  std::vector<double> scores;
  std::vector<std::vector<bool>> tp;       // [threshold][det]
  std::vector<std::vector<bool>> ignored;  // [threshold][det]
  std::size_t num_truths = 0;              // non-ignored
};

inline ClassImageMatch match_image(std::vector<Detection> dets, const std::vector<GroundTruth>& truths,
                                   const AreaRange& range, const EvalParams& params) {
  // Non-ignored truths first.
  std::vector<const GroundTruth*> gts;
  for (const auto& g : truths) if (range.contains(g.box.area())) gts.push_back(&g);
  const std::size_t num_kept = gts.size();
  for (const auto& g : truths) if (!range.contains(g.box.area())) gts.push_back(&g);

  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (params.max_detections > 0 && dets.size() > params.max_detections) dets.resize(params.max_detections);

  ClassImageMatch m;
  m.num_truths = num_kept;
  for (const auto& d : dets) m.scores.push_back(d.score);
  for (double t : params.iou_thresholds) {
    std::vector<bool> gt_used(gts.size(), false);
    std::vector<bool> tp(dets.size(), false), ign(dets.size(), false);
    for (std::size_t di = 0; di < dets.size(); ++di) {
      double best_iou = std::min(t, 1.0 - 1e-10);
      std::ptrdiff_t best = -1;
      for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        if (gt_used[gi]) continue;
        if (best >= 0 && static_cast<std::size_t>(best) < num_kept && gi >= num_kept) break;
        const double v = iou(dets[di].box, gts[gi]->box);
        if (v < best_iou) continue;
        best_iou = v;
        best = static_cast<std::ptrdiff_t>(gi);
      }
      if (best >= 0) {
        gt_used[static_cast<std::size_t>(best)] = true;
        const bool gt_ignored = static_cast<std::size_t>(best) >= num_kept;
        ign[di] = gt_ignored;
        tp[di] = !gt_ignored;
      } else {
        ign[di] = !range.contains(dets[di].box.area());
      }
    }
    m.tp.push_back(std::move(tp));
    m.ignored.push_back(std::move(ign));
  }
  return m;
}

}  // namespace detail

// Per-class AP at each threshold for one area range; classes without a
// non-ignored truth are absent from the map.
inline std::map<int, std::vector<double>> per_class_ap(const DetectionsByImage& dets,
                                                       const TruthsByImage& truths,
                                                       const AreaRange& range,
                                                       const EvalParams& params) {
  std::set<int> classes;
  std::set<ImageId> images;
  for (const auto& [id, list] : truths) {
    images.insert(id);
    for (const auto& g : list) classes.insert(g.class_id);
  }
  for (const auto& [id, list] : dets) {
    if (!truths.contains(id)) {
      throw std::invalid_argument("evaluate: detections reference unknown image id " + std::to_string(id));
    }
  }

  std::map<int, std::vector<double>> out;
  const std::size_t nt = params.iou_thresholds.size();
  for (int cls : classes) {
    std::vector<double> scores;
    std::vector<std::vector<bool>> tp(nt), ign(nt);
    std::size_t num_truths = 0;
    for (ImageId id : images) {
      std::vector<Detection> cd;
      if (auto it = dets.find(id); it != dets.end()) {
        for (const auto& d : it->second) if (d.class_id == cls) cd.push_back(d);
      }
      std::vector<GroundTruth> cg;
      for (const auto& g : truths.at(id)) if (g.class_id == cls) cg.push_back(g);
      if (cd.empty() && cg.empty()) continue;
      const detail::ClassImageMatch m = detail::match_image(std::move(cd), cg, range, params);
      num_truths += m.num_truths;
      scores.insert(scores.end(), m.scores.begin(), m.scores.end());
      for (std::size_t t = 0; t < nt; ++t) {
        tp[t].insert(tp[t].end(), m.tp[t].begin(), m.tp[t].end());
        ign[t].insert(ign[t].end(), m.ignored[t].begin(), m.ignored[t].end());
      }
    }
    if (num_truths == 0) continue;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> aps;
    for (std::size_t t = 0; t < nt; ++t) {
      std::vector<bool> stp, sign;
      for (std::size_t i : order) {
        stp.push_back(tp[t][i]);
        sign.push_back(ign[t][i]);
      }
      aps.push_back(interpolated_ap(stp, sign, num_truths, params.recall_points));
    }
    out[cls] = std::move(aps);
  }
  return out;
}

inline EvalResult evaluate(const DetectionsByImage& dets, const TruthsByImage& truths,
                           const EvalParams& params = EvalParams::coco()) {
  const auto threshold_index = [&](double t) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < params.iou_thresholds.size(); ++i) {
      if (std::abs(params.iou_thresholds[i] - t) < 1e-9) return i;
    }
    return std::nullopt;
  };
  const auto mean_over = [](const std::map<int, std::vector<double>>& per_class,
                            std::optional<std::size_t> only) -> std::optional<double> {
    if (per_class.empty()) return std::nullopt;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [cls, aps] : per_class) {
      if (only) {
        sum += aps[*only];
        ++n;
      } else {
        for (double v : aps) {
          sum += v;
          ++n;
        }
      }
    }
    return n > 0 ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
  };

  EvalResult r;
  const auto all = per_class_ap(dets, truths, all_areas(), params);
  r.ap = mean_over(all, std::nullopt);
  if (auto i = threshold_index(0.5)) r.ap50 = mean_over(all, i);
  if (auto i = threshold_index(0.75)) r.ap75 = mean_over(all, i);
  r.ap_small = mean_over(per_class_ap(dets, truths, small_areas(), params), std::nullopt);
  r.ap_medium = mean_over(per_class_ap(dets, truths, medium_areas(), params), std::nullopt);
  r.ap_large = mean_over(per_class_ap(dets, truths, large_areas(), params), std::nullopt);
  return r;
}

}  // namespace bofkit
