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
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bofkit/decode.hpp"
#include "bofkit/random.hpp"

namespace bofkit {

struct HyperParam {
  std::string name;
  double value = 0.0;
  double low = 0.0;
  double high = 0.0;
  double mutate_scale = 0.2;

  friend bool operator==(const HyperParam&, const HyperParam&) = default;
};

// Ordered set of bounded hyperparameters.
class HyperVector {
 public:
  HyperVector() = default;
  explicit HyperVector(std::vector<HyperParam> params) : params_(std::move(params)) {
    for (const HyperParam& p : params_) {
      if (!(p.low <= p.value && p.value <= p.high)) {
        throw std::invalid_argument("HyperVector: '" + p.name + "' lies outside its bounds");
      }
    }
  }

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  HyperParam& operator[](std::size_t i) { return params_[i]; }
  const HyperParam& operator[](std::size_t i) const { return params_[i]; }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  double value(std::string_view name) const {
    for (const HyperParam& p : params_) {
      if (p.name == name) return p.value;
    }
    throw std::out_of_range("HyperVector: no parameter named '" + std::string(name) + "'");
  }

  bool within_bounds() const {
    return std::all_of(params_.begin(), params_.end(),
                       [](const HyperParam& p) { return p.low <= p.value && p.value <= p.high; });
  }

  friend bool operator==(const HyperVector&, const HyperVector&) = default;

 private:
  std::vector<HyperParam> params_;
};

// Hyperparameters found by evolutionary search for the COCO detector, used as
// the default seed vector.
inline HyperVector default_hyper_vector() {
  return HyperVector({{"learning_rate", 0.00261, 1e-5, 1e-1, 0.2},
                      {"momentum", 0.949, 0.6, 0.98, 0.1},
                      {"iou_threshold", 0.213, 0.1, 0.7, 0.2},
                      {"loss_normalizer", 0.07, 0.01, 1.0, 0.2}});
}

struct GAConfig {
  int population = 20;   // candidates per generation
  int generations = 30;
  int parent_pool = 5;   // parents are drawn from the top-k archive entries
  double mutation_prob = 0.8;
  std::uint64_t seed = 0;
};

struct GenerationStats {
  int generation = 0;
  double best = 0.0;  // best fitness so far
  double mean = 0.0;  // mean finite fitness of this generation's candidates
};

struct EvolveResult {
  HyperVector best;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<GenerationStats> history;  // generation 0 is the seed
  std::size_t evaluations = 0;
  std::vector<std::string> warnings;
};

using FitnessFn = std::function<double(const HyperVector&)>;

// Each entry mutates with probability mutation_prob by a factor 1 + N(0, scale),
// then is clamped to its bounds.
inline HyperVector mutate(const HyperVector& parent, double mutation_prob, Rng& rng) {
  HyperVector child = parent;
  for (std::size_t i = 0; i < child.size(); ++i) {
    HyperParam& p = child[i];
    if (!rng.bernoulli(mutation_prob)) continue;
    p.value = std::clamp(p.value * (1.0 + rng.normal(0.0, p.mutate_scale)), p.low, p.high);
  }
  return child;
}

// Mutation-only genetic search. Every generation draws `population` parents
// from the top `parent_pool` candidates evaluated so far, weighted by fitness
// above the pool minimum, mutates and evaluates them. Candidates with
// non-finite fitness are discarded with a warning. Evaluation is sequential, so
// trajectories are bit-identical for a given seed.
inline EvolveResult evolve(const HyperVector& seed, const FitnessFn& fitness, const GAConfig& cfg) {
  if (cfg.population <= 0 || cfg.generations < 0 || cfg.parent_pool <= 0) {
    throw std::invalid_argument("evolve: population and parent_pool must be positive");
  }
  if (!(cfg.mutation_prob >= 0.0 && cfg.mutation_prob <= 1.0)) {
    throw std::invalid_argument("evolve: mutation_prob must lie in [0, 1]");
  }
  if (!seed.within_bounds()) throw std::invalid_argument("evolve: seed violates its bounds");

  Rng rng(cfg.seed);
  EvolveResult result;
  result.best = seed;

  struct Scored {
    HyperVector params;
    double fitness;
  };
  std::vector<Scored> archive;  // kept sorted by descending fitness

  const auto consider = [&](HyperVector candidate, int generation, double& sum, int& finite) {
    const double f = fitness(candidate);
    ++result.evaluations;
    if (!std::isfinite(f)) {
      result.warnings.push_back("generation " + std::to_string(generation) +
                                ": discarded candidate with non-finite fitness");
      return;
    }
    sum += f;
    ++finite;
    if (f > result.best_fitness) {
      result.best_fitness = f;
      result.best = candidate;
    }
    const auto pos = std::upper_bound(archive.begin(), archive.end(), f,
                                      [](double v, const Scored& s) { return v > s.fitness; });
    archive.insert(pos, Scored{std::move(candidate), f});
  };
  const auto record = [&](int generation, double sum, int finite) {
    result.history.push_back({generation, result.best_fitness,
                              finite > 0 ? sum / finite : std::numeric_limits<double>::quiet_NaN()});
  };

  {
    double sum = 0.0;
    int finite = 0;
    consider(seed, 0, sum, finite);
    record(0, sum, finite);
  }

  for (int g = 1; g <= cfg.generations; ++g) {
    double sum = 0.0;
    int finite = 0;
    // Parents come from the archive as it stood at the start of the generation.
    const std::size_t pool = std::min<std::size_t>(archive.size(), static_cast<std::size_t>(cfg.parent_pool));
    std::vector<double> weights(pool);
    if (pool > 0) {
      const double floor = archive[pool - 1].fitness;
      for (std::size_t i = 0; i < pool; ++i) weights[i] = archive[i].fitness - floor + 1e-12;
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<HyperVector> parents;
    parents.reserve(static_cast<std::size_t>(cfg.population));
    for (int i = 0; i < cfg.population; ++i) {
      if (pool == 0) {
        parents.push_back(seed);
        continue;
      }
      double pick = rng.uniform() * total;
      std::size_t chosen = pool - 1;
      for (std::size_t j = 0; j < pool; ++j) {
        if (pick < weights[j]) {
          chosen = j;
          break;
        }
        pick -= weights[j];
      }
      parents.push_back(archive[chosen].params);
    }
    for (const HyperVector& parent : parents) {
      consider(mutate(parent, cfg.mutation_prob, rng), g, sum, finite);
    }
    record(g, sum, finite);
  }
  return result;
}

// Uniform sampling inside the bounds of `space`; the baseline the GA is
// measured against at equal evaluation budget.
inline EvolveResult random_search(const HyperVector& space, const FitnessFn& fitness,
                                  std::size_t evaluations, std::uint64_t seed) {
  Rng rng(seed);
  EvolveResult result;
  result.best = space;
  for (std::size_t i = 0; i < evaluations; ++i) {
    HyperVector candidate = space;
    for (std::size_t j = 0; j < candidate.size(); ++j) {
      candidate[j].value = rng.uniform(candidate[j].low, candidate[j].high);
    }
    const double f = fitness(candidate);
    ++result.evaluations;
    if (std::isfinite(f) && f > result.best_fitness) {
      result.best_fitness = f;
      result.best = candidate;
    }
    result.history.push_back({static_cast<int>(i), result.best_fitness, f});
  }
  return result;
}

inline void write_history_csv(std::ostream& os, std::span<const GenerationStats> history) {
  os << "generation,best,mean\n";
  for (const GenerationStats& g : history) os << g.generation << ',' << g.best << ',' << g.mean << '\n';
}

// ---------------------------------------------------------------------------
// Anchor optimization

inline double anchor_distance(const Anchor& box, const Anchor& anchor) {
  return 1.0 - shape_iou(box, anchor);
}

// Highest shape IoU of `box` against any anchor.
inline double best_anchor_iou(const Anchor& box, std::span<const Anchor> anchors) {
  double best = 0.0;
  for (const Anchor& a : anchors) best = std::max(best, shape_iou(box, a));
  return best;
}

inline double mean_best_iou(std::span<const Anchor> boxes, std::span<const Anchor> anchors) {
  if (boxes.empty()) return 0.0;
  double sum = 0.0;
  for (const Anchor& b : boxes) sum += best_anchor_iou(b, anchors);
  return sum / static_cast<double>(boxes.size());
}

// Fraction of boxes whose best anchor IoU exceeds `threshold`.
inline double anchor_recall(std::span<const Anchor> boxes, std::span<const Anchor> anchors,
                            double threshold = kDefaultAssignIouThreshold) {
  if (boxes.empty()) return 0.0;
  const auto hits = std::count_if(boxes.begin(), boxes.end(), [&](const Anchor& b) {
    return best_anchor_iou(b, anchors) > threshold;
  });
  return static_cast<double>(hits) / static_cast<double>(boxes.size());
}

inline void sort_by_area(std::vector<Anchor>& anchors) {
  std::stable_sort(anchors.begin(), anchors.end(),
                   [](const Anchor& a, const Anchor& b) { return a.area() < b.area(); });
}

struct KMeansResult {
  std::vector<Anchor> anchors;          // sorted by area
  std::vector<std::size_t> assignment;  // anchor index per input box
  std::vector<double> total_distance;   // after each assignment step
  int iterations = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::size_t nearest_anchor(const Anchor& box, std::span<const Anchor> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = anchor_distance(box, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace detail

// k-means over (w, h) shapes with distance 1 - IoU of concentric boxes and
// per-cluster median centroids. Initialization is k-means++ under the same
// distance. A median update is only accepted when it does not raise the
// cluster's total distance, so the total is nonincreasing across iterations.
// An empty cluster is reseeded at the box farthest from its centroid.
inline KMeansResult kmeans_anchors_detailed(std::span<const Anchor> boxes, int k, int iters, Rng& rng) {
  if (k < 1) throw std::invalid_argument("kmeans_anchors: k must be >= 1");
  if (iters < 1) throw std::invalid_argument("kmeans_anchors: iters must be >= 1");
  for (const Anchor& b : boxes) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
      throw std::invalid_argument("kmeans_anchors: box sizes must be positive");
    }
  }
  {
    std::vector<std::pair<double, double>> distinct;
    for (const Anchor& b : boxes) distinct.emplace_back(b.w, b.h);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<std::size_t>(k) > distinct.size()) {
      throw std::invalid_argument("kmeans_anchors: k exceeds the number of distinct boxes");
    }
  }

  const std::size_t n = boxes.size();
  const auto kk = static_cast<std::size_t>(k);

  std::vector<Anchor> centroids;
  centroids.push_back(boxes[rng.index(n)]);
  std::vector<double> nearest(n);
  while (centroids.size() < kk) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const Anchor& c : centroids) d = std::min(d, anchor_distance(boxes[i], c));
      nearest[i] = d;
      total += d;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      chosen = i;
      if (pick < nearest[i]) break;
      pick -= nearest[i];
    }
    centroids.push_back(boxes[chosen]);
  }

  const auto cluster_cost = [&](const std::vector<std::size_t>& assign, std::size_t cluster,
                                const Anchor& centroid) {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] == cluster) cost += anchor_distance(boxes[i], centroid);
    }
    return cost;
  };

  KMeansResult result;
  std::vector<std::size_t> assign(n, kk);
  for (int it = 0; it < iters; ++it) {
    std::vector<std::size_t> next(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = detail::nearest_anchor(boxes[i], centroids);
      total += anchor_distance(boxes[i], centroids[next[i]]);
    }
    result.total_distance.push_back(total);
    result.iterations = it + 1;
    const bool stable = next == assign;
    assign = std::move(next);
    if (stable) break;

    std::vector<std::size_t> sizes(kk, 0);
    for (std::size_t a : assign) ++sizes[a];
    std::vector<bool> reseeded_box(n, false);
    for (std::size_t j = 0; j < kk; ++j) {
      if (sizes[j] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (reseeded_box[i] || sizes[assign[i]] <= 1) continue;
        const double d = anchor_distance(boxes[i], centroids[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;
      --sizes[assign[far]];
      centroids[j] = boxes[far];
      assign[far] = j;
      sizes[j] = 1;
      reseeded_box[far] = true;
    }

    for (std::size_t j = 0; j < kk; ++j) {
      if (sizes[j] == 0) continue;
      std::vector<double> ws, hs;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != j) continue;
        ws.push_back(boxes[i].w);
        hs.push_back(boxes[i].h);
      }
      const Anchor candidate{detail::median(std::move(ws)), detail::median(std::move(hs))};
      if (cluster_cost(assign, j, candidate) <= cluster_cost(assign, j, centroids[j])) {
        centroids[j] = candidate;
      }
    }
  }

  // Report anchors in area order with the assignment remapped to match.
  std::vector<std::size_t> order(kk);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return centroids[a].area() < centroids[b].area();
  });
  std::vector<std::size_t> rank(kk);
  for (std::size_t r = 0; r < kk; ++r) {
    result.anchors.push_back(centroids[order[r]]);
    rank[order[r]] = r;
  }
  result.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.assignment[i] = rank[assign[i]];
  return result;
}

inline std::vector<Anchor> kmeans_anchors(std::span<const Anchor> boxes, int k, int iters, Rng& rng) {
  return kmeans_anchors_detailed(boxes, k, iters, rng).anchors;
}

// Recall above `threshold` first, mean best IoU second. The IoU term is
// divided by n + 1, so it can never outweigh one more recalled box.
inline double anchor_fitness(std::span<const Anchor> boxes, std::span<const Anchor> anchors,
                             double threshold = kDefaultAssignIouThreshold) {
  return anchor_recall(boxes, anchors, threshold) +
         mean_best_iou(boxes, anchors) / static_cast<double>(boxes.size() + 1);
}

// Refines anchors with the GA under anchor_fitness. The starting anchors are
// the seed, so the result never scores below them.
inline std::vector<Anchor> evolve_anchors(std::span<const Anchor> boxes, std::span<const Anchor> initial,
                                          const GAConfig& cfg, double max_side,
                                          double threshold = kDefaultAssignIouThreshold) {
  std::vector<HyperParam> params;
  for (std::size_t i = 0; i < initial.size(); ++i) {
    const double hi = std::max({max_side, initial[i].w, initial[i].h});
    params.push_back({"w" + std::to_string(i), initial[i].w, 1e-3, hi, 0.1});
    params.push_back({"h" + std::to_string(i), initial[i].h, 1e-3, hi, 0.1});
  }
  const auto unpack = [n = initial.size()](const HyperVector& v) {
    std::vector<Anchor> anchors(n);
    for (std::size_t i = 0; i < n; ++i) anchors[i] = {v[2 * i].value, v[2 * i + 1].value};
    return anchors;
  };
  const EvolveResult r = evolve(
      HyperVector(std::move(params)),
      [&](const HyperVector& v) { return anchor_fitness(boxes, unpack(v), threshold); }, cfg);
  std::vector<Anchor> out = unpack(r.best);
  sort_by_area(out);
  return out;
}

}  // namespace bofkit
