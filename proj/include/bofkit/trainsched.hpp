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
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace bofkit {

// Default COCO detector schedule.
inline constexpr double kDefaultLearningRate = 0.01;
inline constexpr double kDefaultMomentum = 0.9;
inline constexpr double kDefaultWeightDecay = 0.0005;
inline constexpr double kDefaultDecayFactor = 0.1;
inline constexpr std::int64_t kDefaultTotalSteps = 500500;
inline const std::vector<std::int64_t>& default_milestones() {
  static const std::vector<std::int64_t> m{400000, 450000};
  return m;
}

// lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
  if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step outside [0, total_steps]");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

// lr0 * factor^(number of milestones <= step).
inline double step_decay_lr(std::int64_t step, std::span<const std::int64_t> milestones,
                            double lr0 = kDefaultLearningRate, double factor = kDefaultDecayFactor) {
  if (!std::is_sorted(milestones.begin(), milestones.end())) {
    throw std::invalid_argument("step_decay_lr: milestones must be sorted");
  }
  double lr = lr0;
  for (std::int64_t m : milestones) {
    if (m > step) break;
    lr *= factor;
  }
  return lr;
}

// Mini-batch size for a smaller training resolution under a memory budget
// that grows quadratically with resolution: floor(base * (base_res/res)^2),
// never below base_mb. A positive max_minibatch caps the result (but not
// below base_mb); 0 leaves it uncapped.
inline int dynamic_minibatch(int base_mb, int base_res, int current_res, int max_minibatch = 0) {
  if (base_mb <= 0) throw std::invalid_argument("dynamic_minibatch: base mini-batch must be positive");
  for (int r : {base_res, current_res}) {
    if (r <= 0 || r % 32 != 0) {
      throw std::invalid_argument("dynamic_minibatch: resolutions must be positive multiples of 32");
    }
  }
  if (max_minibatch < 0) throw std::invalid_argument("dynamic_minibatch: max_minibatch must be >= 0");
  const auto num = static_cast<std::int64_t>(base_mb) * base_res * base_res;
  const auto den = static_cast<std::int64_t>(current_res) * current_res;
  std::int64_t mb = std::max<std::int64_t>(num / den, base_mb);
  if (max_minibatch > 0) mb = std::max<std::int64_t>(std::min<std::int64_t>(mb, max_minibatch), base_mb);
  return static_cast<int>(mb);
}

// ---------------------------------------------------------------------------
// Cross mini-batch normalization statistics

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population (biased)
  std::size_t count = 0;         // samples per channel contributing
};

// Accumulates per-channel raw moments over the mini-batches of one batch.
// Each update returns statistics over every mini-batch seen so far in the
// current batch; after minibatches_per_batch updates the sums reset.
class CmBNAccumulator {
 public:
  CmBNAccumulator(int channels, int minibatches_per_batch)
      : channels_(channels), per_batch_(minibatches_per_batch) {
    if (channels <= 0) throw std::invalid_argument("CmBNAccumulator: channels must be positive");
    if (minibatches_per_batch < 1) {
      throw std::invalid_argument("CmBNAccumulator: minibatches_per_batch must be >= 1");
    }
    reset();
  }

  int channels() const { return channels_; }
  int minibatches_per_batch() const { return per_batch_; }
  // Mini-batches already folded into the current batch.
  int position() const { return position_; }

  // `samples` is row-major [n][channels].
  BatchStats update(std::span<const double> samples) {
    if (samples.empty() || samples.size() % static_cast<std::size_t>(channels_) != 0) {
      throw std::invalid_argument("CmBNAccumulator::update: sample count must be a positive multiple of channels");
    }
    const std::size_t n = samples.size() / static_cast<std::size_t>(channels_);
    // Sums are taken about the batch's first sample to avoid cancellation
    // when the mean is large relative to the spread.
    if (count_ == 0) shift_.assign(samples.begin(), samples.begin() + channels_);
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < channels_; ++c) {
        const double x = samples[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)] - shift_[c];
        sum_[c] += x;
        sum_sq_[c] += x * x;
      }
    }
    count_ += n;

    BatchStats stats{std::vector<double>(channels_), std::vector<double>(channels_), count_};
    const auto cnt = static_cast<double>(count_);
    for (int c = 0; c < channels_; ++c) {
      const double d = sum_[c] / cnt;
      stats.mean[c] = shift_[c] + d;
      stats.variance[c] = std::max(0.0, sum_sq_[c] / cnt - d * d);
    }
    if (++position_ == per_batch_) reset();
    return stats;
  }

  void reset() {
    sum_.assign(channels_, 0.0);
    sum_sq_.assign(channels_, 0.0);
    shift_.assign(channels_, 0.0);
    count_ = 0;
    position_ = 0;
  }

 private:
  int channels_;
  int per_batch_;
  int position_ = 0;
  std::size_t count_ = 0;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
  std::vector<double> shift_;
};

inline BatchStats cmbn_update(CmBNAccumulator& acc, std::span<const double> minibatch) {
  return acc.update(minibatch);
}

}  // namespace bofkit
