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

#include "bofkit/trainsched.hpp"

#include <gtest/gtest.h>

#include "bofkit/random.hpp"

namespace bofkit {
namespace {

TEST(CosineLrTest, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 1000, 0.01, 0.0001), 0.01);
  EXPECT_DOUBLE_EQ(cosine_lr(1000, 1000, 0.01, 0.0001), 0.0001);
  EXPECT_NEAR(cosine_lr(500, 1000, 0.01, 0.0001), 0.00505, 1e-15);
}

TEST(CosineLrTest, MonotoneAndContinuous) {
  const std::int64_t T = 5000;
  double prev = cosine_lr(0, T, 0.1, 0.001);
  for (std::int64_t t = 1; t <= T; ++t) {
    const double v = cosine_lr(t, T, 0.1, 0.001);
    EXPECT_LE(v, prev);
    EXPECT_LT(prev - v, 0.1 * 3.15 / T);  // |d lr/dt| <= (max-min) * pi / (2T)
    prev = v;
  }
}

TEST(CosineLrTest, RejectsBadArguments) {
  EXPECT_THROW(cosine_lr(0, 0, 0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(cosine_lr(11, 10, 0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(cosine_lr(-1, 10, 0.1, 0.0), std::invalid_argument);
}

TEST(StepDecayTest, DefaultSchedule) {
  EXPECT_EQ(kDefaultLearningRate, 0.01);
  EXPECT_EQ(kDefaultMomentum, 0.9);
  EXPECT_EQ(kDefaultWeightDecay, 0.0005);
  EXPECT_EQ(kDefaultTotalSteps, 500500);
  EXPECT_EQ(default_milestones(), (std::vector<std::int64_t>{400000, 450000}));
  const auto& m = default_milestones();
  EXPECT_EQ(step_decay_lr(399999, m), 0.01);
  EXPECT_NEAR(step_decay_lr(400000, m), 0.001, 1e-18);
  EXPECT_NEAR(step_decay_lr(449999, m), 0.001, 1e-18);
  EXPECT_NEAR(step_decay_lr(450000, m), 0.0001, 1e-18);
  EXPECT_NEAR(step_decay_lr(500500, m), 0.0001, 1e-18);
}

TEST(StepDecayTest, NoMilestonesIsConstant) {
  for (std::int64_t t : {0, 10, 1000000}) EXPECT_EQ(step_decay_lr(t, {}, 0.02, 0.1), 0.02);
}

TEST(StepDecayTest, PiecewiseConstantRightContinuous) {
  const std::vector<std::int64_t> m{10, 20, 30};
  for (std::int64_t t = 0; t < 40; ++t) {
    const double v = step_decay_lr(t, m, 1.0, 0.5);
    const int passed = (t >= 10) + (t >= 20) + (t >= 30);
    EXPECT_EQ(v, std::pow(0.5, passed)) << t;
  }
  const std::vector<std::int64_t> unsorted{20, 10};
  EXPECT_THROW(step_decay_lr(0, unsorted), std::invalid_argument);
}

TEST(DynamicMinibatchTest, Examples) {
  EXPECT_EQ(dynamic_minibatch(8, 608, 608), 8);
  EXPECT_EQ(dynamic_minibatch(8, 608, 320), 28);
  EXPECT_EQ(dynamic_minibatch(8, 320, 608), 8);
  EXPECT_EQ(dynamic_minibatch(8, 608, 320, 16), 16);
  EXPECT_EQ(dynamic_minibatch(8, 608, 320, 4), 8);
}

TEST(DynamicMinibatchTest, SameResolutionIsIdentity) {
  for (int r = 32; r <= 1024; r += 32) EXPECT_EQ(dynamic_minibatch(5, r, r), 5);
}

TEST(DynamicMinibatchTest, RejectsBadResolution) {
  EXPECT_THROW(dynamic_minibatch(8, 600, 320), std::invalid_argument);
  EXPECT_THROW(dynamic_minibatch(8, 608, 0), std::invalid_argument);
  EXPECT_THROW(dynamic_minibatch(0, 608, 320), std::invalid_argument);
}

TEST(CmBNTest, TwoMiniBatchExample) {
  CmBNAccumulator acc(1, 2);
  const std::vector<double> a{1, 2}, b{3, 4};
  const BatchStats first = cmbn_update(acc, a);
  EXPECT_DOUBLE_EQ(first.mean[0], 1.5);
  EXPECT_DOUBLE_EQ(first.variance[0], 0.25);
  EXPECT_EQ(acc.position(), 1);
  const BatchStats second = cmbn_update(acc, b);
  EXPECT_DOUBLE_EQ(second.mean[0], 2.5);
  EXPECT_DOUBLE_EQ(second.variance[0], 1.25);
  EXPECT_EQ(second.count, 4u);
  EXPECT_EQ(acc.position(), 0);
  // Next batch starts fresh.
  EXPECT_DOUBLE_EQ(cmbn_update(acc, b).mean[0], 3.5);
}

TEST(CmBNTest, SingleMiniBatchIsPlainBatchNorm) {
  CmBNAccumulator acc(2, 1);
  const std::vector<double> x{1, 10, 3, 20, 5, 30};  // [3][2]
  for (int i = 0; i < 3; ++i) {
    const BatchStats s = acc.update(x);
    EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
    EXPECT_DOUBLE_EQ(s.mean[1], 20.0);
    EXPECT_NEAR(s.variance[0], 8.0 / 3.0, 1e-14);
    EXPECT_NEAR(s.variance[1], 200.0 / 3.0, 1e-12);
  }
}

TEST(CmBNTest, FinalUpdateEqualsWholeBatch) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int channels = 1 + static_cast<int>(rng.index(4));
    const int splits = 1 + static_cast<int>(rng.index(8));
    CmBNAccumulator acc(channels, splits);
    std::vector<std::vector<double>> whole(static_cast<std::size_t>(channels));
    BatchStats last;
    for (int m = 0; m < splits; ++m) {
      const std::size_t n = 1 + rng.index(16);
      std::vector<double> mb;
      for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < channels; ++c) {
          const double v = rng.normal(100.0 * c, 1.0 + c);
          mb.push_back(v);
          whole[static_cast<std::size_t>(c)].push_back(v);
        }
      }
      last = acc.update(mb);
    }
    for (int c = 0; c < channels; ++c) {
      const auto& v = whole[static_cast<std::size_t>(c)];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      EXPECT_NEAR(last.mean[c], mean, 1e-10);
      EXPECT_NEAR(last.variance[c], var, 1e-10);
      EXPECT_EQ(last.count, v.size());
    }
  }
}

TEST(CmBNTest, RejectsBadShapes) {
  EXPECT_THROW(CmBNAccumulator(0, 1), std::invalid_argument);
  EXPECT_THROW(CmBNAccumulator(1, 0), std::invalid_argument);
  CmBNAccumulator acc(2, 2);
  EXPECT_THROW(acc.update(std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(acc.update(std::vector<double>{}), std::invalid_argument);
}

}  // namespace
}  // namespace bofkit
