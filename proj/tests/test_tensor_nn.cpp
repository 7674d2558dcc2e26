// Copyright 2026 The AngerNet Authors
// SPDX-License-Identifier: Apache-2.0
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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "angernet/nn.hpp"
#include "support/oracles.hpp"

namespace angernet {
namespace {

using DTensor = BasicTensor<double>;

DTensor random_tensor(std::size_t c, std::size_t l, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DTensor t(c, l);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

TEST(Tensor, ShapeAndIndexing) {
  Tensor t(3, 4, 1.5f);
  EXPECT_EQ(t.size(), 12u);
  t(2, 3) = 7.0f;
  EXPECT_EQ(t.values()[11], 7.0f);
  EXPECT_EQ(t.row(2)[3], 7.0f);
  EXPECT_FALSE(t.has_grad());
  t.enable_grad();
  EXPECT_TRUE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 12u);
  t.drop_grad();
  EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, FromRejectsWrongSize) {
  EXPECT_THROW(Tensor::from(2, 3, std::vector<float>(5)), ShapeError);
}

TEST(Conv1d, OutputLengthFormula) {
  EXPECT_EQ(conv_output_length(19200, 64, 2, 32), 9601u);
  EXPECT_EQ(conv_output_length(10, 3, 1, 0), 8u);
  EXPECT_FALSE(conv_output_length(2, 8, 1, 0).has_value());
  EXPECT_FALSE(pool_output_length(7, 8, 8).has_value());
  EXPECT_EQ(pool_output_length(9601, 8, 8), 1200u);
}

TEST(Conv1d, MatchesLoopOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> d(1, 5);
    const std::size_t cin = d(rng), cout = d(rng), k = d(rng), s = d(rng);
    const std::size_t pad = d(rng) - 1, len = k + d(rng) * 3;
    auto p = ConvParams<double>::create(cin, cout, k, s, pad);
    p.weight = random_tensor(cout, cin * k, rng);
    p.bias = random_tensor(cout, 1, rng);
    const auto x = random_tensor(cin, len, rng);
    const auto y = conv1d(x, p);
    std::size_t out_len = 0;
    const auto ref = oracle::conv1d(x.values(), cin, len, p.weight.values(), p.bias.values(), cout,
                                    k, s, pad, out_len);
    ASSERT_EQ(y.length(), out_len);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.values()[i], ref[i], 1e-12);
  }
}

TEST(Conv1d, ChannelMismatchIsShapeError) {
  auto p = ConvParams<float>::create(2, 3, 3);
  EXPECT_THROW(conv1d(Tensor(1, 10), p), ShapeError);
}

TEST(Conv1d, TooShortIsShapeError) {
  auto p = ConvParams<float>::create(1, 1, 8);
  EXPECT_THROW(conv1d(Tensor(1, 4), p), ShapeError);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  Rng rng(2);
  std::vector<DTensor> batch;
  for (int b = 0; b < 4; ++b) batch.push_back(random_tensor(3, 7, rng));
  for (auto& t : batch)
    for (auto& v : t.row(1)) v = 5.0 + 3.0 * v;
  auto p = BatchNormParams<double>::create(3);
  const auto y = batch_norm1d<double>(batch, p, nullptr);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (const auto& t : y)
      for (double v : t.row(c)) {
        sum += v;
        sq += v * v;
      }
    const double n = 28.0;
    EXPECT_NEAR(sum / n, 0.0, 1e-12);
    EXPECT_NEAR(sq / n, 1.0, 1e-4);  // epsilon keeps it slightly below 1
  }
}

TEST(BatchNorm, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  std::vector<DTensor> batch{DTensor::from(1, 2, {1.0, 3.0}), DTensor::from(1, 2, {5.0, 7.0})};
  auto p = BatchNormParams<double>::create(1);
  batch_norm1d<double>(batch, p, nullptr);
  // mean 4, unbiased variance 20/3
  EXPECT_NEAR(p.running_mean[0], 0.1 * 4.0, 1e-12);
  EXPECT_NEAR(p.running_var[0], 0.9 * 1.0 + 0.1 * (20.0 / 3.0), 1e-12);
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  auto p = BatchNormParams<double>::create(1);
  p.running_mean[0] = 2.0;
  p.running_var[0] = 4.0;
  p.gamma.values()[0] = 3.0;
  p.beta.values()[0] = 1.0;
  p.mode = Mode::kEval;
  std::vector<DTensor> batch{DTensor::from(1, 1, {6.0})};
  const auto y = batch_norm1d<double>(batch, p, nullptr);
  EXPECT_NEAR(y[0](0, 0), 3.0 * (4.0 / std::sqrt(4.0 + 1e-5)) + 1.0, 1e-9);
  EXPECT_EQ(p.running_mean[0], 2.0);
}

TEST(Relu, ZeroHasZeroSubgradient) {
  const auto x = DTensor::from(1, 3, {-1.0, 0.0, 2.0});
  const auto y = relu(x);
  EXPECT_EQ(y.values()[0], 0.0);
  EXPECT_EQ(y.values()[2], 2.0);
  const auto g = relu_backward(x, DTensor::from(1, 3, {1.0, 1.0, 1.0}));
  EXPECT_EQ(g.values()[0], 0.0);
  EXPECT_EQ(g.values()[1], 0.0);
  EXPECT_EQ(g.values()[2], 1.0);
}

TEST(MaxPool, FirstMaximumWinsTies) {
  const auto x = DTensor::from(1, 8, {1, 3, 3, 0, 2, 2, 5, 5});
  std::vector<std::uint32_t> arg;
  const auto y = max_pool1d(x, 4, 4, &arg);
  ASSERT_EQ(y.length(), 2u);
  EXPECT_EQ(y(0, 0), 3.0);
  EXPECT_EQ(y(0, 1), 5.0);
  EXPECT_EQ(arg[0], 1u);
  EXPECT_EQ(arg[1], 6u);
  const auto g = max_pool1d_backward(8, arg, DTensor::from(1, 2, {1.0, 2.0}));
  EXPECT_EQ(g.values()[1], 1.0);
  EXPECT_EQ(g.values()[2], 0.0);
  EXPECT_EQ(g.values()[6], 2.0);
  EXPECT_EQ(g.values()[7], 0.0);
}

TEST(Dropout, EvalIsIdentityAndTrainIsUnbiased) {
  Rng rng(3);
  DTensor x(1, 200000, 1.0);
  const auto e = dropout(x, 0.5, Mode::kEval, rng, nullptr);
  EXPECT_EQ(e.values()[123], 1.0);
  std::vector<std::uint8_t> mask;
  const auto y = dropout(x, 0.5, Mode::kTrain, rng, &mask);
  double mean = 0.0;
  for (double v : y.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    mean += v;
  }
  EXPECT_NEAR(mean / 200000.0, 1.0, 0.01);
  EXPECT_THROW(check_dropout_rate(1.0), ConfigError);
  EXPECT_THROW(check_dropout_rate(-0.1), ConfigError);
}

TEST(GlobalAveragePool, MeanOverTime) {
  const auto x = DTensor::from(2, 3, {1, 2, 3, 4, 5, 6});
  const auto y = global_average_pool(x);
  EXPECT_DOUBLE_EQ(y(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(y(1, 0), 5.0);
  const auto g = global_average_pool_backward(DTensor::from(2, 1, {3.0, 6.0}), 3);
  EXPECT_DOUBLE_EQ(g(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(g(1, 0), 2.0);
}

TEST(CrossEntropy, StableForLargeLogits) {
  const std::array<double, 2> logits{1000.0, -1000.0};
  const auto r = softmax_cross_entropy<double>(logits, 1);
  EXPECT_NEAR(r.loss, 2000.0, 1e-9);
  EXPECT_NEAR(r.probabilities[0], 1.0, 1e-15);
  EXPECT_NEAR(r.logit_grad[1], -1.0, 1e-15);
}

TEST(CrossEntropy, ValueAndGradient) {
  const std::array<double, 2> logits{0.3, -0.2};
  const auto r = softmax_cross_entropy<double>(logits, 0);
  const double p0 = std::exp(0.3) / (std::exp(0.3) + std::exp(-0.2));
  EXPECT_NEAR(r.loss, -std::log(p0), 1e-14);
  EXPECT_NEAR(r.logit_grad[0], p0 - 1.0, 1e-14);
  EXPECT_NEAR(r.logit_grad[1], 1.0 - p0, 1e-14);
}

TEST(CrossEntropy, NonFiniteIsNumericError) {
  const std::array<double, 2> logits{std::nan(""), 0.0};
  EXPECT_THROW(softmax_cross_entropy<double>(logits, 0), NumericError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps').
  std::vector<double> w{1.0, -2.0};
  std::vector<double> g{0.5, -3.0};
  AdamState<double> st;
  st.lr = 0.01;
  adam_step<double>(w, g, st);
  EXPECT_NEAR(w[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(w[1], -2.0 + 0.01, 1e-9);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, MatchesHandRolledRecurrence) {
  std::vector<double> w{0.7};
  AdamState<double> st;
  double m = 0.0, v = 0.0, ref = 0.7;
  for (int t = 1; t <= 25; ++t) {
    const double g = std::sin(0.3 * t) + 0.5 * ref;
    std::vector<double> grad{g};
    adam_step<double>(w, grad, st);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    ref -= 5e-3 * mh / (std::sqrt(vh) + 1e-8);
    ASSERT_NEAR(w[0], ref, 1e-12) << "step " << t;
  }
}

TEST(Adam, SizeMismatchIsShapeError) {
  std::vector<double> w{1.0};
  std::vector<double> g{1.0, 2.0};
  AdamState<double> st;
  EXPECT_THROW(adam_step<double>(w, g, st), ShapeError);
}

}  // namespace
}  // namespace angernet
