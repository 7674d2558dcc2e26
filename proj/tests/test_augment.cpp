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
#include <map>

#include <gtest/gtest.h>

#include "angernet/augment.hpp"
#include "support/oracles.hpp"

namespace angernet {
namespace {

double relative_l2(std::span<const float> a, std::span<const float> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

std::span<const float> middle(const std::vector<float>& x, std::size_t n) {
  return std::span<const float>(x).subspan((x.size() - n) / 2, n);
}

TEST(TimeStretch, UnitRateIsExactPassthrough) {
  const auto x = oracle::sine(440.0, 1.2, 16000.0);
  EXPECT_EQ(time_stretch(x, 1.0), x);
}

TEST(TimeStretch, VocoderAtUnitRateReconstructs) {
  const auto x = oracle::sine(440.0, 1.2, 16000.0);
  const auto y = phase_vocoder(x, 1.0);
  ASSERT_EQ(y.size(), x.size());
  EXPECT_LT(relative_l2(y, x), 0.05);
}

TEST(TimeStretch, LengthFollowsRate) {
  const std::vector<float> x(19200, 0.1f);
  for (double r : {0.9, 0.95, 1.05, 1.1}) {
    const double expected = 19200.0 / r;
    EXPECT_NEAR(static_cast<double>(time_stretch(x, r).size()), expected, 256.0) << r;
  }
  EXPECT_NEAR(static_cast<double>(time_stretch(x, 1.1).size()), 17455.0, 256.0);
}

TEST(TimeStretch, PreservesPitch) {
  const auto x = oracle::sine(440.0, 1.2, 16000.0);
  for (double r : {0.9, 1.1}) {
    const auto y = time_stretch(x, r);
    const double f = oracle::dominant_frequency(middle(y, 8000), 16000.0, 380.0, 500.0);
    EXPECT_NEAR(f, 440.0, 4.4) << r;
  }
}

TEST(PitchShift, ZeroIsExactPassthrough) {
  const auto x = oracle::sine(440.0, 0.5, 16000.0);
  EXPECT_EQ(pitch_shift(x, 0), x);
}

TEST(PitchShift, ShiftsToneByQuarterSteps) {
  const auto x = oracle::sine(440.0, 1.2, 16000.0);
  for (int q : {-5, -2, 3, 5}) {
    const auto y = pitch_shift(x, q);
    ASSERT_EQ(y.size(), x.size());
    const double expected = 440.0 * std::pow(2.0, q / 24.0);
    const double f = oracle::dominant_frequency(middle(y, 8000), 16000.0, 350.0, 560.0);
    EXPECT_NEAR(f, expected, 0.01 * expected) << "q=" << q;
  }
  EXPECT_NEAR(440.0 * std::pow(2.0, 5.0 / 24.0), 508.4, 0.05);
}

TEST(PitchShift, CeilingIsEnforced) {
  const std::vector<float> x(4000, 0.0f);
  EXPECT_THROW(pitch_shift(x, 13), ConfigError);
  EXPECT_NO_THROW(pitch_shift(x, -12));
}

TEST(Noise, ZeroSigmaIsBitwiseIdentity) {
  Rng rng(0);
  const auto x = oracle::sine(300.0, 0.2, 16000.0);
  EXPECT_EQ(add_noise(x, 0.0, rng), x);
}

TEST(Noise, StandardDeviationAndMean) {
  Rng rng(1);
  const double a = 36.2, sigma = 0.005 * a;
  const std::vector<float> zeros(19200, 0.0f);
  const auto y = add_noise(zeros, sigma, rng);
  double mean = 0.0, sq = 0.0;
  for (float v : y) mean += v;
  mean /= 19200.0;
  for (float v : y) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(std::sqrt(sq / 19199.0), 0.181, 0.181 * 0.05);

  const std::vector<float> many(100000, 0.0f);
  const auto z = add_noise(many, 1.0, rng);
  double m = 0.0;
  for (float v : z) m += v;
  EXPECT_LT(std::abs(m / 100000.0), 3.0 / std::sqrt(100000.0));
}

TEST(Augment, DisabledIsIdentity) {
  Rng rng(2);
  AugmentConfig cfg;
  cfg.enabled = false;
  const auto x = oracle::sine(200.0, 1.2, 16000.0, 30.0);
  EXPECT_EQ(augment_segment(x, cfg, rng), x);
}

TEST(Augment, IdentitySettingsAreIdentity) {
  Rng rng(3);
  const auto x = oracle::sine(200.0, 1.2, 16000.0, 30.0);
  EXPECT_EQ(apply_augmentation(x, AugmentDraw{1.0, 0.0, 0.0}, rng), x);
}

TEST(Augment, SameSeedSameOutputAndFixedLength) {
  const auto x = oracle::sine(180.0, 1.2, 16000.0, 30.0);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng a(seed), b(seed);
    const auto ya = augment_segment(x, AugmentConfig{}, a);
    const auto yb = augment_segment(x, AugmentConfig{}, b);
    EXPECT_EQ(ya, yb);
    ASSERT_EQ(ya.size(), 19200u);
    for (float v : ya) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Augment, QuarterStepsAreUniform) {
  Rng rng(4);
  const std::vector<float> seg(16, 1.0f);
  std::map<int, int> counts;
  const int N = 10000;
  for (int i = 0; i < N; ++i) {
    const auto d = draw_augmentation(seg, AugmentConfig{}, rng);
    EXPECT_EQ(d.quarter_steps, std::round(d.quarter_steps));
    EXPECT_GE(d.rate, 0.9);
    EXPECT_LE(d.rate, 1.1);
    EXPECT_GE(d.sigma, 0.0);
    EXPECT_LE(d.sigma, 0.005);
    ++counts[static_cast<int>(d.quarter_steps)];
  }
  ASSERT_EQ(counts.size(), 11u);
  const double p = 1.0 / 11.0;
  const double tol = 3.0 * std::sqrt(p * (1.0 - p) / N);
  for (const auto& [q, n] : counts) {
    EXPECT_GE(q, -5);
    EXPECT_LE(q, 5);
    EXPECT_NEAR(static_cast<double>(n) / N, p, tol) << "q=" << q;
  }
}

TEST(Augment, DeterministicStagesAreLinear) {
  // Samples on a 1/256 grid so that c * x is exact in float; otherwise the
  // input rounding alone perturbs low-energy bins well above 1e-5.
  auto x = oracle::sine(210.0, 1.2, 16000.0, 10.0);
  for (auto& v : x) v = std::round(v * 256.0f) / 256.0f;
  std::vector<float> cx(x.size());
  const float c = 3.0f;
  for (std::size_t i = 0; i < x.size(); ++i) cx[i] = c * x[i];
  Rng r1(5), r2(5);
  const AugmentDraw d{1.07, 3.0, 0.0};
  const auto y = apply_augmentation(x, d, r1);
  const auto cy = apply_augmentation(cx, d, r2);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (cy[i] - c * y[i]) * (cy[i] - c * y[i]);
    den += (c * y[i]) * (c * y[i]);
  }
  EXPECT_LT(std::sqrt(num / den), 1e-5);
}

TEST(Augment, ConfigValidationAndJson) {
  AugmentConfig bad;
  bad.stretch_min = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.noise_sigma_frac = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  AugmentConfig c;
  c.stretch_max = 1.2;
  c.integer_pitch_steps = false;
  const nlohmann::json j = c;
  const auto back = j.get<AugmentConfig>();
  EXPECT_EQ(back.stretch_max, 1.2);
  EXPECT_FALSE(back.integer_pitch_steps);
}

}  // namespace
}  // namespace angernet
