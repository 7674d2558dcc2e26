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

#include <chrono>
#include <random>

#include <gtest/gtest.h>

#include "angernet/checkpoint.hpp"
#include "angernet/model.hpp"
#include "angernet/runtime.hpp"

namespace angernet {
namespace {

// Hand count: conv (out*in*k + out) plus 2*out per batch norm.
std::size_t hand_count(std::size_t f4) {
  return (32 * 1 * 64 + 32) + 2 * 32 + (64 * 32 * 32 + 64) + 2 * 64 + (128 * 64 * 16 + 128) +
         2 * 128 + (f4 * 128 * 8 + f4) + 2 * f4 + (2 * f4 * 2 + 2);
}

Tensor noise(std::size_t n, Rng& rng, float scale = 25.0f) {
  std::normal_distribution<float> g(0.0f, scale);
  Tensor t(1, n);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

TEST(Model, ParameterCounts) {
  Rng rng(0);
  EXPECT_EQ(hand_count(16), 215826u);
  EXPECT_EQ(hand_count(256), 463266u);
  EXPECT_EQ(count_parameters(ModelConfig::standard()), 215826u);
  EXPECT_EQ(count_parameters(ModelConfig::standard(256)), 463266u);
  EXPECT_EQ(build_model(ModelConfig::standard(), rng).parameter_count(), 215826u);
  EXPECT_EQ(build_model(ModelConfig::standard(256), rng).parameter_count(), 463266u);
  EXPECT_EQ(count_parameters(ModelConfig{}), 0u);
}

TEST(Model, StageLengthsForOneWindow) {
  Rng rng(0);
  const auto net = build_model(ModelConfig::standard(), rng);
  const std::vector<std::size_t> expected{9601, 1200, 601, 75, 38, 20, 19};
  EXPECT_EQ(net.stage_lengths(19200), expected);
}

TEST(Model, MinimumInputLength) {
  Rng rng(0);
  const auto net = build_model(ModelConfig::standard(), rng);
  const std::size_t m = net.min_input_length();
  EXPECT_NO_THROW(net.stage_lengths(m));
  EXPECT_THROW(net.stage_lengths(m - 1), ShapeError);
}

TEST(Model, TooShortInputNamesTheStage) {
  Rng rng(0);
  auto net = build_model(ModelConfig::standard(), rng);
  try {
    const Tensor x(1, 100);
    net.forward(std::span(&x, 1), Mode::kEval);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

TEST(Model, ScoresAreProbabilitiesForAnyLength) {
  Rng rng(1);
  auto net = build_model(ModelConfig::standard(), rng);
  for (std::size_t len : {478u, 16000u, 19200u, 40000u}) {
    const auto r = forward_scores(net, noise(len, rng));
    EXPECT_GE(r.p_anger, 0.0);
    EXPECT_LE(r.p_anger, 1.0);
    EXPECT_EQ(r.logits.size(), 2u);
    const long double e0 = std::exp(static_cast<long double>(r.logits[0]));
    const long double e1 = std::exp(static_cast<long double>(r.logits[1]));
    EXPECT_NEAR(r.p_anger, static_cast<double>(e1 / (e0 + e1)), 1e-15);
  }
}

TEST(Model, EvalForwardIsDeterministic) {
  Rng rng(2);
  auto net = build_model(ModelConfig::standard(), rng);
  const auto x = noise(19200, rng);
  EXPECT_EQ(forward_scores(net, x).p_anger, forward_scores(net, x).p_anger);
}

TEST(Model, SingleWindowLatency) {
  tune_allocator();
  Rng rng(3);
  auto net = build_model(ModelConfig::standard(), rng);
  const auto x = noise(19200, rng);
  forward_scores(net, x);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) forward_scores(net, x);
  const auto ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 5;
  EXPECT_LT(ms, 100.0);
}

TEST(Model, ConfigJsonRoundTrip) {
  const auto c = ModelConfig::standard(256, 0.3);
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
}

TEST(Model, ConfigValidation) {
  auto c = ModelConfig::standard();
  c.layers.back().out_channels = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::standard();
  c.layers[3].dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, FreezeKeepsTensorsAndStatisticsBitwise) {
  Rng rng(4);
  auto net = build_model(ModelConfig::standard(), rng);
  net.set_frozen(2);
  EXPECT_EQ(net.freeze_mask(), (std::vector<bool>{true, true, false, false, false}));
  const auto before = save_weights(net);
  Optimizer opt(AdamHyper{1e-2f});
  std::vector<Tensor> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(noise(19200, rng));
  for (int step = 0; step < 3; ++step) {
    const auto logits = net.forward(batch, Mode::kTrain, &rng);
    std::vector<Tensor> g;
    for (std::size_t b = 0; b < logits.size(); ++b) {
      const std::array<float, 2> pair{logits[b](0, 0), logits[b](1, 0)};
      const auto ce = softmax_cross_entropy<float>(pair, static_cast<int>(b % 2));
      g.push_back(Tensor::from(2, 1, {ce.logit_grad[0], ce.logit_grad[1]}));
    }
    net.zero_grad();
    net.backward(g);
    opt.step(net);
  }
  const auto after = save_weights(net);
  for (const auto& t : before.tensors()) {
    const auto* u = after.find(t.name);
    ASSERT_NE(u, nullptr);
    const bool low = t.name.rfind("layer1.", 0) == 0 || t.name.rfind("layer2.", 0) == 0;
    if (low) {
      EXPECT_EQ(t.data, u->data) << t.name;
    } else if (t.name.find("running") == std::string::npos) {
      EXPECT_NE(t.data, u->data) << t.name;
    }
  }
}

TEST(Model, FrozenParametersHaveNoGradientBuffers) {
  Rng rng(5);
  auto net = build_model(ModelConfig::standard(), rng);
  net.set_frozen(3);
  net.for_each_parameter([](const std::string& name, Tensor& t) {
    const bool frozen = name.rfind("layer1.", 0) == 0 || name.rfind("layer2.", 0) == 0 ||
                        name.rfind("layer3.", 0) == 0;
    EXPECT_EQ(t.has_grad(), !frozen) << name;
  });
  EXPECT_THROW(net.set_frozen(6), ConfigError);
}

TEST(Model, TransferLoadsExactlyTheFirstLayers) {
  Rng rng(6);
  auto source = build_model(ModelConfig::standard(), rng);
  auto target = build_model(ModelConfig::standard(), rng);
  const auto store = save_weights(source);
  const auto before = save_weights(target);
  const auto loaded = load_pretrained(target, store, 3);
  EXPECT_EQ(loaded.size(), 18u);  // (weight, bias, gamma, beta, mean, var) x 3
  const auto after = save_weights(target);
  for (const auto& t : after.tensors()) {
    const bool low = t.name[5] == '1' || t.name[5] == '2' || t.name[5] == '3';
    EXPECT_EQ(t.data, low ? store.find(t.name)->data : before.find(t.name)->data) << t.name;
  }
}

TEST(Model, TransferErrors) {
  Rng rng(7);
  auto net = build_model(ModelConfig::standard(), rng);
  WeightStore empty;
  try {
    load_pretrained(net, empty, 1);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("layer1.conv.weight"), std::string::npos);
  }
  auto wide = build_model(ModelConfig::standard(256), rng);
  const auto store = save_weights(wide);
  EXPECT_NO_THROW(load_pretrained(net, store, 3));
  try {
    load_pretrained(net, store, 4);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("256"), std::string::npos);
    EXPECT_NE(what.find("16"), std::string::npos);
  }
  EXPECT_THROW(load_pretrained(net, store, 6), ConfigError);
}

}  // namespace
}  // namespace angernet
