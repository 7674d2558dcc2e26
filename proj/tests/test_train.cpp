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

#include <filesystem>

#include <gtest/gtest.h>

#include "angernet/train.hpp"
#include "support/oracles.hpp"

namespace angernet {
namespace {

// Positives are high tones, negatives low tones, all at the training level.
std::vector<LabeledClip> tone_clips(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(-20.0, 20.0);
  std::vector<LabeledClip> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int pos : {1, 0}) {
      const double f = (pos ? 600.0 : 150.0) + jitter(rng);
      AudioClip raw{oracle::sine(f, 1.5, 16000.0, 0.3), 16000};
      out.push_back({"clip" + std::to_string(out.size()),
                     pos ? BinaryLabel::kPositive : BinaryLabel::kNegative,
                     normalize_and_scale(raw, {})});
    }
  }
  return out;
}

TrainConfig small_config(std::size_t steps, std::size_t val_every) {
  TrainConfig c;
  c.per_class = 2;
  c.max_steps = steps;
  c.val_every = val_every;
  c.seed = 11;
  return c;
}

const std::vector<float>& tensor_data(const WeightStore& s, const std::string& name) {
  return s.find(name)->data;
}

TEST(Training, SameSeedSameLossHistory) {
  const auto train = tone_clips(3, 1), val = tone_clips(2, 2);
  const auto cfg = small_config(4, 2);
  const auto a = run_training(cfg, train, val);
  const auto b = run_training(cfg, train, val);
  ASSERT_EQ(a.state.loss_history.size(), 4u);
  EXPECT_EQ(a.state.loss_history, b.state.loss_history);
  EXPECT_EQ(encode_anw(save_weights(a.final_net)), encode_anw(save_weights(b.final_net)));
}

TEST(Training, FrozenLayersStayBitwiseIdentical) {
  Rng src_rng(99);
  const auto source = save_weights(build_model(ModelConfig::standard(), src_rng));
  const auto train = tone_clips(3, 3), val = tone_clips(2, 4);
  const auto r = run_training(small_config(3, 3), train, val, {}, &source);
  const auto after = save_weights(r.final_net);
  for (const std::string layer : {"layer1", "layer2"}) {
    for (const std::string t : {".conv.weight", ".conv.bias", ".bn.gamma", ".bn.beta",
                                ".bn.running_mean", ".bn.running_var"}) {
      EXPECT_EQ(tensor_data(after, layer + t), tensor_data(source, layer + t)) << layer + t;
    }
  }
  // loaded but trainable
  EXPECT_NE(tensor_data(after, "layer3.conv.weight"), tensor_data(source, "layer3.conv.weight"));
  EXPECT_EQ(r.final_net.freeze_mask(), (std::vector<bool>{true, true, false, false, false}));
}

TEST(Training, BestAucIsMonotoneAndCheckpointTracksIt) {
  oracle::TempDir dir("train");
  const auto train = tone_clips(3, 5), val = tone_clips(3, 6);
  std::ostringstream log;
  const auto r = run_training(small_config(6, 1), train, val, {dir.str("run"), &log});
  ASSERT_EQ(r.state.validations.size(), 6u);
  double best = -1.0;
  for (const auto& v : r.state.validations) {
    EXPECT_EQ(v.improved, v.auc > best) << "step " << v.step;
    best = std::max(best, v.auc);
  }
  ASSERT_TRUE(r.state.best_val_auc);
  EXPECT_EQ(*r.state.best_val_auc, best);

  const auto ckpt = load_checkpoint(r.state.best_checkpoint);
  EXPECT_EQ(ckpt.step, r.state.best_step);
  EXPECT_EQ(ckpt.extra.at("best_val_auc").get<double>(), best);
  auto reloaded = ckpt.net;
  EXPECT_NEAR(validate(reloaded, val), best, 1e-9);

  // one loss line per step plus one validation line per step
  std::size_t lines = 0;
  std::istringstream in(log.str());
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("step"));
    ++lines;
  }
  EXPECT_EQ(lines, 12u);
  EXPECT_TRUE(std::filesystem::exists(dir.str("run/train_log.jsonl")));
}

TEST(Training, CheckpointWrittenOnlyOnImprovement) {
  oracle::TempDir dir("train2");
  const auto train = tone_clips(2, 7), val = tone_clips(2, 8);
  const auto r = run_training(small_config(4, 1), train, val, {dir.str("run")});
  std::size_t last_improved = 0;
  for (const auto& v : r.state.validations) {
    if (v.improved) last_improved = v.step;
  }
  EXPECT_EQ(load_checkpoint(r.state.best_checkpoint).step, last_improved);
}

TEST(Training, RepeatedBatchLossDecreases) {
  Rng rng(4);
  auto net = build_model(ModelConfig::standard(16, 0.0), rng);
  Optimizer opt(AdamHyper{1e-4f});
  const auto clips = tone_clips(2, 9);
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  for (const auto& c : clips) {
    inputs.push_back(to_tensor(padded_window(c.clip.samples, 0, 19200)));
    labels.push_back(c.label == BinaryLabel::kPositive ? 1 : 0);
  }
  double previous = train_step(net, opt, inputs, labels, rng);
  for (int i = 0; i < 15; ++i) {
    const double loss = train_step(net, opt, inputs, labels, rng);
    EXPECT_LE(loss, previous + 1e-4) << "step " << i;
    previous = loss;
  }
}

TEST(Training, NonFiniteLossIsNumericError) {
  Rng rng(5);
  auto net = build_model(ModelConfig::standard(16, 0.0), rng);
  Optimizer opt(AdamHyper{});
  const std::vector<float> bad(19200, std::numeric_limits<float>::quiet_NaN());
  std::vector<Tensor> inputs{to_tensor(bad), to_tensor(std::vector<float>(19200, 0.5f))};
  const std::vector<int> labels{1, 0};
  EXPECT_THROW(train_step(net, opt, inputs, labels, rng), NumericError);
}

TEST(Training, EmptySplitsAreConfigErrors) {
  const auto clips = tone_clips(1, 10);
  EXPECT_THROW(run_training(small_config(1, 1), {}, clips), ConfigError);
  EXPECT_THROW(run_training(small_config(1, 1), clips, {}), ConfigError);
}

TEST(TrainConfigJson, RoundTripAndValidation) {
  TrainConfig c;
  c.lr = 1e-3;
  c.per_class = 8;
  c.transfer_store = "src.anw";
  c.level.mode = LevelMode::kPeak;
  c.model = ModelConfig::standard(256);
  const nlohmann::json j = c;
  EXPECT_EQ(j.at("batch_size").get<int>(), 16);
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(back.per_class, 8u);
  EXPECT_EQ(back.lr, 1e-3);
  EXPECT_EQ(*back.transfer_store, "src.anw");
  EXPECT_EQ(back.level.mode, LevelMode::kPeak);
  EXPECT_EQ(back.model, c.model);

  EXPECT_THROW((nlohmann::json{{"batch_size", 7}}.get<TrainConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"level", {{"mode", "loud"}}}}.get<TrainConfig>()), ConfigError);

  TrainConfig t;
  t.freeze_first_k = 4;
  t.load_first_k = 3;
  EXPECT_THROW(t.validate(true), ConfigError);
  EXPECT_NO_THROW(t.validate(false));
  t.freeze_first_k = 2;
  t.load_first_k = 6;
  EXPECT_THROW(t.validate(true), ConfigError);
  TrainConfig lr;
  lr.lr = 0.0;
  EXPECT_THROW(lr.validate(false), ConfigError);
}

TEST(TrainConfigJson, DropoutAppliesToModel) {
  TrainConfig c;
  c.dropout = 0.2;
  EXPECT_EQ(c.effective_model().layers[3].dropout_rate, 0.2);
}

}  // namespace
}  // namespace angernet
