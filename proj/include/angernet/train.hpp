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

/*!
 * \file train.hpp
 * \brief Balanced-minibatch Adam training with periodic AU-ROC validation
 *        and best-checkpoint selection.
 */

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/audio.hpp"
#include "angernet/augment.hpp"
#include "angernet/checkpoint.hpp"
#include "angernet/data.hpp"
#include "angernet/eval.hpp"
#include "angernet/model.hpp"

namespace angernet {

struct TrainConfig {
  double lr = 5e-3;
  std::size_t per_class = 5;  // minibatch = 2 * per_class ("batch_size" in JSON)
  std::size_t val_every = 200;
  std::size_t max_steps = 5000;
  double dropout = 0.5;
  std::optional<std::string> transfer_store;  // ANW1 file with source weights
  std::size_t load_first_k = 3;
  std::size_t freeze_first_k = 2;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  WindowSpec windows;
  NormalizeOptions level;
  ModelConfig model = ModelConfig::standard();

  /// Model config with every dropout layer set to `dropout`.
  ModelConfig effective_model() const {
    ModelConfig m = model;
    for (auto& l : m.layers)
      if (l.dropout_rate) l.dropout_rate = dropout;
    return m;
  }

  void validate(bool transfer_enabled) const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (per_class == 0) throw ConfigError("per_class must be >= 1");
    if (val_every == 0) throw ConfigError("val_every must be >= 1");
    check_dropout_rate(dropout);
    augment.validate();
    windows.validate();
    effective_model().validate();
    if (transfer_enabled &&
        !(freeze_first_k <= load_first_k && load_first_k <= model.layers.size())) {
      throw ConfigError("transfer requires freeze_first_k <= load_first_k <= layer count");
    }
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"batch_size", 2 * c.per_class},
       {"val_every", c.val_every},
       {"max_steps", c.max_steps},
       {"dropout", c.dropout},
       {"transfer_store", c.transfer_store ? nlohmann::json(*c.transfer_store) : nlohmann::json()},
       {"load_first_k", c.load_first_k},
       {"freeze_first_k", c.freeze_first_k},
       {"seed", c.seed},
       {"augment", c.augment},
       {"windows", c.windows},
       {"level", {{"mode", c.level.mode == LevelMode::kPeak ? "peak" : "rms"},
                  {"target_dbfs", c.level.target_dbfs},
                  {"full_scale", c.level.full_scale}}},
       {"model", c.model}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lr = j.value("lr", c.lr);
  if (auto it = j.find("batch_size"); it != j.end()) {
    const auto bs = it->get<std::size_t>();
    if (bs < 2 || bs % 2 != 0) throw ConfigError("batch_size must be an even number >= 2");
    c.per_class = bs / 2;
  }
  c.val_every = j.value("val_every", c.val_every);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.dropout = j.value("dropout", c.dropout);
  if (auto it = j.find("transfer_store"); it != j.end()) {
    c.transfer_store = it->is_null() ? std::nullopt : std::optional(it->get<std::string>());
  }
  c.load_first_k = j.value("load_first_k", c.load_first_k);
  c.freeze_first_k = j.value("freeze_first_k", c.freeze_first_k);
  c.seed = j.value("seed", c.seed);
  if (j.contains("augment")) c.augment = j.at("augment").get<AugmentConfig>();
  if (j.contains("windows")) c.windows = j.at("windows").get<WindowSpec>();
  if (auto it = j.find("level"); it != j.end()) {
    const auto mode = it->value("mode", std::string("rms"));
    if (mode != "rms" && mode != "peak") throw ConfigError("level.mode must be rms or peak");
    c.level.mode = mode == "peak" ? LevelMode::kPeak : LevelMode::kRms;
    c.level.target_dbfs = it->value("target_dbfs", c.level.target_dbfs);
    c.level.full_scale = it->value("full_scale", c.level.full_scale);
  }
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
}

struct ValidationEvent {
  std::size_t step = 0;
  double auc = 0.0;
  bool improved = false;
};

struct TrainState {
  std::size_t step = 0;
  std::optional<double> best_val_auc;
  std::size_t best_step = 0;
  std::string best_checkpoint;  // empty when no output directory was given
  std::vector<double> loss_history;
  std::vector<ValidationEvent> validations;
};

struct TrainResult {
  TrainState state;
  AngerNet best_net;
  AngerNet final_net;
  Optimizer optimizer;
};

struct TrainOutputs {
  std::string out_dir;             // best.anw and train_log.jsonl go here when set
  std::ostream* log = nullptr;     // extra JSON-lines sink
};

/// Mean cross-entropy over the batch, backward, one Adam update on every
/// unfrozen tensor. Returns the batch loss.
inline double train_step(AngerNet& net, Optimizer& opt, std::span<const Tensor> inputs,
                         std::span<const int> labels, Rng& rng) {
  auto logits = net.forward(inputs, Mode::kTrain, &rng);
  const double inv_batch = 1.0 / static_cast<double>(inputs.size());
  double loss = 0.0;
  std::vector<Tensor> grads;
  grads.reserve(logits.size());
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const std::array<float, 2> pair{logits[b](0, 0), logits[b](1, 0)};
    const auto ce = softmax_cross_entropy<float>(pair, labels[b]);
    loss += static_cast<double>(ce.loss) * inv_batch;
    Tensor g(2, 1);
    g(0, 0) = static_cast<float>(ce.logit_grad[0] * inv_batch);
    g(1, 0) = static_cast<float>(ce.logit_grad[1] * inv_batch);
    grads.push_back(std::move(g));
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
  net.zero_grad();
  net.backward(grads);
  net.clear_cache();
  opt.step(net);
  return loss;
}

/// Sliding-window AU-ROC over preloaded validation clips.
inline double validate(AngerNet& net, std::span<const LabeledClip> val,
                       const WindowSpec& windows = {}) {
  const auto scored = score_clips(net, val, windows);
  const auto [scores, labels] = scores_and_labels(scored);
  return roc_auc(scores, labels).auc;
}

/// Full training run over preloaded clips. `transfer`, when given, seeds
/// the first load_first_k layers and freezes the first freeze_first_k.
inline TrainResult run_training(const TrainConfig& cfg, std::span<const LabeledClip> train,
                                std::span<const LabeledClip> val, const TrainOutputs& out = {},
                                const WeightStore* transfer = nullptr) {
  cfg.validate(transfer != nullptr);
  if (train.empty()) throw ConfigError("training split is empty");
  if (val.empty()) throw ConfigError("validation split is empty");

  Rng rng(cfg.seed);
  TrainResult result;
  AngerNet net = AngerNet::build(cfg.effective_model(), rng);
  if (transfer) {
    load_pretrained(net, *transfer, cfg.load_first_k);
    net.set_frozen(cfg.freeze_first_k);
  }
  Optimizer opt(AdamHyper{static_cast<float>(cfg.lr)});
  const BalancedSampler sampler(train, cfg.augment, cfg.windows, cfg.per_class);

  std::ofstream file_log;
  std::string ckpt_path;
  if (!out.out_dir.empty()) {
    std::filesystem::create_directories(out.out_dir);
    file_log.open((std::filesystem::path(out.out_dir) / "train_log.jsonl").string(),
                  std::ios::trunc);
    if (!file_log) throw IoError("cannot write training log in '" + out.out_dir + "'");
    ckpt_path = (std::filesystem::path(out.out_dir) / "best.anw").string();
  }
  auto emit = [&](const nlohmann::json& j) {
    const auto line = j.dump();
    if (file_log.is_open()) file_log << line << '\n' << std::flush;
    if (out.log) *out.log << line << '\n' << std::flush;
  };

  auto& st = result.state;
  result.best_net = net;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const Batch batch = sampler.sample(rng);
    std::vector<Tensor> inputs;
    inputs.reserve(batch.segments.size());
    for (const auto& s : batch.segments) inputs.push_back(to_tensor(s));
    double loss;
    try {
      loss = train_step(net, opt, inputs, batch.labels, rng);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step));
    }
    st.step = step;
    st.loss_history.push_back(loss);
    emit({{"step", step}, {"loss", loss}});

    if (step % cfg.val_every == 0 || step == cfg.max_steps) {
      const double auc = validate(net, val, cfg.windows);
      const bool improved = !st.best_val_auc || auc > *st.best_val_auc;
      if (improved) {
        st.best_val_auc = auc;
        st.best_step = step;
        result.best_net = net;
        if (!ckpt_path.empty()) {
          Checkpoint ckpt{net, opt, step, {{"best_val_auc", auc}, {"config", cfg}}};
          save_checkpoint(ckpt_path, ckpt);
          st.best_checkpoint = ckpt_path;
        }
      }
      st.validations.push_back({step, auc, improved});
      emit({{"step", step}, {"val_auc", auc}, {"improved", improved}});
    }
  }
  result.final_net = std::move(net);
  result.optimizer = std::move(opt);
  return result;
}

/// Manifest-level entry point: loads the train/val splits, reads the
/// transfer store named in the config (if any) and trains.
inline TrainResult run_training(const TrainConfig& cfg, std::span<const ManifestEntry> manifest,
                                const TrainOutputs& out = {}) {
  const auto train = load_labeled_clips(manifest, Split::kTrain, cfg.level);
  const auto val = load_labeled_clips(manifest, Split::kVal, cfg.level);
  if (cfg.transfer_store) {
    const auto store = read_anw_file(*cfg.transfer_store).store;
    return run_training(cfg, train, val, out, &store);
  }
  return run_training(cfg, train, val, out);
}

}  // namespace angernet
