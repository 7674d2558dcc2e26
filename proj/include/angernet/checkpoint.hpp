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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/anw.hpp"
#include "angernet/model.hpp"
#include "angernet/nn.hpp"

namespace angernet {

struct AdamHyper {
  float lr = 5e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Adam over every trainable tensor of a network, keyed by tensor name.
/// Tensors without a gradient buffer (frozen layers) are never touched.
class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(AdamHyper hyper) : hyper_(hyper) {}

  void step(AngerNet& net) {
    net.for_each_parameter([&](const std::string& name, Tensor& p) {
      if (!p.has_grad()) return;
      auto [it, inserted] = states_.try_emplace(name);
      if (inserted) {
        it->second.lr = hyper_.lr;
        it->second.beta1 = hyper_.beta1;
        it->second.beta2 = hyper_.beta2;
        it->second.epsilon = hyper_.epsilon;
      }
      adam_step<float>(p.values(), p.grad(), it->second);
    });
  }

  const AdamHyper& hyper() const { return hyper_; }
  std::map<std::string, AdamState<float>>& states() { return states_; }
  const std::map<std::string, AdamState<float>>& states() const { return states_; }

 private:
  AdamHyper hyper_;
  std::map<std::string, AdamState<float>> states_;
};

struct Checkpoint {
  AngerNet net;
  Optimizer optimizer;
  std::uint64_t step = 0;
  nlohmann::json extra = nlohmann::json::object();  // free-form training metadata
};

inline constexpr const char* kCheckpointFormat = "angernet-checkpoint";

/// Weights plus optimizer moments (as `optim.<name>.m` / `.v` tensors) and
/// a JSON trailer with config, freeze mask, optimizer settings and step.
inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  WeightStore store = save_weights(ckpt.net);
  nlohmann::json adam_steps = nlohmann::json::object();
  for (const auto& [name, st] : ckpt.optimizer.states()) {
    const auto n = static_cast<std::uint32_t>(st.m.size());
    store.add({"optim." + name + ".m", {n}, st.m});
    store.add({"optim." + name + ".v", {n}, st.v});
    adam_steps[name] = st.step;
  }
  const auto& h = ckpt.optimizer.hyper();
  nlohmann::json meta = {
      {"format", kCheckpointFormat},
      {"config", ckpt.net.config()},
      {"freeze_mask", ckpt.net.freeze_mask()},
      {"optimizer",
       {{"kind", "adam"},
        {"lr", h.lr},
        {"beta1", h.beta1},
        {"beta2", h.beta2},
        {"epsilon", h.epsilon},
        {"tensor_prefix", "optim."},
        {"steps", adam_steps}}},
      {"step", ckpt.step},
      {"extra", ckpt.extra},
  };
  return encode_anw(store, meta);
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  AnwFile file = decode_anw(bytes);
  Checkpoint ckpt;
  if (!file.metadata) {
    // Plain weight file: assume the standard architecture.
    ckpt.net = net_from_store(file.store, ModelConfig::standard());
    return ckpt;
  }
  const auto& meta = *file.metadata;
  try {
    if (meta.value("format", std::string{}) != kCheckpointFormat) {
      throw FormatError("ANW1 metadata is not a checkpoint trailer");
    }
    const auto config = meta.at("config").get<ModelConfig>();
    ckpt.net = net_from_store(file.store, config);
    const auto mask = meta.at("freeze_mask").get<std::vector<bool>>();
    if (mask.size() != ckpt.net.layers().size()) throw FormatError("freeze mask size mismatch");
    for (std::size_t i = 0; i < mask.size(); ++i) ckpt.net.set_layer_frozen(i, mask[i]);

    const auto& opt = meta.at("optimizer");
    AdamHyper h{opt.at("lr").get<float>(), opt.at("beta1").get<float>(),
                opt.at("beta2").get<float>(), opt.at("epsilon").get<float>()};
    ckpt.optimizer = Optimizer(h);
    for (const auto& [name, step] : opt.at("steps").items()) {
      const auto* m = file.store.find("optim." + name + ".m");
      const auto* v = file.store.find("optim." + name + ".v");
      if (!m || !v) throw FormatError("checkpoint lacks optimizer moments for '" + name + "'");
      AdamState<float> st;
      st.m = m->data;
      st.v = v->data;
      st.step = step.get<std::uint64_t>();
      st.lr = h.lr;
      st.beta1 = h.beta1;
      st.beta2 = h.beta2;
      st.epsilon = h.epsilon;
      ckpt.optimizer.states().emplace(name, std::move(st));
    }
    ckpt.step = meta.at("step").get<std::uint64_t>();
    ckpt.extra = meta.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace angernet
