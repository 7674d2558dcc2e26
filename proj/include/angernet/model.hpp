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
 * \file model.hpp
 * \brief The five-block fully convolutional anger detector.
 *
 * Each block is conv -> [batch norm] -> ReLU -> [max pool] -> [dropout]; the
 * final block omits the ReLU and produces class logits, which are averaged
 * over time and fed to a softmax. Because there are no dense layers the
 * network accepts any input length that leaves at least one frame after
 * the last block.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/anw.hpp"
#include "angernet/error.hpp"
#include "angernet/nn.hpp"
#include "angernet/tensor.hpp"

namespace angernet {

struct LayerSpec {
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool batch_norm = false;
  std::optional<std::size_t> pool_window;
  std::optional<std::size_t> pool_stride;
  std::optional<double> dropout_rate;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelConfig {
  std::vector<LayerSpec> layers;
  std::size_t input_channels = 1;
  std::size_t class_count = 2;

  /// SoundNet-5 with 16 filters in the fourth block and dropout after it.
  static ModelConfig standard(std::size_t layer4_filters = 16, double dropout = 0.5) {
    ModelConfig c;
    c.layers = {
        {32, 64, 2, 32, true, 8, 8, std::nullopt},
        {64, 32, 2, 16, true, 8, 8, std::nullopt},
        {128, 16, 2, 8, true, std::nullopt, std::nullopt, std::nullopt},
        {layer4_filters, 8, 2, 4, true, std::nullopt, std::nullopt, dropout},
        {2, 2, 1, 0, false, std::nullopt, std::nullopt, std::nullopt},
    };
    return c;
  }

  std::size_t in_channels_of(std::size_t layer) const {
    return layer == 0 ? input_channels : layers[layer - 1].out_channels;
  }

  void validate() const {
    if (input_channels != 1) throw ConfigError("input_channels must be 1 (mono audio)");
    if (class_count == 0) throw ConfigError("class_count must be positive");
    if (layers.empty()) throw ConfigError("model needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string where = "layer" + std::to_string(i + 1);
      if (l.out_channels == 0) throw ConfigError(where + ": out_channels must be positive");
      if (l.kernel == 0 || l.stride == 0) throw ConfigError(where + ": kernel/stride must be >= 1");
      if (l.pool_window.has_value() != l.pool_stride.has_value()) {
        throw ConfigError(where + ": pool_window and pool_stride must be given together");
      }
      if (l.pool_window && (*l.pool_window == 0 || *l.pool_stride == 0)) {
        throw ConfigError(where + ": pool window/stride must be >= 1");
      }
      if (l.dropout_rate) check_dropout_rate(*l.dropout_rate);
    }
    if (layers.back().out_channels != class_count) {
      throw ConfigError("last layer has " + std::to_string(layers.back().out_channels) +
                        " filters but class_count is " + std::to_string(class_count));
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const LayerSpec& l) {
  j = nlohmann::json{{"out_channels", l.out_channels}, {"kernel", l.kernel},
                     {"stride", l.stride},             {"padding", l.padding},
                     {"batch_norm", l.batch_norm}};
  j["pool_window"] = l.pool_window ? nlohmann::json(*l.pool_window) : nlohmann::json(nullptr);
  j["pool_stride"] = l.pool_stride ? nlohmann::json(*l.pool_stride) : nlohmann::json(nullptr);
  j["dropout"] = l.dropout_rate ? nlohmann::json(*l.dropout_rate) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, LayerSpec& l) {
  l.out_channels = j.at("out_channels").get<std::size_t>();
  l.kernel = j.at("kernel").get<std::size_t>();
  l.stride = j.value("stride", std::size_t{1});
  l.padding = j.value("padding", std::size_t{0});
  l.batch_norm = j.value("batch_norm", false);
  auto opt = [&](const char* key) -> const nlohmann::json* {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? nullptr : &*it;
  };
  l.pool_window = opt("pool_window") ? std::optional(opt("pool_window")->get<std::size_t>())
                                     : std::nullopt;
  l.pool_stride = opt("pool_stride") ? std::optional(opt("pool_stride")->get<std::size_t>())
                                     : std::nullopt;
  l.dropout_rate = opt("dropout") ? std::optional(opt("dropout")->get<double>()) : std::nullopt;
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"input_channels", c.input_channels},
                     {"class_count", c.class_count},
                     {"layers", c.layers}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.input_channels = j.value("input_channels", std::size_t{1});
  c.class_count = j.value("class_count", std::size_t{2});
  c.layers = j.at("layers").get<std::vector<LayerSpec>>();
}

/// Parameter total implied by a configuration: conv weights and biases plus
/// batch-norm scale and shift. Running statistics are not parameters.
inline std::size_t count_parameters(const ModelConfig& config) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    total += l.out_channels * config.in_channels_of(i) * l.kernel + l.out_channels;
    if (l.batch_norm) total += 2 * l.out_channels;
  }
  return total;
}

template <typename T>
struct Layer {
  LayerSpec spec;
  ConvParams<T> conv;
  std::optional<BatchNormParams<T>> bn;
  bool frozen = false;
  bool relu = true;
};

template <typename T>
class BasicAngerNet {
 public:
  using Logits = BasicTensor<T>;  // class_count x 1

  static BasicAngerNet build(const ModelConfig& config, Rng& rng) {
    config.validate();
    BasicAngerNet net;
    net.config_ = config;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
      const auto& spec = config.layers[i];
      Layer<T> layer;
      layer.spec = spec;
      const std::size_t in = config.in_channels_of(i);
      layer.conv = ConvParams<T>::create(in, spec.out_channels, spec.kernel, spec.stride,
                                         spec.padding);
      const double bound = std::sqrt(1.0 / static_cast<double>(in * spec.kernel));
      std::uniform_real_distribution<double> init(-bound, bound);
      for (T& w : layer.conv.weight.values()) w = static_cast<T>(init(rng));
      if (spec.batch_norm) layer.bn = BatchNormParams<T>::create(spec.out_channels);
      layer.relu = i + 1 < config.layers.size();
      net.layers_.push_back(std::move(layer));
    }
    net.set_frozen(0);
    return net;
  }

  const ModelConfig& config() const { return config_; }
  std::vector<Layer<T>>& layers() { return layers_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& l : layers_) {
      total += l.conv.parameter_count();
      if (l.bn) total += l.bn->parameter_count();
    }
    return total;
  }

  /// Marks layers [0, first_k) frozen: their parameters lose their gradient
  /// buffers and their batch norm always runs on running statistics.
  void set_frozen(std::size_t first_k) {
    if (first_k > layers_.size()) {
      throw ConfigError("cannot freeze " + std::to_string(first_k) + " layers of a " +
                        std::to_string(layers_.size()) + "-layer model");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) set_layer_frozen(i, i < first_k);
  }

  void set_layer_frozen(std::size_t i, bool frozen) {
    auto& l = layers_.at(i);
    l.frozen = frozen;
    for_each_layer_parameter(l, [&](const std::string&, BasicTensor<T>& p) {
      if (frozen) {
        p.drop_grad();
      } else if (!p.has_grad()) {
        p.enable_grad();
      }
    });
  }

  std::vector<bool> freeze_mask() const {
    std::vector<bool> mask;
    for (const auto& l : layers_) mask.push_back(l.frozen);
    return mask;
  }

  /// Visits every learned parameter tensor as (name, tensor).
  template <typename F>
  void for_each_parameter(F&& f) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for_each_layer_parameter(layers_[i], [&](const std::string& suffix, BasicTensor<T>& p) {
        f(layer_prefix(i) + suffix, p);
      });
    }
  }

  void zero_grad() {
    for_each_parameter([](const std::string&, BasicTensor<T>& p) { p.zero_grad(); });
  }

  /// Lengths after every conv and pool stage for an input of `length`
  /// samples. Throws ShapeError naming the first stage that collapses.
  std::vector<std::size_t> stage_lengths(std::size_t length) const {
    std::vector<std::size_t> out;
    std::size_t cur = length;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& s = layers_[i].spec;
      auto conv = conv_output_length(cur, s.kernel, s.stride, s.padding);
      if (!conv) {
        throw ShapeError("input of " + std::to_string(length) + " samples is too short: " +
                         layer_prefix(i) + "conv receives length " + std::to_string(cur) +
                         " (kernel " + std::to_string(s.kernel) + ", padding " +
                         std::to_string(s.padding) + ")");
      }
      cur = *conv;
      out.push_back(cur);
      if (s.pool_window) {
        auto pooled = pool_output_length(cur, *s.pool_window, *s.pool_stride);
        if (!pooled) {
          throw ShapeError("input of " + std::to_string(length) + " samples is too short: " +
                           layer_prefix(i) + "pool receives length " + std::to_string(cur) +
                           " (window " + std::to_string(*s.pool_window) + ")");
        }
        cur = *pooled;
        out.push_back(cur);
      }
    }
    return out;
  }

  /// Smallest input length that yields at least one output frame.
  std::size_t min_input_length() const {
    std::size_t lo = 1, hi = 1;
    while (!fits(hi)) hi *= 2;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (fits(mid)) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  /// Runs the stack on a batch of (1 x L) inputs and returns per-example
  /// logits. With `record` set, activations are kept for backward().
  std::vector<Logits> forward(std::span<const BasicTensor<T>> batch, Mode mode, Rng* rng = nullptr,
                              bool record = true) {
    if (batch.empty()) throw ShapeError("forward called with an empty batch");
    for (const auto& x : batch) {
      if (x.channels() != config_.input_channels) {
        throw ShapeError("network input must have " + std::to_string(config_.input_channels) +
                         " channel(s), got " + std::to_string(x.channels()));
      }
      stage_lengths(x.length());
    }
    caches_.assign(record ? layers_.size() : 0, {});
    recorded_mode_ = mode;
    std::vector<BasicTensor<T>> acts(batch.begin(), batch.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& layer = layers_[i];
      LayerCache* cache = record ? &caches_[i] : nullptr;
      if (cache) cache->input = acts;
      for (auto& a : acts) a = conv1d(a, layer.conv);
      if (layer.bn) {
        layer.bn->mode = (mode == Mode::kTrain && !layer.frozen) ? Mode::kTrain : Mode::kEval;
        acts = batch_norm1d<T>(acts, *layer.bn, cache ? &cache->bn : nullptr);
      }
      if (layer.relu) {
        if (cache) cache->pre_relu = acts;
        for (auto& a : acts) a = relu(a);
      }
      if (layer.spec.pool_window) {
        if (cache) {
          cache->pool_input_length.resize(acts.size());
          cache->argmax.resize(acts.size());
        }
        for (std::size_t b = 0; b < acts.size(); ++b) {
          if (cache) cache->pool_input_length[b] = acts[b].length();
          acts[b] = max_pool1d(acts[b], *layer.spec.pool_window, *layer.spec.pool_stride,
                               cache ? &cache->argmax[b] : nullptr);
        }
      }
      if (layer.spec.dropout_rate && mode == Mode::kTrain && *layer.spec.dropout_rate > 0.0) {
        if (!rng) throw ConfigError("train-mode dropout requires a random generator");
        if (cache) cache->mask.resize(acts.size());
        for (std::size_t b = 0; b < acts.size(); ++b) {
          acts[b] = dropout(acts[b], *layer.spec.dropout_rate, mode, *rng,
                            cache ? &cache->mask[b] : nullptr);
        }
      }
    }
    final_lengths_.clear();
    std::vector<Logits> logits;
    logits.reserve(acts.size());
    for (const auto& a : acts) {
      final_lengths_.push_back(a.length());
      logits.push_back(global_average_pool(a));
    }
    return logits;
  }

  /// Backpropagates per-example logit gradients through the last recorded
  /// forward pass, accumulating into parameter gradient buffers. Returns
  /// gradients with respect to the inputs when `want_input_grad` is set.
  std::vector<BasicTensor<T>> backward(std::span<const Logits> grad_logits,
                                       bool want_input_grad = false) {
    if (caches_.size() != layers_.size()) {
      throw ConfigError("backward requires a recorded forward pass");
    }
    if (grad_logits.size() != final_lengths_.size()) {
      throw ShapeError("backward: expected " + std::to_string(final_lengths_.size()) +
                       " logit gradients, got " + std::to_string(grad_logits.size()));
    }
    std::size_t lowest = layers_.size();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].frozen) {
        lowest = i;
        break;
      }
    }
    if (want_input_grad) lowest = 0;
    if (lowest == layers_.size()) return {};

    std::vector<BasicTensor<T>> grads;
    for (std::size_t b = 0; b < grad_logits.size(); ++b) {
      grads.push_back(global_average_pool_backward(grad_logits[b], final_lengths_[b]));
    }
    for (std::size_t i = layers_.size(); i-- > lowest;) {
      auto& layer = layers_[i];
      auto& cache = caches_[i];
      if (!cache.mask.empty()) {
        for (std::size_t b = 0; b < grads.size(); ++b) {
          grads[b] = dropout_backward(grads[b], *layer.spec.dropout_rate, cache.mask[b]);
        }
      }
      if (layer.spec.pool_window) {
        for (std::size_t b = 0; b < grads.size(); ++b) {
          grads[b] = max_pool1d_backward(cache.pool_input_length[b], cache.argmax[b], grads[b]);
        }
      }
      if (layer.relu) {
        for (std::size_t b = 0; b < grads.size(); ++b) {
          grads[b] = relu_backward(cache.pre_relu[b], grads[b]);
        }
      }
      if (layer.bn) grads = batch_norm1d_backward<T>(grads, *layer.bn, cache.bn);
      const bool need_input = i > lowest || want_input_grad;
      for (std::size_t b = 0; b < grads.size(); ++b) {
        grads[b] = conv1d_backward(cache.input[b], layer.conv, grads[b], need_input);
      }
    }
    return want_input_grad ? grads : std::vector<BasicTensor<T>>{};
  }

  void clear_cache() { caches_.clear(); }

  static std::string layer_prefix(std::size_t i) { return "layer" + std::to_string(i + 1) + "."; }

 private:
  struct LayerCache {
    std::vector<BasicTensor<T>> input;
    BatchNormCache<T> bn;
    std::vector<BasicTensor<T>> pre_relu;
    std::vector<std::size_t> pool_input_length;
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<std::vector<std::uint8_t>> mask;
  };

  template <typename F>
  static void for_each_layer_parameter(Layer<T>& l, F&& f) {
    f("conv.weight", l.conv.weight);
    f("conv.bias", l.conv.bias);
    if (l.bn) {
      f("bn.gamma", l.bn->gamma);
      f("bn.beta", l.bn->beta);
    }
  }

  bool fits(std::size_t length) const {
    try {
      stage_lengths(length);
      return true;
    } catch (const ShapeError&) {
      return false;
    }
  }

  ModelConfig config_;
  std::vector<Layer<T>> layers_;
  std::vector<LayerCache> caches_;
  std::vector<std::size_t> final_lengths_;
  Mode recorded_mode_ = Mode::kEval;
};

using AngerNet = BasicAngerNet<float>;

inline AngerNet build_model(const ModelConfig& config, Rng& rng) {
  return AngerNet::build(config, rng);
}

template <typename T>
std::size_t count_parameters(const BasicAngerNet<T>& net) {
  return net.parameter_count();
}

template <typename T>
void set_frozen(BasicAngerNet<T>& net, std::size_t first_k) {
  net.set_frozen(first_k);
}

struct ScoreResult {
  double p_anger = 0.0;
  std::vector<float> logits;
};

/// Probability of the positive class for a single (1 x L) clip.
inline ScoreResult forward_scores(AngerNet& net, const Tensor& clip, Mode mode = Mode::kEval,
                                  Rng* rng = nullptr) {
  if (net.config().class_count != 2) throw ConfigError("forward_scores needs a two-class head");
  const auto logits = net.forward(std::span<const Tensor>(&clip, 1), mode, rng, false);
  const auto& l = logits.front();
  const std::array<float, 2> pair{l(0, 0), l(1, 0)};
  // Two-class softmax as a logistic of the logit gap, in double: a float
  // softmax saturates to exactly 0 or 1 once the gap passes ~17, and the
  // resulting ties flatten the ROC.
  const double gap = static_cast<double>(pair[1]) - static_cast<double>(pair[0]);
  const double p = gap >= 0.0 ? 1.0 / (1.0 + std::exp(-gap)) : std::exp(gap) / (1.0 + std::exp(gap));
  return {p, {pair[0], pair[1]}};
}

// ---------------------------------------------------------------------------
// Weight store conversion
// ---------------------------------------------------------------------------

namespace detail {

inline NamedTensor named(const std::string& name, std::vector<std::uint32_t> dims,
                         std::span<const float> data) {
  return {name, std::move(dims), std::vector<float>(data.begin(), data.end())};
}

}  // namespace detail

/// Names: layer{i}.conv.weight (out x in x kernel), layer{i}.conv.bias,
/// layer{i}.bn.{gamma,beta,running_mean,running_var}.
inline WeightStore save_weights(const AngerNet& net) {
  WeightStore store;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    const std::string p = AngerNet::layer_prefix(i);
    const auto out = static_cast<std::uint32_t>(l.conv.out_channels);
    store.add(detail::named(p + "conv.weight",
                            {out, static_cast<std::uint32_t>(l.conv.in_channels),
                             static_cast<std::uint32_t>(l.conv.kernel)},
                            l.conv.weight.values()));
    store.add(detail::named(p + "conv.bias", {out}, l.conv.bias.values()));
    if (l.bn) {
      store.add(detail::named(p + "bn.gamma", {out}, l.bn->gamma.values()));
      store.add(detail::named(p + "bn.beta", {out}, l.bn->beta.values()));
      store.add(detail::named(p + "bn.running_mean", {out}, l.bn->running_mean));
      store.add(detail::named(p + "bn.running_var", {out}, l.bn->running_var));
    }
  }
  return store;
}

namespace detail {

struct TensorSlot {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<float> target;
};

inline std::vector<TensorSlot> layer_slots(AngerNet& net, std::size_t i) {
  auto& l = net.layers()[i];
  const std::string p = AngerNet::layer_prefix(i);
  const auto out = static_cast<std::uint32_t>(l.conv.out_channels);
  std::vector<TensorSlot> slots = {
      {p + "conv.weight",
       {out, static_cast<std::uint32_t>(l.conv.in_channels),
        static_cast<std::uint32_t>(l.conv.kernel)},
       l.conv.weight.values()},
      {p + "conv.bias", {out}, l.conv.bias.values()},
  };
  if (l.bn) {
    slots.push_back({p + "bn.gamma", {out}, l.bn->gamma.values()});
    slots.push_back({p + "bn.beta", {out}, l.bn->beta.values()});
    slots.push_back({p + "bn.running_mean", {out}, l.bn->running_mean});
    slots.push_back({p + "bn.running_var", {out}, l.bn->running_var});
  }
  return slots;
}

}  // namespace detail

/// Overwrites layers [0, first_k) from `store` and returns the tensor names
/// that were loaded. Validates everything before modifying the network.
inline std::vector<std::string> load_pretrained(AngerNet& net, const WeightStore& store,
                                                std::size_t first_k) {
  if (first_k > net.layers().size()) {
    throw ConfigError("cannot load " + std::to_string(first_k) + " layers into a " +
                      std::to_string(net.layers().size()) + "-layer model");
  }
  std::vector<detail::TensorSlot> slots;
  for (std::size_t i = 0; i < first_k; ++i) {
    auto s = detail::layer_slots(net, i);
    slots.insert(slots.end(), s.begin(), s.end());
  }
  std::vector<std::string> missing;
  for (const auto& slot : slots) {
    const auto* t = store.find(slot.name);
    if (!t) {
      missing.push_back(slot.name);
      continue;
    }
    if (t->dims != slot.dims) {
      NamedTensor expected{slot.name, slot.dims, {}};
      throw ShapeError("tensor '" + slot.name + "' has shape " + t->shape_string() +
                       " but the model expects " + expected.shape_string());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw FormatError("weight store is missing tensors: " + list);
  }
  std::vector<std::string> loaded;
  for (auto& slot : slots) {
    const auto* t = store.find(slot.name);
    std::copy(t->data.begin(), t->data.end(), slot.target.begin());
    loaded.push_back(slot.name);
  }
  return loaded;
}

/// Builds a network for `config` and fills every layer from `store`.
inline AngerNet net_from_store(const WeightStore& store, const ModelConfig& config) {
  Rng rng(0);
  AngerNet net = AngerNet::build(config, rng);
  load_pretrained(net, store, net.layers().size());
  return net;
}

}  // namespace angernet
