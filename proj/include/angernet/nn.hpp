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
 * \file nn.hpp
 * \brief Forward/backward kernels for the 1D convolutional stack.
 *
 * Every op is a free function templated on the scalar type. Networks run in
 * float; gradient checks instantiate the same code in double. Backward
 * functions take the forward input (plus whatever small cache the forward
 * produced) and accumulate parameter gradients into the parameter tensors'
 * grad buffers. A parameter tensor without a grad buffer is frozen and is
 * skipped.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "angernet/error.hpp"
#include "angernet/tensor.hpp"

namespace angernet {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> row_map(BasicTensor<T>& x, std::size_t c) {
  return {x.row(c).data(), static_cast<Eigen::Index>(x.length())};
}

template <typename T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> row_map(const BasicTensor<T>& x,
                                                             std::size_t c) {
  return {x.row(c).data(), static_cast<Eigen::Index>(x.length())};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Output length of a 1D convolution, or nullopt when the padded input is
/// shorter than the kernel.
inline std::optional<std::size_t> conv_output_length(std::size_t length, std::size_t kernel,
                                                     std::size_t stride, std::size_t padding) {
  const std::size_t padded = length + 2 * padding;
  if (length == 0 || padded < kernel) return std::nullopt;
  return (padded - kernel) / stride + 1;
}

inline std::optional<std::size_t> pool_output_length(std::size_t length, std::size_t window,
                                                     std::size_t stride) {
  if (length < window || window == 0) return std::nullopt;
  return (length - window) / stride + 1;
}

template <typename T>
struct ConvParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  BasicTensor<T> weight;  // out_channels x (in_channels * kernel), kernel fastest
  BasicTensor<T> bias;    // out_channels x 1

  static ConvParams create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                           std::size_t stride = 1, std::size_t padding = 0) {
    if (in_channels == 0 || out_channels == 0) throw ConfigError("conv channels must be positive");
    if (kernel == 0) throw ConfigError("conv kernel must be >= 1");
    if (stride == 0) throw ConfigError("conv stride must be >= 1");
    ConvParams p;
    p.in_channels = in_channels;
    p.out_channels = out_channels;
    p.kernel = kernel;
    p.stride = stride;
    p.padding = padding;
    p.weight = BasicTensor<T>(out_channels, in_channels * kernel);
    p.bias = BasicTensor<T>(out_channels, 1);
    return p;
  }

  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  T& w(std::size_t o, std::size_t i, std::size_t k) { return weight(o, i * kernel + k); }
  const T& w(std::size_t o, std::size_t i, std::size_t k) const {
    return weight(o, i * kernel + k);
  }
};

namespace detail {

// cols(i * K + k, t) = x(i, t * stride + k - padding), zero outside [0, L).
template <typename T>
RowMatrix<T> im2col(const BasicTensor<T>& x, const ConvParams<T>& p, std::size_t out_len) {
  const std::size_t K = p.kernel;
  const std::ptrdiff_t L = static_cast<std::ptrdiff_t>(x.length());
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(p.stride);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.padding);
  RowMatrix<T> cols(p.in_channels * K, out_len);
  for (std::size_t i = 0; i < p.in_channels; ++i) {
    const T* src = x.row(i).data();
    for (std::size_t k = 0; k < K; ++k) {
      T* dst = cols.row(i * K + k).data();
      const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::size_t t = 0; t < out_len; ++t) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t) * s + offset;
        dst[t] = (j >= 0 && j < L) ? src[j] : T(0);
      }
    }
  }
  return cols;
}

template <typename T>
void col2im_add(const RowMatrix<T>& cols, const ConvParams<T>& p, BasicTensor<T>& dx) {
  const std::size_t K = p.kernel;
  const std::size_t out_len = static_cast<std::size_t>(cols.cols());
  const std::ptrdiff_t L = static_cast<std::ptrdiff_t>(dx.length());
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(p.stride);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.padding);
  for (std::size_t i = 0; i < p.in_channels; ++i) {
    T* dst = dx.row(i).data();
    for (std::size_t k = 0; k < K; ++k) {
      const T* src = cols.row(i * K + k).data();
      const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::size_t t = 0; t < out_len; ++t) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t) * s + offset;
        if (j >= 0 && j < L) dst[j] += src[t];
      }
    }
  }
}

template <typename T>
std::size_t checked_conv_length(const BasicTensor<T>& x, const ConvParams<T>& p) {
  if (x.channels() != p.in_channels) {
    throw ShapeError("conv1d expects " + std::to_string(p.in_channels) + " input channels, got " +
                     std::to_string(x.channels()));
  }
  auto out_len = conv_output_length(x.length(), p.kernel, p.stride, p.padding);
  if (!out_len) {
    throw ShapeError("conv1d input of length " + std::to_string(x.length()) + " (padding " +
                     std::to_string(p.padding) + ") is shorter than kernel " +
                     std::to_string(p.kernel) + "; output would be empty");
  }
  return *out_len;
}

}  // namespace detail

template <typename T>
BasicTensor<T> conv1d(const BasicTensor<T>& x, const ConvParams<T>& p) {
  const std::size_t out_len = detail::checked_conv_length(x, p);
  const auto cols = detail::im2col(x, p, out_len);
  BasicTensor<T> y(p.out_channels, out_len);
  Eigen::Map<detail::RowMatrix<T>> Y(y.data(), p.out_channels, out_len);
  Eigen::Map<const detail::RowMatrix<T>> W(p.weight.data(), p.out_channels,
                                           p.in_channels * p.kernel);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(p.bias.data(), p.out_channels);
  Y.noalias() = W * cols;
  Y.colwise() += b;
  return y;
}

/// Accumulates dL/dW and dL/db into `p` (when their grad buffers exist) and
/// returns dL/dx, or an empty tensor when `want_input_grad` is false.
template <typename T>
BasicTensor<T> conv1d_backward(const BasicTensor<T>& x, ConvParams<T>& p,
                               const BasicTensor<T>& grad_out, bool want_input_grad = true) {
  const std::size_t out_len = detail::checked_conv_length(x, p);
  if (grad_out.channels() != p.out_channels || grad_out.length() != out_len) {
    throw ShapeError("conv1d_backward: gradient shape " + grad_out.shape_string() +
                     " does not match output");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(p.in_channels * p.kernel);
  Eigen::Map<const detail::RowMatrix<T>> dY(grad_out.data(), p.out_channels, out_len);
  if (p.weight.has_grad()) {
    const auto cols = detail::im2col(x, p, out_len);
    Eigen::Map<detail::RowMatrix<T>> dW(p.weight.grad().data(), p.out_channels, rows);
    dW.noalias() += dY * cols.transpose();
  }
  if (p.bias.has_grad()) {
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(p.bias.grad().data(), p.out_channels);
    db += dY.rowwise().sum();
  }
  if (!want_input_grad) return {};
  Eigen::Map<const detail::RowMatrix<T>> W(p.weight.data(), p.out_channels, rows);
  detail::RowMatrix<T> dcols = W.transpose() * dY;
  BasicTensor<T> dx(x.channels(), x.length());
  detail::col2im_add(dcols, p, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormParams {
  std::size_t channels = 0;
  BasicTensor<T> gamma;  // channels x 1
  BasicTensor<T> beta;   // channels x 1
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T epsilon = T(1e-5);
  T momentum = T(0.1);
  Mode mode = Mode::kTrain;

  static BatchNormParams create(std::size_t channels) {
    if (channels == 0) throw ConfigError("batch norm needs at least one channel");
    BatchNormParams p;
    p.channels = channels;
    p.gamma = BasicTensor<T>(channels, 1, T(1));
    p.beta = BasicTensor<T>(channels, 1, T(0));
    p.running_mean.assign(channels, T(0));
    p.running_var.assign(channels, T(1));
    return p;
  }

  /// Learned parameters only; running buffers are state, not parameters.
  std::size_t parameter_count() const { return gamma.size() + beta.size(); }
};

/// Per-call state needed by batch_norm1d_backward.
template <typename T>
struct BatchNormCache {
  Mode mode = Mode::kEval;
  std::vector<BasicTensor<T>> normalized;  // x-hat, one per batch element
  std::vector<T> inv_std;                  // per channel
};

template <typename T>
std::vector<BasicTensor<T>> batch_norm1d(std::span<const BasicTensor<T>> batch,
                                         BatchNormParams<T>& p,
                                         BatchNormCache<T>* cache = nullptr) {
  const std::size_t C = p.channels;
  std::size_t count = 0;
  for (const auto& x : batch) {
    if (x.channels() != C) {
      throw ShapeError("batch_norm1d expects " + std::to_string(C) + " channels, got " +
                       std::to_string(x.channels()));
    }
    count += x.length();
  }
  std::vector<T> mean(C), inv_std(C);
  if (p.mode == Mode::kTrain) {
    if (count < 2) {
      throw ShapeError("batch_norm1d in train mode needs >= 2 elements per channel, got " +
                       std::to_string(count));
    }
    for (std::size_t c = 0; c < C; ++c) {
      // Two passes; per-row partial sums are reduced in double.
      double sum = 0.0;
      for (const auto& x : batch) sum += static_cast<double>(detail::row_map(x, c).sum());
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (const auto& x : batch) {
        sq += static_cast<double>((detail::row_map(x, c) - static_cast<T>(mu)).square().sum());
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(p.epsilon)));
      const double unbiased = sq / static_cast<double>(count - 1);
      p.running_mean[c] = (T(1) - p.momentum) * p.running_mean[c] + p.momentum * static_cast<T>(mu);
      p.running_var[c] =
          (T(1) - p.momentum) * p.running_var[c] + p.momentum * static_cast<T>(unbiased);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = p.running_mean[c];
      inv_std[c] = T(1) / std::sqrt(p.running_var[c] + p.epsilon);
    }
  }

  std::vector<BasicTensor<T>> out;
  out.reserve(batch.size());
  if (cache) {
    cache->mode = p.mode;
    cache->normalized.clear();
    cache->normalized.reserve(batch.size());
    cache->inv_std = inv_std;
  }
  for (const auto& x : batch) {
    BasicTensor<T> y(C, x.length());
    BasicTensor<T> xhat;
    if (cache) xhat = BasicTensor<T>(C, x.length());
    for (std::size_t c = 0; c < C; ++c) {
      const T g = p.gamma(c, 0), b = p.beta(c, 0), mu = mean[c], is = inv_std[c];
      if (cache) {
        detail::row_map(xhat, c) = (detail::row_map(x, c) - mu) * is;
        detail::row_map(y, c) = detail::row_map(xhat, c) * g + b;
      } else {
        detail::row_map(y, c) = (detail::row_map(x, c) - mu) * (is * g) + b;
      }
    }
    out.push_back(std::move(y));
    if (cache) cache->normalized.push_back(std::move(xhat));
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> batch_norm1d_backward(std::span<const BasicTensor<T>> grad_out,
                                                  BatchNormParams<T>& p,
                                                  const BatchNormCache<T>& cache) {
  const std::size_t C = p.channels;
  if (grad_out.size() != cache.normalized.size()) {
    throw ShapeError("batch_norm1d_backward: batch size mismatch");
  }
  std::size_t count = 0;
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    if (!grad_out[b].same_shape(cache.normalized[b])) {
      throw ShapeError("batch_norm1d_backward: gradient shape mismatch");
    }
    count += grad_out[b].length();
  }
  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const auto dy = detail::row_map(grad_out[b], c);
      sum_dy[c] += static_cast<double>(dy.sum());
      sum_dy_xhat[c] += static_cast<double>((dy * detail::row_map(cache.normalized[b], c)).sum());
    }
  }
  if (p.gamma.has_grad()) {
    for (std::size_t c = 0; c < C; ++c) p.gamma.grad()[c] += static_cast<T>(sum_dy_xhat[c]);
  }
  if (p.beta.has_grad()) {
    for (std::size_t c = 0; c < C; ++c) p.beta.grad()[c] += static_cast<T>(sum_dy[c]);
  }

  std::vector<BasicTensor<T>> dx;
  dx.reserve(grad_out.size());
  const double n = static_cast<double>(count);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    BasicTensor<T> g(C, grad_out[b].length());
    for (std::size_t c = 0; c < C; ++c) {
      const T gamma = p.gamma(c, 0);
      const T is = cache.inv_std[c];
      const auto dy = detail::row_map(grad_out[b], c);
      auto dst = detail::row_map(g, c);
      if (cache.mode == Mode::kEval) {
        dst = dy * (gamma * is);
      } else {
        const T mean_dy = static_cast<T>(sum_dy[c] / n);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat[c] / n);
        dst = (dy - mean_dy - detail::row_map(cache.normalized[b], c) * mean_dy_xhat) *
              (gamma * is);
      }
    }
    dx.push_back(std::move(g));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise and pooling
// ---------------------------------------------------------------------------

/// NaN passes through so that it reaches the loss.
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.channels(), x.length());
  auto src = x.values();
  auto dst = y.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < T(0) ? T(0) : src[i];
  return y;
}

/// Subgradient at exactly zero is zero.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
  if (!x.same_shape(grad_out)) throw ShapeError("relu_backward: shape mismatch");
  BasicTensor<T> dx(x.channels(), x.length());
  auto src = x.values();
  auto g = grad_out.values();
  auto dst = dx.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T(0) ? g[i] : T(0);
  return dx;
}

/// Max pooling over time. When `argmax` is given it receives, per output
/// element, the input time index that produced it (earliest on ties). A
/// NaN inside a window wins.
template <typename T>
BasicTensor<T> max_pool1d(const BasicTensor<T>& x, std::size_t window, std::size_t stride,
                          std::vector<std::uint32_t>* argmax = nullptr) {
  if (window == 0 || stride == 0) throw ConfigError("max_pool1d window and stride must be >= 1");
  auto out_len = pool_output_length(x.length(), window, stride);
  if (!out_len) {
    throw ShapeError("max_pool1d input of length " + std::to_string(x.length()) +
                     " is shorter than window " + std::to_string(window));
  }
  BasicTensor<T> y(x.channels(), *out_len);
  if (argmax) argmax->resize(y.size());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto src = x.row(c);
    auto dst = y.row(c);
    for (std::size_t t = 0; t < *out_len; ++t) {
      const std::size_t start = t * stride;
      std::size_t best = start;
      for (std::size_t j = start + 1; j < start + window; ++j) {
        if (src[j] > src[best] || (std::isnan(src[j]) && !std::isnan(src[best]))) best = j;
      }
      dst[t] = src[best];
      if (argmax) (*argmax)[c * *out_len + t] = static_cast<std::uint32_t>(best);
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> max_pool1d_backward(std::size_t input_length,
                                   std::span<const std::uint32_t> argmax,
                                   const BasicTensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("max_pool1d_backward: argmax mismatch");
  BasicTensor<T> dx(grad_out.channels(), input_length);
  for (std::size_t c = 0; c < grad_out.channels(); ++c) {
    auto g = grad_out.row(c);
    auto dst = dx.row(c);
    for (std::size_t t = 0; t < g.size(); ++t) dst[argmax[c * g.size() + t]] += g[t];
  }
  return dx;
}

inline void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

/// Inverted dropout. In train mode the keep mask (1 = kept) is written to
/// `mask` for the backward pass.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, Mode mode, Rng& rng,
                       std::vector<std::uint8_t>* mask = nullptr) {
  check_dropout_rate(rate);
  if (mode == Mode::kEval || rate == 0.0) {
    if (mask) mask->assign(x.size(), 1);
    return x;
  }
  BasicTensor<T> y(x.channels(), x.length());
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  if (mask) mask->resize(x.size());
  auto src = x.values();
  auto dst = y.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const bool k = keep(rng);
    if (mask) (*mask)[i] = k ? 1 : 0;
    dst[i] = k ? src[i] * scale : T(0);
  }
  return y;
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_out, double rate,
                                std::span<const std::uint8_t> mask) {
  if (mask.size() != grad_out.size()) throw ShapeError("dropout_backward: mask mismatch");
  BasicTensor<T> dx(grad_out.channels(), grad_out.length());
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  auto g = grad_out.values();
  auto dst = dx.values();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] = mask[i] ? g[i] * scale : T(0);
  return dx;
}

template <typename T>
BasicTensor<T> global_average_pool(const BasicTensor<T>& x) {
  if (x.length() == 0) throw ShapeError("global_average_pool of a zero-length input");
  BasicTensor<T> y(x.channels(), 1);
  for (std::size_t c = 0; c < x.channels(); ++c) {
    double sum = 0.0;
    for (T v : x.row(c)) sum += static_cast<double>(v);
    y(c, 0) = static_cast<T>(sum / static_cast<double>(x.length()));
  }
  return y;
}

template <typename T>
BasicTensor<T> global_average_pool_backward(const BasicTensor<T>& grad_out, std::size_t length) {
  if (grad_out.length() != 1) throw ShapeError("global_average_pool_backward expects length 1");
  BasicTensor<T> dx(grad_out.channels(), length);
  for (std::size_t c = 0; c < grad_out.channels(); ++c) {
    const T g = grad_out(c, 0) / static_cast<T>(length);
    for (T& v : dx.row(c)) v = g;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

template <typename T>
struct CrossEntropyResult {
  T loss = T(0);
  std::array<T, 2> probabilities{};
  std::array<T, 2> logit_grad{};
};

/// Two-class softmax followed by negative log-likelihood of `label`.
template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(std::span<const T> logits, int label) {
  if (logits.size() != 2) {
    throw ShapeError("softmax_cross_entropy expects 2 logits, got " +
                     std::to_string(logits.size()));
  }
  if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
  if (!std::isfinite(logits[0]) || !std::isfinite(logits[1])) {
    throw NumericError("non-finite logits in softmax_cross_entropy");
  }
  const T m = std::max(logits[0], logits[1]);
  const T e0 = std::exp(logits[0] - m);
  const T e1 = std::exp(logits[1] - m);
  const T z = e0 + e1;
  CrossEntropyResult<T> r;
  r.probabilities = {e0 / z, e1 / z};
  r.loss = m + std::log(z) - logits[static_cast<std::size_t>(label)];
  r.logit_grad = {r.probabilities[0] - (label == 0 ? T(1) : T(0)),
                  r.probabilities[1] - (label == 1 ? T(1) : T(0))};
  return r;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;
  T lr = T(5e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

/// One Adam update with bias correction. Moment buffers are allocated on
/// first use.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state) {
  if (param.size() != grad.size()) {
    throw ShapeError("adam_step: parameter has " + std::to_string(param.size()) +
                     " values but gradient has " + std::to_string(grad.size()));
  }
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(param.size(), T(0));
    state.v.assign(param.size(), T(0));
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw ShapeError("adam_step: optimizer state does not match parameter size");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T c1 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const T c2 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta2), t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (T(1) - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (T(1) - state.beta2) * g * g;
    const T m_hat = state.m[i] / c1;
    const T v_hat = state.v[i] / c2;
    param[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// A block of double-precision values to perturb, paired with the analytic
/// gradient of the loss with respect to those values.
struct GradProbe {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<probe>[index]"
};

/// Compares analytic gradients with central differences of `loss`. Relative
/// error per coordinate is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  std::span<const GradProbe> probes, double step = 1e-5,
                                  double floor = 1e-6) {
  GradCheckResult result;
  for (const auto& probe : probes) {
    if (probe.values.size() != probe.analytic.size()) {
      throw ShapeError("grad_check: probe '" + probe.name + "' has mismatched sizes");
    }
    for (std::size_t i = 0; i < probe.values.size(); ++i) {
      const double saved = probe.values[i];
      probe.values[i] = saved + step;
      const double up = loss();
      probe.values[i] = saved - step;
      const double down = loss();
      probe.values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = probe.analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error || !std::isfinite(rel)) {
        result.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        result.worst = probe.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace angernet
