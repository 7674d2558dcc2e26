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

#include <algorithm>
#include <cstddef>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "angernet/error.hpp"

namespace angernet {

/// Explicitly seeded generator threaded through every stochastic operation.
using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

/// Cache-line aligned allocation. Vectorized reductions peel a prefix
/// that depends on the buffer address, so a fixed alignment keeps sums
/// bitwise reproducible from run to run.
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  template <typename U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{Align}); }

  template <typename U>
  bool operator==(const AlignedAllocator<U, Align>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Rank-2 (channels x time) array with an optional gradient buffer of the
/// same shape. Storage is row-major: one contiguous row per channel.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(std::size_t channels, std::size_t length, T fill = T(0))
      : channels_(channels), length_(length), values_(channels * length, fill) {}

  static BasicTensor from(std::size_t channels, std::size_t length, std::vector<T> values) {
    if (values.size() != channels * length) {
      throw ShapeError("tensor data has " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(channels) + "x" +
                       std::to_string(length));
    }
    BasicTensor t;
    t.channels_ = channels;
    t.length_ = length;
    t.values_.assign(values.begin(), values.end());
    return t;
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  std::span<T> row(std::size_t c) noexcept { return {values_.data() + c * length_, length_}; }
  std::span<const T> row(std::size_t c) const noexcept {
    return {values_.data() + c * length_, length_};
  }

  T& operator()(std::size_t c, std::size_t t) noexcept { return values_[c * length_ + t]; }
  const T& operator()(std::size_t c, std::size_t t) const noexcept {
    return values_[c * length_ + t];
  }

  bool has_grad() const noexcept { return grad_enabled_; }
  void enable_grad() {
    grad_.assign(values_.size(), T(0));
    grad_enabled_ = true;
  }
  void drop_grad() {
    grad_.clear();
    grad_.shrink_to_fit();
    grad_enabled_ = false;
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }
  std::span<T> grad() noexcept { return grad_; }
  std::span<const T> grad() const noexcept { return grad_; }

  bool same_shape(const BasicTensor& other) const noexcept {
    return channels_ == other.channels_ && length_ == other.length_;
  }

  std::string shape_string() const {
    return "[" + std::to_string(channels_) + "x" + std::to_string(length_) + "]";
  }

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  AlignedVector<T> values_;
  AlignedVector<T> grad_;
  bool grad_enabled_ = false;
};

using Tensor = BasicTensor<float>;

}  // namespace angernet
