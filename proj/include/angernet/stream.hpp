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
 * \file stream.hpp
 * \brief Incremental windowing of a live sample stream and a bounded
 *        hand-off queue between a reader and a scorer.
 */

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "angernet/audio.hpp"
#include "angernet/error.hpp"

namespace angernet {

struct StreamWindow {
  std::size_t start = 0;  // absolute sample index of the first sample
  std::size_t content = 0;
  double t_end_s = 0.0;   // (start + window) / rate
  std::vector<float> samples;
};

/// Emits the same windows extract_windows would produce on the full
/// recording, but as soon as each one is complete. Samples that no future
/// window can reach are discarded.
class StreamWindower {
 public:
  explicit StreamWindower(WindowSpec spec = {}, int sample_rate = kModelSampleRate)
      : rate_(sample_rate) {
    spec.validate();
    window_ = spec.window_samples(rate_);
    hop_ = spec.hop_samples(rate_);
    min_content_ = spec.min_content_samples(rate_);
  }

  void push(std::span<const float> samples) {
    if (finished_) throw ConfigError("push after flush");
    buffer_.insert(buffer_.end(), samples.begin(), samples.end());
    received_ += samples.size();
  }

  /// Next complete window, if the stream has reached its end.
  std::optional<StreamWindow> next() {
    if (received_ < next_start_ + window_) return std::nullopt;
    return take(window_);
  }

  /// End of stream: the final zero-padded window, if at least the minimum
  /// content remains past the next window start. Call next() until empty
  /// first.
  std::optional<StreamWindow> flush() {
    finished_ = true;
    if (received_ >= next_start_ + window_) return take(window_);
    if (received_ <= next_start_ || received_ - next_start_ < min_content_) return std::nullopt;
    return take(received_ - next_start_);
  }

  std::size_t received() const { return received_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  StreamWindow take(std::size_t content) {
    const std::size_t offset = next_start_ - base_;
    StreamWindow w;
    w.start = next_start_;
    w.content = content;
    w.t_end_s = static_cast<double>(next_start_ + window_) / rate_;
    w.samples.assign(window_, 0.0f);
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(offset), content, w.samples.begin());
    next_start_ += hop_;
    const std::size_t drop = std::min(next_start_ - base_, buffer_.size());
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(drop));
    base_ += drop;
    return w;
  }

  int rate_;
  std::size_t window_ = 0, hop_ = 0, min_content_ = 0;
  std::deque<float> buffer_;
  std::size_t base_ = 0;        // absolute index of buffer_.front()
  std::size_t received_ = 0;
  std::size_t next_start_ = 0;
  bool finished_ = false;
};

/// Decodes little-endian signed 16-bit PCM into [-1, 1) floats. A trailing
/// odd byte is carried over to the next call.
class Pcm16Decoder {
 public:
  std::vector<float> decode(std::span<const std::uint8_t> bytes) {
    std::vector<float> out;
    out.reserve((bytes.size() + 1) / 2);
    std::size_t i = 0;
    if (pending_ && !bytes.empty()) {
      out.push_back(sample(*pending_, bytes[0]));
      pending_.reset();
      i = 1;
    }
    for (; i + 1 < bytes.size(); i += 2) out.push_back(sample(bytes[i], bytes[i + 1]));
    if (i < bytes.size()) pending_ = bytes[i];
    return out;
  }
  bool has_pending() const { return pending_.has_value(); }

 private:
  static float sample(std::uint8_t lo, std::uint8_t hi) {
    const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
    return static_cast<float>(v) / 32768.0f;
  }
  std::optional<std::uint8_t> pending_;
};

/// Fixed-capacity blocking queue. close() wakes every waiter; pop() then
/// drains what is left and returns nullopt.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  bool push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace angernet
