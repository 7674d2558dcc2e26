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
 * \file audio.hpp
 * \brief WAV ingestion, resampling, level normalization and windowing.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/anw.hpp"
#include "angernet/error.hpp"
#include "angernet/tensor.hpp"

namespace angernet {

inline constexpr int kModelSampleRate = 16000;

/// Mono samples. Before scaling, full scale is +-1.0.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kModelSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// Parses a RIFF/WAVE buffer holding PCM16/24/32 or 32-bit float samples.
/// Channels are averaged to mono; integer samples map to [-1, 1).
inline AudioClip read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw DataError("WAV chunk '" + std::string(reinterpret_cast<const char*>(chunk), 4) +
                      "' declares " + std::to_string(size) + " bytes but only " +
                      std::to_string(bytes.size() - body) + " remain (truncated file)");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("WAV fmt chunk too small");
      const std::uint8_t* f = bytes.data() + body;
      format = detail::le16(f);
      channels = detail::le16(f + 2);
      rate = detail::le32(f + 4);
      block_align = detail::le16(f + 12);
      bits = detail::le16(f + 14);
      if (format == 0xFFFE) {
        if (size < 40) throw DataError("WAV extensible fmt chunk too small");
        format = detail::le16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw DataError("WAV file has no fmt chunk");
  if (!have_data) throw DataError("WAV file has no data chunk");
  if (channels == 0 || rate == 0) throw DataError("WAV header declares zero channels or rate");
  const bool pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == 3 && bits == 32;
  if (!pcm && !flt) {
    throw DataError("unsupported WAV codec (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits)");
  }
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels) throw DataError("WAV block_align inconsistent");

  const std::size_t frames = data.size() / block_align;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  const double inv_channels = 1.0 / channels;
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data.data() + f * block_align + c * bytes_per_sample;
      double v = 0.0;
      if (flt) {
        float x;
        std::memcpy(&x, p, 4);
        v = x;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(detail::le32(p)) / 2147483648.0;
      }
      acc += v;
    }
    clip.samples[f] = static_cast<float>(acc * inv_channels);
  }
  for (float v : clip.samples) {
    if (!std::isfinite(v)) throw DataError("WAV contains non-finite samples");
  }
  return clip;
}

inline AudioClip read_wav_file(const std::string& path) {
  return read_wav(read_file_bytes(path));
}

/// 16-bit PCM encoding; samples are clamped to the representable range.
inline std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate,
                                                  int channels = 1) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(36 + data_bytes);
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(1);
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(sample_rate));
  u32(static_cast<std::uint32_t>(sample_rate * channels * 2));
  u16(static_cast<std::uint16_t>(channels * 2));
  u16(16);
  put("data", 4);
  u32(data_bytes);
  for (float s : samples) {
    const long v = std::lround(static_cast<double>(s) * 32768.0);
    u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
  }
  return out;
}

inline void write_wav_file(const std::string& path, const AudioClip& clip) {
  write_file_bytes(path, encode_wav_pcm16(clip.samples, clip.sample_rate));
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Kaiser-windowed sinc stored as a polyphase table over [0, zero_crossings]
/// with `phases` entries per zero crossing; lookups interpolate linearly.
class SincTable {
 public:
  static constexpr int kZeroCrossings = 64;
  static constexpr int kPhases = 512;
  static constexpr double kBeta = 8.6;

  SincTable() {
    const int n = kZeroCrossings * kPhases;
    table_.resize(n + 2, 0.0);
    const double i0_beta = std::cyl_bessel_i(0.0, kBeta);
    for (int i = 0; i <= n; ++i) {
      const double u = static_cast<double>(i) / kPhases;
      const double r = u / kZeroCrossings;
      const double window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      const double sinc = i == 0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      table_[i] = sinc * window;
    }
  }

  /// Filter value at |u| (in input-sample units at the filter's cutoff).
  double operator()(double u) const {
    u = std::abs(u) * kPhases;
    const auto i = static_cast<std::size_t>(u);
    if (i >= table_.size() - 2) return 0.0;
    const double frac = u - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

  static const SincTable& instance() {
    static const SincTable table;
    return table;
  }

 private:
  std::vector<double> table_;
};

/// Band-limited resampling by an arbitrary `ratio` (output rate / input
/// rate). The cutoff drops to the output Nyquist when downsampling.
inline std::vector<float> resample_ratio(std::span<const float> x, double ratio,
                                         std::optional<std::size_t> out_length = std::nullopt) {
  if (!(ratio > 0.0)) throw ConfigError("resample ratio must be positive");
  const std::size_t n_out =
      out_length.value_or(static_cast<std::size_t>(std::llround(x.size() * ratio)));
  std::vector<float> y(n_out, 0.0f);
  if (x.empty()) return y;
  const auto& h = SincTable::instance();
  const double scale = std::min(1.0, ratio);
  const double half_width = SincTable::kZeroCrossings / scale;
  const auto last = static_cast<std::ptrdiff_t>(x.size()) - 1;
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      acc += static_cast<double>(x[static_cast<std::size_t>(j)]) * h(scale * (t - static_cast<double>(j)));
    }
    y[n] = static_cast<float>(acc * scale);
  }
  return y;
}

/// Resamples to `target_hz`; identical rates pass the samples through.
inline AudioClip resample(const AudioClip& clip, int target_hz = kModelSampleRate) {
  if (target_hz <= 0 || clip.sample_rate <= 0) throw ConfigError("sample rates must be positive");
  if (clip.sample_rate == target_hz) return clip;
  const double ratio = static_cast<double>(target_hz) / clip.sample_rate;
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.samples.size()) * target_hz / clip.sample_rate));
  return {resample_ratio(clip.samples, ratio, n_out), target_hz};
}

// ---------------------------------------------------------------------------
// Level normalization
// ---------------------------------------------------------------------------

enum class LevelMode { kRms, kPeak };

struct NormalizeOptions {
  LevelMode mode = LevelMode::kRms;
  double target_dbfs = -20.0;
  double full_scale = 256.0;  // network input units per full-scale amplitude
};

inline double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double sq = 0.0;
  for (float v : x) sq += static_cast<double>(v) * v;
  return std::sqrt(sq / static_cast<double>(x.size()));
}

inline double peak(std::span<const float> x) {
  double a = 0.0;
  for (float v : x) a = std::max(a, std::abs(static_cast<double>(v)));
  return a;
}

/// Gain that brings `x` to the target level, or 1 for digital silence.
inline double level_gain(std::span<const float> x, const NormalizeOptions& opt = {}) {
  constexpr double kSilence = 1e-8;
  const double target = std::pow(10.0, opt.target_dbfs / 20.0);
  const double level = opt.mode == LevelMode::kRms ? rms(x) : peak(x);
  return level < kSilence ? 1.0 : target / level;
}

/// Two stages: gain to the target dBFS level, then full scale -> +-256.
inline AudioClip normalize_and_scale(const AudioClip& clip, const NormalizeOptions& opt = {}) {
  const double g = level_gain(clip.samples, opt) * opt.full_scale;
  AudioClip out{std::vector<float>(clip.samples.size()), clip.sample_rate};
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    out.samples[i] = static_cast<float>(clip.samples[i] * g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

struct WindowSpec {
  double duration_s = 1.2;
  double hop_s = 0.6;
  double min_content_s = 1.0;

  void validate() const {
    if (!(duration_s > 0.0 && hop_s > 0.0 && min_content_s > 0.0 &&
          min_content_s <= duration_s)) {
      throw ConfigError("window spec needs 0 < min_content_s <= duration_s and hop_s > 0");
    }
  }
  std::size_t window_samples(int rate = kModelSampleRate) const {
    return static_cast<std::size_t>(std::llround(duration_s * rate));
  }
  std::size_t hop_samples(int rate = kModelSampleRate) const {
    return static_cast<std::size_t>(std::llround(hop_s * rate));
  }
  std::size_t min_content_samples(int rate = kModelSampleRate) const {
    return static_cast<std::size_t>(std::llround(min_content_s * rate));
  }
};

inline void to_json(nlohmann::json& j, const WindowSpec& w) {
  j = {{"duration_s", w.duration_s}, {"hop_s", w.hop_s}, {"min_content_s", w.min_content_s}};
}
inline void from_json(const nlohmann::json& j, WindowSpec& w) {
  w.duration_s = j.value("duration_s", w.duration_s);
  w.hop_s = j.value("hop_s", w.hop_s);
  w.min_content_s = j.value("min_content_s", w.min_content_s);
}

struct Segment {
  std::size_t start = 0;  // first sample, in the source clip
  std::size_t content = 0;  // real (non-padding) samples
  std::vector<float> samples;
};

/// Copies [start, start + window) and zero-pads past the end of `x`.
inline std::vector<float> padded_window(std::span<const float> x, std::size_t start,
                                        std::size_t window) {
  std::vector<float> out(window, 0.0f);
  if (start < x.size()) {
    const std::size_t n = std::min(window, x.size() - start);
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(start), n, out.begin());
  }
  return out;
}

/// Sliding windows at multiples of the hop. A window is kept iff it holds at
/// least min_content_s of real audio; short tails are zero-padded.
inline std::vector<Segment> extract_windows(const AudioClip& clip, const WindowSpec& spec = {}) {
  spec.validate();
  const std::size_t window = spec.window_samples(clip.sample_rate);
  const std::size_t hop = spec.hop_samples(clip.sample_rate);
  const std::size_t min_content = spec.min_content_samples(clip.sample_rate);
  std::vector<Segment> out;
  const std::size_t n = clip.samples.size();
  for (std::size_t start = 0; start < n && n - start >= min_content; start += hop) {
    out.push_back({start, std::min(window, n - start), padded_window(clip.samples, start, window)});
  }
  return out;
}

/// One training segment with a uniformly drawn start among all starts that
/// keep at least min_content_s of real audio. nullopt when the clip is too
/// short to qualify.
inline std::optional<std::vector<float>> random_segment(const AudioClip& clip, Rng& rng,
                                                        const WindowSpec& spec = {}) {
  const std::size_t window = spec.window_samples(clip.sample_rate);
  const std::size_t min_content = spec.min_content_samples(clip.sample_rate);
  if (clip.samples.size() < min_content) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, clip.samples.size() - min_content);
  return padded_window(clip.samples, pick(rng), window);
}

inline Tensor to_tensor(std::span<const float> samples) {
  return Tensor::from(1, samples.size(), std::vector<float>(samples.begin(), samples.end()));
}

}  // namespace angernet
