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
 * \file augment.hpp
 * \brief Training-time audio augmentation: phase-vocoder time stretch,
 *        quarter-step pitch shift and additive Gaussian noise.
 */

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>
#include <nlohmann/json.hpp>

#include "angernet/audio.hpp"
#include "angernet/error.hpp"
#include "angernet/tensor.hpp"

namespace angernet {

struct AugmentConfig {
  bool enabled = true;
  double stretch_min = 0.9;
  double stretch_max = 1.1;
  int pitch_max_quarter_steps = 5;  // q drawn from [-max, max]
  bool integer_pitch_steps = true;  // false: q continuous in [-max, max]
  double noise_sigma_frac = 0.005;  // sigma ~ U[0, frac * max|x|]

  void validate() const {
    if (!(stretch_min > 0.0 && stretch_max >= stretch_min)) {
      throw ConfigError("stretch range must be positive and ordered");
    }
    if (pitch_max_quarter_steps < 0 || pitch_max_quarter_steps > 12) {
      throw ConfigError("pitch_max_quarter_steps must be in [0, 12]");
    }
    if (noise_sigma_frac < 0.0) throw ConfigError("noise_sigma_frac must be nonnegative");
  }
};

inline void to_json(nlohmann::json& j, const AugmentConfig& a) {
  j = {{"enabled", a.enabled},
       {"stretch_min", a.stretch_min},
       {"stretch_max", a.stretch_max},
       {"pitch_max_quarter_steps", a.pitch_max_quarter_steps},
       {"integer_pitch_steps", a.integer_pitch_steps},
       {"noise_sigma_frac", a.noise_sigma_frac}};
}

inline void from_json(const nlohmann::json& j, AugmentConfig& a) {
  a.enabled = j.value("enabled", a.enabled);
  a.stretch_min = j.value("stretch_min", a.stretch_min);
  a.stretch_max = j.value("stretch_max", a.stretch_max);
  a.pitch_max_quarter_steps = j.value("pitch_max_quarter_steps", a.pitch_max_quarter_steps);
  a.integer_pitch_steps = j.value("integer_pitch_steps", a.integer_pitch_steps);
  a.noise_sigma_frac = j.value("noise_sigma_frac", a.noise_sigma_frac);
}

inline constexpr std::size_t kVocoderFft = 1024;
inline constexpr std::size_t kVocoderHop = 256;

/// Phase vocoder: STFT (periodic Hann, centered frames), magnitude
/// interpolation between neighbouring frames at fractional positions
/// 0, rate, 2*rate, ..., phase accumulation, and weighted overlap-add.
/// Output length is round(L / rate).
inline std::vector<float> phase_vocoder(std::span<const float> x, double rate) {
  if (!(rate > 0.0)) throw ConfigError("time stretch rate must be positive");
  const std::size_t N = kVocoderFft, hop = kVocoderHop, bins = N / 2 + 1;
  const std::size_t L = x.size();
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(L) / rate));
  if (L == 0) return std::vector<float>(out_len, 0.0f);

  using cd = std::complex<double>;
  std::vector<double> window(N);
  for (std::size_t n = 0; n < N; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / static_cast<double>(N));
  }
  std::vector<double> padded(L + N, 0.0);
  for (std::size_t i = 0; i < L; ++i) padded[N / 2 + i] = x[i];
  const std::size_t n_frames = 1 + L / hop;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::vector<cd>> spec(n_frames + 1, std::vector<cd>(bins, cd(0.0, 0.0)));
  std::vector<double> frame(N);
  std::vector<cd> full(N);
  for (std::size_t f = 0; f < n_frames; ++f) {
    for (std::size_t n = 0; n < N; ++n) frame[n] = padded[f * hop + n] * window[n];
    fft.fwd(full.data(), frame.data(), static_cast<Eigen::Index>(N));
    std::copy_n(full.begin(), bins, spec[f].begin());
  }

  std::vector<double> advance(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    advance[k] = 2.0 * std::numbers::pi * static_cast<double>(k * hop) / static_cast<double>(N);
  }
  std::vector<double> phase(bins);
  for (std::size_t k = 0; k < bins; ++k) phase[k] = std::arg(spec[0][k]);

  std::vector<double> steps;
  for (double t = 0.0; t < static_cast<double>(n_frames); t += rate) steps.push_back(t);

  const std::size_t y_len = N + hop * (steps.size() - 1);
  std::vector<double> y(y_len, 0.0), wss(y_len, 0.0);
  std::vector<cd> out_bins(N);
  std::vector<double> synth(N);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto f0 = static_cast<std::size_t>(steps[i]);
    const double alpha = steps[i] - static_cast<double>(f0);
    const auto& c0 = spec[f0];
    const auto& c1 = spec[f0 + 1];
    for (std::size_t k = 0; k < bins; ++k) {
      const double mag = (1.0 - alpha) * std::abs(c0[k]) + alpha * std::abs(c1[k]);
      out_bins[k] = std::polar(mag, phase[k]);
      double dphase = std::arg(c1[k]) - std::arg(c0[k]) - advance[k];
      dphase -= 2.0 * std::numbers::pi * std::round(dphase / (2.0 * std::numbers::pi));
      phase[k] += advance[k] + dphase;
    }
    fft.inv(synth.data(), out_bins.data(), static_cast<Eigen::Index>(N));
    for (std::size_t n = 0; n < N; ++n) {
      y[i * hop + n] += synth[n] * window[n];
      wss[i * hop + n] += window[n] * window[n];
    }
  }
  std::vector<float> out(out_len, 0.0f);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t j = i + N / 2;
    if (j >= y_len) break;
    out[i] = wss[j] > 1e-10 ? static_cast<float>(y[j] / wss[j]) : 0.0f;
  }
  return out;
}

/// Changes duration by 1/rate without changing pitch (rate > 1 shortens).
/// Rate exactly 1 is a passthrough.
inline std::vector<float> time_stretch(std::span<const float> x, double rate) {
  if (rate == 1.0) return {x.begin(), x.end()};
  return phase_vocoder(x, rate);
}

namespace detail {

inline std::vector<float> fit_length(std::vector<float> x, std::size_t length) {
  x.resize(length, 0.0f);
  return x;
}

}  // namespace detail

/// Shifts pitch by factor 2^(q/24) while keeping the length: resample by
/// 1/f (shorter for q > 0), stretch by rate 1/f back to the original
/// duration, then trim or zero-pad to exactly the input length.
inline std::vector<float> pitch_shift(std::span<const float> x, double quarter_steps) {
  if (std::abs(quarter_steps) > 12.0) throw ConfigError("pitch shift limited to 12 quarter-steps");
  if (quarter_steps == 0.0) return {x.begin(), x.end()};
  const double f = std::pow(2.0, quarter_steps / 24.0);
  const auto shifted = resample_ratio(x, 1.0 / f);
  return detail::fit_length(phase_vocoder(shifted, 1.0 / f), x.size());
}

inline std::vector<float> pitch_shift(std::span<const float> x, int quarter_steps) {
  return pitch_shift(x, static_cast<double>(quarter_steps));
}

/// Adds i.i.d. N(0, sigma^2) noise. sigma == 0 returns the input unchanged.
inline std::vector<float> add_noise(std::span<const float> x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ConfigError("noise sigma must be nonnegative");
  std::vector<float> out(x.begin(), x.end());
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (float& v : out) v = static_cast<float>(v + noise(rng));
  return out;
}

/// Parameters drawn for one augmented segment.
struct AugmentDraw {
  double rate = 1.0;
  double quarter_steps = 0.0;
  double sigma = 0.0;
};

inline AugmentDraw draw_augmentation(std::span<const float> segment, const AugmentConfig& cfg,
                                     Rng& rng) {
  AugmentDraw d;
  d.rate = std::uniform_real_distribution<double>(cfg.stretch_min, cfg.stretch_max)(rng);
  const int qmax = cfg.pitch_max_quarter_steps;
  if (cfg.integer_pitch_steps) {
    d.quarter_steps = std::uniform_int_distribution<int>(-qmax, qmax)(rng);
  } else {
    d.quarter_steps = std::uniform_real_distribution<double>(-qmax, qmax)(rng);
  }
  const double a = peak(segment);
  d.sigma = std::uniform_real_distribution<double>(0.0, cfg.noise_sigma_frac * a)(rng);
  return d;
}

/// Stretch, then pitch shift, then noise; the result is center-cropped or
/// tail-padded back to the input length.
inline std::vector<float> apply_augmentation(std::span<const float> segment, const AugmentDraw& d,
                                             Rng& rng) {
  auto y = time_stretch(segment, d.rate);
  y = pitch_shift(y, d.quarter_steps);
  y = add_noise(y, d.sigma, rng);
  const std::size_t target = segment.size();
  if (y.size() > target) {
    const std::size_t off = (y.size() - target) / 2;
    return {y.begin() + static_cast<std::ptrdiff_t>(off),
            y.begin() + static_cast<std::ptrdiff_t>(off + target)};
  }
  return detail::fit_length(std::move(y), target);
}

inline std::vector<float> augment_segment(std::span<const float> segment, const AugmentConfig& cfg,
                                          Rng& rng) {
  if (!cfg.enabled) return {segment.begin(), segment.end()};
  cfg.validate();
  const auto draw = draw_augmentation(segment, cfg, rng);
  return apply_augmentation(segment, draw, rng);
}

}  // namespace angernet
