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
 * \file data.hpp
 * \brief Dataset manifests, binary anger labels, the balanced minibatch
 *        sampler and a synthetic corpus generator.
 *
 * Manifest files are JSON lines, one utterance each:
 *
 *   {"audio_path": "train/anger/a.wav", "emotion_tag": "anger",
 *    "dataset_name": "iemocap", "split": "train", "session": "1",
 *    "duration_s": 3.2}
 *
 * `session` and `duration_s` are optional; relative paths resolve against
 * the manifest's directory.
 */

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/audio.hpp"
#include "angernet/augment.hpp"
#include "angernet/error.hpp"
#include "angernet/tensor.hpp"

namespace angernet {

enum class Split { kTrain, kVal, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

enum class BinaryLabel { kPositive, kNegative, kIgnored };

/// anger/frustration -> positive, unknown -> ignored, anything else ->
/// negative. Case-insensitive, surrounding whitespace ignored.
inline BinaryLabel map_label(std::string_view tag) {
  std::string t;
  for (char c : tag) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto first = t.find_first_not_of(" \t\r\n");
  const auto last = t.find_last_not_of(" \t\r\n");
  t = first == std::string::npos ? std::string{} : t.substr(first, last - first + 1);
  if (t == "anger" || t == "frustration") return BinaryLabel::kPositive;
  if (t == "unknown") return BinaryLabel::kIgnored;
  return BinaryLabel::kNegative;
}

struct ManifestEntry {
  std::string audio_path;
  std::string emotion_tag;
  std::string dataset_name;
  Split split = Split::kTrain;
  std::optional<std::string> session;
  std::optional<double> duration_s;
  std::string base_dir;   // directory relative paths resolve against
  std::size_t line = 0;   // 1-based source line, 0 when built in memory

  BinaryLabel label() const { return map_label(emotion_tag); }

  std::string resolved_path() const {
    std::filesystem::path p(audio_path);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (std::filesystem::path(base_dir) / p).string();
  }
};

inline nlohmann::json to_json_line(const ManifestEntry& e) {
  nlohmann::json j = {{"audio_path", e.audio_path},
                      {"emotion_tag", e.emotion_tag},
                      {"dataset_name", e.dataset_name},
                      {"split", to_string(e.split)}};
  if (e.session) j["session"] = *e.session;
  if (e.duration_s) j["duration_s"] = *e.duration_s;
  return j;
}

struct ManifestStats {
  std::size_t lines = 0;
  std::size_t ignored = 0;  // entries dropped for an `unknown` tag
};

/// Parses JSON-lines manifest text. Blank lines are skipped; entries whose
/// tag maps to `ignored` are dropped and counted.
inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::string& base_dir = {},
                                                 ManifestStats* stats = nullptr) {
  std::vector<ManifestEntry> entries;
  ManifestStats local;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++local.lines;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": invalid JSON (" + e.what() +
                      ")");
    }
    if (!j.is_object()) {
      throw DataError("manifest line " + std::to_string(line_no) + ": expected a JSON object");
    }
    auto required = [&](const char* field) -> std::string {
      auto it = j.find(field);
      if (it == j.end() || it->is_null()) {
        throw DataError("manifest line " + std::to_string(line_no) +
                        ": missing required field '" + field + "'");
      }
      if (!it->is_string()) {
        throw DataError("manifest line " + std::to_string(line_no) + ": field '" + field +
                        "' must be a string");
      }
      return it->get<std::string>();
    };
    ManifestEntry e;
    e.audio_path = required("audio_path");
    if (e.audio_path.empty()) {
      throw DataError("manifest line " + std::to_string(line_no) + ": empty 'audio_path'");
    }
    e.emotion_tag = required("emotion_tag");
    e.dataset_name = required("dataset_name");
    const std::string split = required("split");
    auto parsed = parse_split(split);
    if (!parsed) {
      throw DataError("manifest line " + std::to_string(line_no) + ": split '" + split +
                      "' is not one of train|val|test");
    }
    e.split = *parsed;
    if (auto it = j.find("session"); it != j.end() && !it->is_null()) {
      e.session = it->is_string() ? it->get<std::string>() : it->dump();
    }
    if (auto it = j.find("duration_s"); it != j.end() && it->is_number()) {
      e.duration_s = it->get<double>();
    }
    e.base_dir = base_dir;
    e.line = line_no;
    if (e.label() == BinaryLabel::kIgnored) {
      ++local.ignored;
      continue;
    }
    entries.push_back(std::move(e));
  }
  if (stats) *stats = local;
  return entries;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path,
                                                ManifestStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_manifest(in, dir, stats);
}

inline void write_manifest(const std::string& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  for (const auto& e : entries) out << to_json_line(e).dump() << '\n';
  if (!out) throw IoError("write to manifest '" + path + "' failed");
}

inline std::vector<ManifestEntry> filter_split(std::span<const ManifestEntry> entries, Split split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

/// Session 1-3 -> train, 4 -> val, 5 -> test. The session's first run of
/// digits is used ("3", "Ses03"); entries without one keep their split.
inline void assign_session_splits(std::vector<ManifestEntry>& entries) {
  static const std::regex digits("([0-9]+)");
  for (auto& e : entries) {
    if (!e.session) continue;
    std::smatch m;
    if (!std::regex_search(*e.session, m, digits)) continue;
    const int s = std::stoi(m[1].str());
    if (s >= 1 && s <= 3) e.split = Split::kTrain;
    else if (s == 4) e.split = Split::kVal;
    else if (s == 5) e.split = Split::kTest;
  }
}

/// Scans `<root>/<emotion_tag>/<file>.wav`. Files named like IEMOCAP's
/// "Ses01F_..." get their session recorded.
inline std::vector<ManifestEntry> build_manifest_from_directory(const std::string& root,
                                                                const std::string& dataset_name,
                                                                Split split = Split::kTrain) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("'" + root + "' is not a directory");
  static const std::regex session_re("Ses0*([0-9]+)", std::regex::icase);
  std::vector<ManifestEntry> entries;
  std::vector<fs::path> tag_dirs;
  for (const auto& d : fs::directory_iterator(root))
    if (d.is_directory()) tag_dirs.push_back(d.path());
  std::sort(tag_dirs.begin(), tag_dirs.end());
  for (const auto& dir : tag_dirs) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir)) {
      auto ext = f.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (f.is_regular_file() && ext == ".wav") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ManifestEntry e;
      e.audio_path = fs::relative(f, root).generic_string();
      e.emotion_tag = dir.filename().string();
      e.dataset_name = dataset_name;
      e.split = split;
      std::smatch m;
      const std::string stem = f.filename().string();
      if (std::regex_search(stem, m, session_re)) e.session = m[1].str();
      e.base_dir = root;
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Loaded audio and balanced sampling
// ---------------------------------------------------------------------------

struct LabeledClip {
  std::string path;
  BinaryLabel label = BinaryLabel::kNegative;
  AudioClip clip;  // 16 kHz, normalized and scaled
};

/// Reads, resamples and normalizes every entry of `split`. Any unreadable
/// file is an error.
inline std::vector<LabeledClip> load_labeled_clips(std::span<const ManifestEntry> entries,
                                                   Split split,
                                                   const NormalizeOptions& level = {}) {
  std::vector<LabeledClip> out;
  for (const auto& e : entries) {
    if (e.split != split || e.label() == BinaryLabel::kIgnored) continue;
    const auto path = e.resolved_path();
    AudioClip clip;
    try {
      clip = read_wav_file(path);
    } catch (const Error& err) {
      throw DataError("cannot load '" + path + "': " + err.what());
    }
    out.push_back({path, e.label(), normalize_and_scale(resample(clip), level)});
  }
  return out;
}

struct Batch {
  std::vector<std::vector<float>> segments;
  std::vector<int> labels;            // 1 = positive
  std::vector<std::size_t> sources;   // index into the sampler's clip list
};

/// Draws balanced minibatches: `per_class` positives and negatives sampled
/// uniformly with replacement, one random segment each, augmented, then
/// shuffled. Utterances shorter than the window's minimum content are
/// never drawn.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const LabeledClip> clips, AugmentConfig augment = {},
                  WindowSpec windows = {}, std::size_t per_class = 5)
      : clips_(clips), augment_(augment), windows_(windows), per_class_(per_class) {
    const std::size_t min_content = windows_.min_content_samples();
    for (std::size_t i = 0; i < clips.size(); ++i) {
      if (clips[i].clip.samples.size() < min_content) continue;
      if (clips[i].label == BinaryLabel::kPositive) positives_.push_back(i);
      if (clips[i].label == BinaryLabel::kNegative) negatives_.push_back(i);
    }
    if (positives_.empty()) throw ConfigError("positive pool is empty (no usable anger clips)");
    if (negatives_.empty()) throw ConfigError("negative pool is empty (no usable non-anger clips)");
  }

  Batch sample(Rng& rng) const {
    std::vector<std::pair<std::size_t, int>> picks;
    std::uniform_int_distribution<std::size_t> pos(0, positives_.size() - 1);
    std::uniform_int_distribution<std::size_t> neg(0, negatives_.size() - 1);
    for (std::size_t i = 0; i < per_class_; ++i) picks.emplace_back(positives_[pos(rng)], 1);
    for (std::size_t i = 0; i < per_class_; ++i) picks.emplace_back(negatives_[neg(rng)], 0);
    std::shuffle(picks.begin(), picks.end(), rng);
    Batch batch;
    for (const auto& [index, label] : picks) {
      auto segment = random_segment(clips_[index].clip, rng, windows_);
      batch.segments.push_back(augment_segment(*segment, augment_, rng));
      batch.labels.push_back(label);
      batch.sources.push_back(index);
    }
    return batch;
  }

  std::size_t positive_pool() const { return positives_.size(); }
  std::size_t negative_pool() const { return negatives_.size(); }

 private:
  std::span<const LabeledClip> clips_;
  AugmentConfig augment_;
  WindowSpec windows_;
  std::size_t per_class_;
  std::vector<std::size_t> positives_;
  std::vector<std::size_t> negatives_;
};

inline Batch sample_balanced_batch(std::span<const LabeledClip> clips, Rng& rng,
                                   const AugmentConfig& augment = {},
                                   const WindowSpec& windows = {}) {
  return BalancedSampler(clips, augment, windows).sample(rng);
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

/// Class-separable stand-in for an emotion corpus. Positives are harmonic
/// tone stacks with a steady f0; negatives are band-limited noise bursts.
struct SynthRecipe {
  double f0_min = 130.0;
  double f0_max = 300.0;
  int harmonics = 8;
  double noise_low_hz = 300.0;
  double noise_high_hz = 3000.0;
  double duration_min_s = 1.5;
  double duration_max_s = 4.0;
  double amplitude_min = 0.05;
  double amplitude_max = 0.7;
  double background_noise = 0.0;  // white noise level relative to clip peak
};

struct SynthSpec {
  std::size_t train_positive = 50, train_negative = 50;
  std::size_t val_positive = 20, val_negative = 20;
  std::size_t test_positive = 0, test_negative = 0;
  SynthRecipe recipe;
  std::string dataset_name = "synthetic";
  int sample_rate = kModelSampleRate;
  std::uint64_t seed = 0;
};

namespace detail {

/// RBJ biquad, direct form I.
struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad lowpass(double fc, double fs, double q = std::numbers::sqrt2 / 2) {
    const double w = 2 * std::numbers::pi * fc / fs, c = std::cos(w), alpha = std::sin(w) / (2 * q);
    const double a0 = 1 + alpha;
    return {(1 - c) / 2 / a0, (1 - c) / a0, (1 - c) / 2 / a0, -2 * c / a0, (1 - alpha) / a0};
  }
  static Biquad highpass(double fc, double fs, double q = std::numbers::sqrt2 / 2) {
    const double w = 2 * std::numbers::pi * fc / fs, c = std::cos(w), alpha = std::sin(w) / (2 * q);
    const double a0 = 1 + alpha;
    return {(1 + c) / 2 / a0, -(1 + c) / a0, (1 + c) / 2 / a0, -2 * c / a0, (1 - alpha) / a0};
  }
  void apply(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
};

inline void fade_edges(std::vector<double>& x, std::size_t fade) {
  fade = std::min(fade, x.size() / 2);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = static_cast<double>(i) / static_cast<double>(fade);
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

inline std::vector<float> finish_clip(std::vector<double> x, double amplitude, double background,
                                      Rng& rng) {
  double a = 0.0;
  for (double v : x) a = std::max(a, std::abs(v));
  if (a > 0.0)
    for (double& v : x) v *= amplitude / a;
  if (background > 0.0) {
    std::normal_distribution<double> n(0.0, background * amplitude);
    for (double& v : x) v += n(rng);
  }
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<float>(std::clamp(x[i], -0.999, 0.999));
  }
  return out;
}

}  // namespace detail

/// Steady harmonic stack: sum_k sin(2 pi k f0 t + phase_k) / k.
inline std::vector<float> synth_harmonic(double f0, double duration_s, const SynthRecipe& r,
                                         int rate, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate));
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  std::vector<double> x(n, 0.0);
  for (int k = 1; k <= r.harmonics; ++k) {
    if (k * f0 >= 0.45 * rate) break;
    const double ph = phase(rng);
    const double w = 2 * std::numbers::pi * k * f0 / rate;
    for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(w * static_cast<double>(i) + ph) / k;
  }
  detail::fade_edges(x, static_cast<std::size_t>(0.02 * rate));
  std::uniform_real_distribution<double> amp(r.amplitude_min, r.amplitude_max);
  return detail::finish_clip(std::move(x), amp(rng), r.background_noise, rng);
}

/// Band-limited noise gated into bursts of 150-500 ms with 50-250 ms gaps.
inline std::vector<float> synth_noise_bursts(double duration_s, const SynthRecipe& r, int rate,
                                             Rng& rng) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate));
  std::normal_distribution<double> white(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = white(rng);
  const auto hp = detail::Biquad::highpass(r.noise_low_hz, rate);
  const auto lp = detail::Biquad::lowpass(r.noise_high_hz, rate);
  hp.apply(x);
  hp.apply(x);
  lp.apply(x);
  lp.apply(x);
  std::uniform_real_distribution<double> burst(0.15, 0.5), gap(0.05, 0.25);
  std::vector<double> gate(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    const auto on = static_cast<std::size_t>(burst(rng) * rate);
    std::vector<double> seg(std::min(on, n - i), 1.0);
    detail::fade_edges(seg, static_cast<std::size_t>(0.01 * rate));
    std::copy(seg.begin(), seg.end(), gate.begin() + static_cast<std::ptrdiff_t>(i));
    i += seg.size() + static_cast<std::size_t>(gap(rng) * rate);
  }
  for (std::size_t k = 0; k < n; ++k) x[k] *= gate[k];
  std::uniform_real_distribution<double> amp(r.amplitude_min, r.amplitude_max);
  return detail::finish_clip(std::move(x), amp(rng), r.background_noise, rng);
}

/// Writes `<out>/<split>/<tag>/<split>_<n>.wav` plus `<out>/manifest.jsonl`
/// and returns the manifest entries. Byte-identical for equal specs.
inline std::vector<ManifestEntry> generate_synthetic_dataset(const SynthSpec& spec,
                                                             const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir + "'");
  }
  static const char* kPositiveTags[] = {"anger", "frustration"};
  static const char* kNegativeTags[] = {"neutral", "sadness", "happiness", "excitement"};
  Rng rng(spec.seed);
  const auto& r = spec.recipe;
  std::uniform_real_distribution<double> duration(r.duration_min_s, r.duration_max_s);
  std::uniform_real_distribution<double> f0(r.f0_min, r.f0_max);

  std::vector<ManifestEntry> entries;
  struct Part {
    Split split;
    std::size_t positives, negatives;
  };
  const Part parts[] = {{Split::kTrain, spec.train_positive, spec.train_negative},
                        {Split::kVal, spec.val_positive, spec.val_negative},
                        {Split::kTest, spec.test_positive, spec.test_negative}};
  for (const auto& part : parts) {
    std::size_t counter = 0;
    for (int cls = 1; cls >= 0; --cls) {
      const std::size_t count = cls ? part.positives : part.negatives;
      for (std::size_t k = 0; k < count; ++k) {
        const double d = duration(rng);
        std::string tag = cls ? kPositiveTags[k % 2] : kNegativeTags[k % 4];
        AudioClip clip{cls ? synth_harmonic(f0(rng), d, r, spec.sample_rate, rng)
                           : synth_noise_bursts(d, r, spec.sample_rate, rng),
                       spec.sample_rate};
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%04zu.wav", to_string(part.split), counter++);
        const auto rel = fs::path(to_string(part.split)) / tag / name;
        fs::create_directories(fs::path(out_dir) / rel.parent_path(), ec);
        write_wav_file((fs::path(out_dir) / rel).string(), clip);
        ManifestEntry e;
        e.audio_path = rel.generic_string();
        e.emotion_tag = tag;
        e.dataset_name = spec.dataset_name;
        e.split = part.split;
        e.duration_s = clip.duration_s();
        e.base_dir = out_dir;
        entries.push_back(std::move(e));
      }
    }
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), entries);
  return entries;
}

}  // namespace angernet
