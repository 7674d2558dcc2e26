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
 * \file eval.hpp
 * \brief Sliding-window scoring, ROC / AU-ROC and DeLong's paired test.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/audio.hpp"
#include "angernet/data.hpp"
#include "angernet/error.hpp"
#include "angernet/model.hpp"

namespace angernet {

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Where the level normalization is measured: over the whole utterance
/// (offline default) or over each window separately (what a live stream
/// can do).
enum class NormScope { kPerUtterance, kPerWindow };

inline const char* to_string(NormScope s) {
  return s == NormScope::kPerWindow ? "per-window" : "per-utterance";
}

struct ScoringOptions {
  WindowSpec windows;
  NormalizeOptions level;
  NormScope scope = NormScope::kPerUtterance;
};

struct WindowScore {
  double start_s = 0.0;
  double p_anger = 0.0;
};

struct ScoredClip {
  std::string source;
  double start_s = 0.0;
  double p_anger = 0.0;
  BinaryLabel label = BinaryLabel::kNegative;
};

/// Scores one raw (already segmented, un-normalized) window.
inline double score_window(AngerNet& net, std::span<const float> window,
                           const NormalizeOptions& level = {}) {
  AudioClip c{{window.begin(), window.end()}, kModelSampleRate};
  return forward_scores(net, to_tensor(normalize_and_scale(c, level).samples)).p_anger;
}

/// Windows and scores a 16 kHz clip that has not been normalized yet.
inline std::vector<WindowScore> score_audio(AngerNet& net, const AudioClip& raw16k,
                                            const ScoringOptions& opt = {}) {
  std::vector<WindowScore> out;
  if (opt.scope == NormScope::kPerUtterance) {
    const auto normalized = normalize_and_scale(raw16k, opt.level);
    for (const auto& w : extract_windows(normalized, opt.windows)) {
      out.push_back({static_cast<double>(w.start) / raw16k.sample_rate,
                     forward_scores(net, to_tensor(w.samples)).p_anger});
    }
  } else {
    for (const auto& w : extract_windows(raw16k, opt.windows)) {
      out.push_back({static_cast<double>(w.start) / raw16k.sample_rate,
                     score_window(net, w.samples, opt.level)});
    }
  }
  return out;
}

/// Scores clips that are already resampled and normalized (the training
/// validation path).
inline std::vector<ScoredClip> score_clips(AngerNet& net, std::span<const LabeledClip> clips,
                                           const WindowSpec& windows = {}) {
  std::vector<ScoredClip> out;
  for (const auto& c : clips) {
    if (c.label == BinaryLabel::kIgnored) continue;
    for (const auto& w : extract_windows(c.clip, windows)) {
      out.push_back({c.path, static_cast<double>(w.start) / c.clip.sample_rate,
                     forward_scores(net, to_tensor(w.samples)).p_anger, c.label});
    }
  }
  return out;
}

struct ScoreReport {
  std::vector<ScoredClip> clips;
  std::vector<std::pair<std::string, std::string>> failures;  // (path, reason)
  std::vector<std::string> skipped;  // readable but no qualifying window
};

/// read -> resample -> normalize -> windows -> score for every labelled
/// entry. Per-file failures are recorded and skipped; if every file fails
/// a DataError is thrown.
inline ScoreReport score_dataset(AngerNet& net, std::span<const ManifestEntry> entries,
                                 const ScoringOptions& opt = {}) {
  ScoreReport report;
  std::size_t attempted = 0;
  for (const auto& e : entries) {
    if (e.label() == BinaryLabel::kIgnored) continue;
    ++attempted;
    const auto path = e.resolved_path();
    std::vector<WindowScore> scores;
    try {
      scores = score_audio(net, resample(read_wav_file(path)), opt);
    } catch (const Error& err) {
      report.failures.emplace_back(path, err.what());
      continue;
    }
    if (scores.empty()) report.skipped.push_back(path);
    for (const auto& s : scores) report.clips.push_back({path, s.start_s, s.p_anger, e.label()});
  }
  if (attempted > 0 && report.failures.size() == attempted) {
    throw DataError("all " + std::to_string(attempted) + " entries failed to load; first: " +
                    report.failures.front().first + ": " + report.failures.front().second);
  }
  return report;
}

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

struct RocCurve {
  std::vector<std::pair<double, double>> points;         // (fpr, tpr)
  std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;  // (fp, tp) per point
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("got " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("non-finite score");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ConfigError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  if (pos == 0 || pos == labels.size()) {
    throw DataError("AU-ROC is undefined: need both positive and negative examples (got " +
                    std::to_string(pos) + " positive of " + std::to_string(labels.size()) + ")");
  }
}

}  // namespace detail

/// ROC from a descending sweep over distinct score thresholds. Tied scores
/// advance both rates at once, so the trapezoidal area equals the
/// Mann-Whitney statistic with ties counted as 1/2.
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve c;
  for (int l : labels) (l ? c.positives : c.negatives)++;
  const double P = static_cast<double>(c.positives), N = static_cast<double>(c.negatives);
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of one (positive, negative) pair; exact in
  // integers up to ~2^63 pairs.
  std::uint64_t twice_area = 0;
  c.points.emplace_back(0.0, 0.0);
  c.counts.emplace_back(0, 0);
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? dtp : dfp)++;
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    c.points.emplace_back(static_cast<double>(fp) / N, static_cast<double>(tp) / P);
    c.counts.emplace_back(fp, tp);
  }
  c.auc = static_cast<double>(twice_area) / (2.0 * P * N);
  return c;
}

// ---------------------------------------------------------------------------
// DeLong
// ---------------------------------------------------------------------------

struct AucComparison {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double covariance = 0.0;
  double var_diff = 0.0;
  double z = 0.0;
  double p = 1.0;
};

/// Two-sided tail probability of a standard normal deviate.
inline double normal_two_sided_p(double z) {
  return std::clamp(std::erfc(std::abs(z) / std::numbers::sqrt2), 0.0, 1.0);
}

namespace detail {

/// Placement values: for each positive, the fraction of negatives it beats
/// (ties 1/2); for each negative, the fraction of positives that beat it.
struct Placements {
  std::vector<double> positive;
  std::vector<double> negative;
  double auc = 0.0;
};

inline Placements placements(std::span<const double> scores, std::span<const int> labels) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  std::vector<double> sorted_pos = pos, sorted_neg = neg;
  std::sort(sorted_pos.begin(), sorted_pos.end());
  std::sort(sorted_neg.begin(), sorted_neg.end());
  Placements p;
  const double m = static_cast<double>(pos.size()), n = static_cast<double>(neg.size());
  for (double x : pos) {
    const auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), x);
    const auto hi = std::upper_bound(lo, sorted_neg.end(), x);
    const double below = static_cast<double>(lo - sorted_neg.begin());
    p.positive.push_back((below + 0.5 * static_cast<double>(hi - lo)) / n);
  }
  for (double y : neg) {
    const auto lo = std::lower_bound(sorted_pos.begin(), sorted_pos.end(), y);
    const auto hi = std::upper_bound(lo, sorted_pos.end(), y);
    const double above = static_cast<double>(sorted_pos.end() - hi);
    p.negative.push_back((above + 0.5 * static_cast<double>(hi - lo)) / m);
  }
  p.auc = std::accumulate(p.positive.begin(), p.positive.end(), 0.0) / m;
  return p;
}

inline double sample_cov(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

}  // namespace detail

/// DeLong's test for two correlated AUCs on the same labelled examples.
/// A difference variance below 1e-12 is treated as degenerate: z = 0, p = 1.
inline AucComparison delong_compare(std::span<const double> scores_a,
                                    std::span<const double> scores_b,
                                    std::span<const int> labels) {
  if (scores_a.size() != scores_b.size()) {
    throw ShapeError("delong_compare: score lists differ in length (" +
                     std::to_string(scores_a.size()) + " vs " + std::to_string(scores_b.size()) +
                     ")");
  }
  detail::check_scores(scores_a, labels);
  detail::check_scores(scores_b, labels);
  const auto pa = detail::placements(scores_a, labels);
  const auto pb = detail::placements(scores_b, labels);
  const double m = static_cast<double>(pa.positive.size());
  const double n = static_cast<double>(pa.negative.size());

  AucComparison r;
  r.auc_a = pa.auc;
  r.auc_b = pb.auc;
  r.var_a = detail::sample_cov(pa.positive, pa.positive) / m +
            detail::sample_cov(pa.negative, pa.negative) / n;
  r.var_b = detail::sample_cov(pb.positive, pb.positive) / m +
            detail::sample_cov(pb.negative, pb.negative) / n;
  r.covariance = detail::sample_cov(pa.positive, pb.positive) / m +
                 detail::sample_cov(pa.negative, pb.negative) / n;
  r.var_diff = r.var_a + r.var_b - 2.0 * r.covariance;
  if (r.var_diff < 1e-12) {
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  r.z = (r.auc_a - r.auc_b) / std::sqrt(r.var_diff);
  r.p = normal_two_sided_p(r.z);
  return r;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Drops interior points that lie on the segment between their neighbours;
/// the trapezoidal area is unchanged. Exact, using the integer counts.
inline std::vector<std::pair<double, double>> collapse_collinear(const RocCurve& c) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    if (keep.size() >= 2) {
      const auto [x0, y0] = c.counts[keep[keep.size() - 2]];
      const auto [x1, y1] = c.counts[keep.back()];
      const auto [x2, y2] = c.counts[i];
      const auto lhs = static_cast<__int128>(x1 - x0) * static_cast<__int128>(y2 - y0);
      const auto rhs = static_cast<__int128>(x2 - x0) * static_cast<__int128>(y1 - y0);
      if (lhs == rhs) keep.back() = i;
      else keep.push_back(i);
    } else {
      keep.push_back(i);
    }
  }
  std::vector<std::pair<double, double>> out;
  for (auto i : keep) out.push_back(c.points[i]);
  return out;
}

/// Writes `<stem>.csv` (header "fpr,tpr") and `<stem>.json`
/// ({"auc", "n_pos", "n_neg"}).
inline void emit_roc(const RocCurve& curve, const std::string& stem) {
  std::ofstream csv(stem + ".csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write '" + stem + ".csv'");
  csv << "fpr,tpr\n";
  char buf[96];
  for (const auto& [x, y] : collapse_collinear(curve)) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", x, y);
    csv << buf;
  }
  std::ofstream js(stem + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot write '" + stem + ".json'");
  js << nlohmann::json{{"auc", curve.auc}, {"n_pos", curve.positives}, {"n_neg", curve.negatives}}
            .dump()
     << '\n';
  if (!csv || !js) throw IoError("writing ROC output '" + stem + "' failed");
}

inline nlohmann::json comparison_report(const AucComparison& c) {
  return {{"auc_a", c.auc_a}, {"auc_b", c.auc_b}, {"var_diff", c.var_diff},
          {"z", c.z},         {"p", c.p}};
}

/// Scores and labels from scored clips, labels as 1 = positive.
inline std::pair<std::vector<double>, std::vector<int>> scores_and_labels(
    std::span<const ScoredClip> clips) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& c : clips) {
    if (c.label == BinaryLabel::kIgnored) continue;
    s.push_back(c.p_anger);
    l.push_back(c.label == BinaryLabel::kPositive ? 1 : 0);
  }
  return {s, l};
}

}  // namespace angernet
