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

// angernet: command-line front end.
//
//   angernet train    --config c.json --manifest m.jsonl --out dir/
//   angernet eval     --checkpoint a.anw --manifest m.jsonl --split test --out dir/ [--compare b.anw]
//   angernet predict  --checkpoint a.anw file.wav [--norm per-window|per-utterance]
//   angernet stream   --checkpoint a.anw < pcm16le_16k_mono.raw
//   angernet manifest build --root dir/ --out m.jsonl
//   angernet manifest synth --out dir/
//   angernet weights  inspect file.anw
//
// Exit status: 0 ok, 1 usage/config, 2 data, 3 numeric. Failures print one
// JSON line on stderr: {"error": <kind>, "message": <text>}.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "angernet/angernet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace angernet::cli {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitUsage;
    case ErrorKind::kNumeric: return kExitNumeric;
    default: return kExitData;
  }
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

void print(const json& j) { std::cout << j.dump() << '\n'; }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

TrainConfig config_from_file(const std::optional<std::string>& path) {
  TrainConfig cfg;
  if (!path) return cfg;
  try {
    cfg = read_json_file(*path).get<TrainConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("config '" + *path + "': " + e.what());
  }
  return cfg;
}

void apply_seed_env(TrainConfig& cfg) {
  if (const char* s = std::getenv("ANGERNET_SEED")) {
    try {
      cfg.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("ANGERNET_SEED is not an unsigned integer: '") + s + "'");
    }
  }
}

NormScope parse_norm(const std::string& s) {
  if (s == "per-utterance") return NormScope::kPerUtterance;
  if (s == "per-window") return NormScope::kPerWindow;
  throw ConfigError("--norm must be per-window or per-utterance");
}

// Flags shared by every command that scores audio.
struct ScoringFlags {
  std::optional<std::string> config;
  std::string norm = "per-utterance";

  void attach(CLI::App* app, const std::string& default_norm) {
    norm = default_norm;
    app->add_option("--config", config, "JSON config (windows, level)");
    app->add_option("--norm", norm, "level normalization scope")
        ->check(CLI::IsMember({"per-window", "per-utterance"}));
  }

  ScoringOptions resolve() const {
    const auto cfg = config_from_file(config);
    ScoringOptions opt;
    opt.windows = cfg.windows;
    opt.level = cfg.level;
    opt.scope = parse_norm(norm);
    opt.windows.validate();
    return opt;
  }
};

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  std::optional<std::string> config;
  std::string manifest;
  std::string out;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> val_every;
  std::optional<std::size_t> max_steps;
  std::optional<double> dropout;
  std::optional<std::string> transfer_store;
  std::optional<std::size_t> load_first_k;
  std::optional<std::size_t> freeze_first_k;
  std::optional<std::uint64_t> seed;
  std::optional<bool> augment;
  std::optional<std::size_t> layer4_filters;
};

void add_train(CLI::App& root, TrainFlags& f) {
  auto* c = root.add_subcommand("train", "train a model from a manifest");
  c->add_option("--config", f.config, "JSON config file");
  c->add_option("--manifest", f.manifest, "JSONL manifest")->required();
  c->add_option("--out", f.out, "output directory")->required();
  c->add_option("--lr", f.lr, "Adam learning rate");
  c->add_option("--batch-size", f.batch_size, "minibatch size (even, half positives)");
  c->add_option("--val-every", f.val_every, "steps between validations");
  c->add_option("--max-steps", f.max_steps, "training steps");
  c->add_option("--dropout", f.dropout, "dropout rate after layer 4");
  c->add_option("--transfer-store", f.transfer_store, "ANW1 weights to transfer from");
  c->add_option("--load-first-k", f.load_first_k, "layers initialized from the store");
  c->add_option("--freeze-first-k", f.freeze_first_k, "layers frozen after transfer");
  c->add_option("--seed", f.seed, "random seed");
  c->add_option("--augment", f.augment, "enable augmentation (true|false)");
  c->add_option("--layer4-filters", f.layer4_filters, "filters in layer 4");
}

int run_train(const TrainFlags& f) {
  TrainConfig cfg = config_from_file(f.config);
  if (f.lr) cfg.lr = *f.lr;
  if (f.batch_size) {
    if (*f.batch_size < 2 || *f.batch_size % 2 != 0) {
      throw ConfigError("--batch-size must be an even number >= 2");
    }
    cfg.per_class = *f.batch_size / 2;
  }
  if (f.val_every) cfg.val_every = *f.val_every;
  if (f.max_steps) cfg.max_steps = *f.max_steps;
  if (f.dropout) cfg.dropout = *f.dropout;
  if (f.transfer_store) cfg.transfer_store = *f.transfer_store;
  if (f.load_first_k) cfg.load_first_k = *f.load_first_k;
  if (f.freeze_first_k) cfg.freeze_first_k = *f.freeze_first_k;
  if (f.seed) cfg.seed = *f.seed;
  if (f.augment) cfg.augment.enabled = *f.augment;
  if (f.layer4_filters) cfg.model = ModelConfig::standard(*f.layer4_filters, cfg.dropout);
  apply_seed_env(cfg);
  cfg.validate(cfg.transfer_store.has_value());
  std::cerr << json{{"effective_config", cfg}}.dump() << std::endl;

  ManifestStats stats;
  const auto entries = load_manifest(f.manifest, &stats);
  const auto result = run_training(cfg, entries, TrainOutputs{f.out, &std::cout});
  print({{"done", true},
         {"steps", result.state.step},
         {"best_val_auc", result.state.best_val_auc ? json(*result.state.best_val_auc) : json()},
         {"best_step", result.state.best_step},
         {"checkpoint", result.state.best_checkpoint}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string out;
  std::optional<std::string> compare;
  ScoringFlags scoring;
};

void add_eval(CLI::App& root, EvalFlags& f) {
  auto* c = root.add_subcommand("eval", "score a manifest split and compute AU-ROC");
  c->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  c->add_option("--manifest", f.manifest, "JSONL manifest")->required();
  c->add_option("--split", f.split, "train|val|test");
  c->add_option("--out", f.out, "output directory")->required();
  c->add_option("--compare", f.compare, "second checkpoint for a paired DeLong test");
  f.scoring.attach(c, "per-utterance");
}

void write_scores(const std::string& path, const ScoreReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& s : report.clips) {
    out << json{{"source", s.source},
                {"start_s", s.start_s},
                {"p_anger", s.p_anger},
                {"label", s.label == BinaryLabel::kPositive ? 1 : 0}}
               .dump()
        << '\n';
  }
}

ScoreReport score_checkpoint(const std::string& path, std::span<const ManifestEntry> entries,
                             const ScoringOptions& opt) {
  auto ckpt = load_checkpoint(path);
  auto report = score_dataset(ckpt.net, entries, opt);
  for (const auto& [file, reason] : report.failures) {
    std::cerr << json{{"warning", "unreadable entry"}, {"path", file}, {"reason", reason}}.dump()
              << std::endl;
  }
  for (const auto& file : report.skipped) {
    std::cerr << json{{"warning", "no scoreable windows"}, {"path", file}}.dump() << std::endl;
  }
  return report;
}

int run_eval(const EvalFlags& f) {
  const auto split = parse_split(f.split);
  if (!split) throw ConfigError("--split must be train, val or test");
  const auto opt = f.scoring.resolve();
  const auto entries = filter_split(load_manifest(f.manifest), *split);
  if (entries.empty()) throw DataError("split '" + f.split + "' has no labelled entries");
  fs::create_directories(f.out);

  const auto report = score_checkpoint(f.checkpoint, entries, opt);
  write_scores((fs::path(f.out) / "scores.jsonl").string(), report);
  const auto [scores, labels] = scores_and_labels(report.clips);
  const auto curve = roc_auc(scores, labels);
  emit_roc(curve, (fs::path(f.out) / "roc").string());
  json summary{{"auc", curve.auc},
               {"n_pos", curve.positives},
               {"n_neg", curve.negatives},
               {"windows", report.clips.size()},
               {"failures", report.failures.size()},
               {"skipped", report.skipped.size()}};

  if (f.compare) {
    const auto other = score_checkpoint(*f.compare, entries, opt);
    write_scores((fs::path(f.out) / "scores_compare.jsonl").string(), other);
    const auto [scores_b, labels_b] = scores_and_labels(other.clips);
    if (labels_b != labels) {
      throw DataError("compared checkpoints scored different window sets");
    }
    const auto cmp = delong_compare(scores, scores_b, labels);
    const auto report_json = comparison_report(cmp);
    std::ofstream((fs::path(f.out) / "comparison.json").string()) << report_json.dump(2) << '\n';
    summary["comparison"] = report_json;
  }
  print(summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictFlags {
  std::string checkpoint;
  std::string file;
  ScoringFlags scoring;
};

void add_predict(CLI::App& root, PredictFlags& f) {
  auto* c = root.add_subcommand("predict", "per-window anger probabilities for one file");
  c->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  c->add_option("file", f.file, "WAV file")->required();
  f.scoring.attach(c, "per-utterance");
}

int run_predict(const PredictFlags& f) {
  const auto opt = f.scoring.resolve();
  auto ckpt = load_checkpoint(f.checkpoint);
  const auto clip = resample(read_wav_file(f.file));
  const auto windows = score_audio(ckpt.net, clip, opt);
  if (windows.empty()) {
    throw DataError("no scoreable windows in '" + f.file + "' (" +
                    std::to_string(clip.duration_s()) + " s)");
  }
  double best = 0.0;
  for (const auto& w : windows) {
    print({{"start_s", w.start_s}, {"p_anger", w.p_anger}});
    best = std::max(best, w.p_anger);
  }
  print({{"max_p_anger", best}, {"windows", windows.size()}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stream

struct StreamFlags {
  std::string checkpoint;
  std::optional<std::string> config;
  std::size_t queue = 64;
  std::size_t chunk = 1600;
};

void add_stream(CLI::App& root, StreamFlags& f) {
  auto* c = root.add_subcommand("stream", "score raw PCM16 LE 16 kHz mono from stdin");
  c->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  c->add_option("--config", f.config, "JSON config (windows, level)");
  c->add_option("--queue", f.queue, "reader-to-scorer queue capacity in chunks");
  c->add_option("--chunk", f.chunk, "samples per read")->check(CLI::PositiveNumber);
}

int run_stream(const StreamFlags& f) {
  const auto cfg = config_from_file(f.config);
  auto ckpt = load_checkpoint(f.checkpoint);
  StreamWindower windower(cfg.windows, kModelSampleRate);
  BoundedQueue<std::vector<float>> queue(f.queue);

  std::thread reader([&] {
    Pcm16Decoder decoder;
    std::vector<std::uint8_t> buf(f.chunk * 2);
    while (true) {
      const std::size_t n = std::fread(buf.data(), 1, buf.size(), stdin);
      if (n == 0) break;
      if (!queue.push(decoder.decode(std::span(buf.data(), n)))) break;
    }
    queue.close();
  });

  auto emit = [&](const StreamWindow& w) {
    const double p = score_window(ckpt.net, w.samples, cfg.level);
    std::cout << json{{"t_end_s", w.t_end_s}, {"p_anger", p}}.dump() << std::endl;
  };
  try {
    while (auto chunk = queue.pop()) {
      windower.push(*chunk);
      while (auto w = windower.next()) emit(*w);
    }
    if (auto w = windower.flush()) emit(*w);
  } catch (...) {
    queue.close();
    reader.join();
    throw;
  }
  reader.join();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// manifest

struct ManifestFlags {
  std::string root;
  std::string out;
  std::string dataset = "corpus";
  std::optional<std::string> split;
  std::string synth_out;
  std::uint64_t seed = 0;
  std::size_t train_per_class = 50;
  std::size_t val_per_class = 20;
  std::size_t test_per_class = 0;
};

void add_manifest(CLI::App& root, ManifestFlags& f) {
  auto* c = root.add_subcommand("manifest", "build manifests or a synthetic corpus");
  c->require_subcommand(1);
  auto* b = c->add_subcommand("build", "scan <root>/<emotion_tag>/*.wav");
  b->add_option("--root", f.root, "corpus root")->required();
  b->add_option("--out", f.out, "manifest path")->required();
  b->add_option("--dataset", f.dataset, "dataset name");
  b->add_option("--split", f.split, "fixed split (default: by session, else train)");
  auto* s = c->add_subcommand("synth", "generate the synthetic corpus");
  s->add_option("--out", f.synth_out, "output directory")->required();
  s->add_option("--seed", f.seed, "generator seed");
  s->add_option("--train-per-class", f.train_per_class, "train clips per class");
  s->add_option("--val-per-class", f.val_per_class, "validation clips per class");
  s->add_option("--test-per-class", f.test_per_class, "test clips per class");
}

int run_manifest(CLI::App& app, const ManifestFlags& f) {
  if (app.got_subcommand("build")) {
    Split split = Split::kTrain;
    if (f.split) {
      const auto s = parse_split(*f.split);
      if (!s) throw ConfigError("--split must be train, val or test");
      split = *s;
    }
    auto entries = build_manifest_from_directory(f.root, f.dataset, split);
    if (!f.split) assign_session_splits(entries);
    write_manifest(f.out, entries);
    print({{"entries", entries.size()}, {"manifest", f.out}});
    return kExitOk;
  }
  SynthSpec spec;
  spec.seed = f.seed;
  spec.train_positive = spec.train_negative = f.train_per_class;
  spec.val_positive = spec.val_negative = f.val_per_class;
  spec.test_positive = spec.test_negative = f.test_per_class;
  const auto entries = generate_synthetic_dataset(spec, f.synth_out);
  print({{"entries", entries.size()},
         {"manifest", (fs::path(f.synth_out) / "manifest.jsonl").string()}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// weights

struct WeightsFlags {
  std::string file;
};

void add_weights(CLI::App& root, WeightsFlags& f) {
  auto* c = root.add_subcommand("weights", "inspect ANW1 weight files");
  c->require_subcommand(1);
  auto* i = c->add_subcommand("inspect", "list tensors and count trainable parameters");
  i->add_option("file", f.file, "ANW1 file")->required();
}

bool is_trainable(const std::string& name) {
  if (name.rfind("optim.", 0) == 0) return false;
  for (const char* suffix : {".weight", ".bias", ".gamma", ".beta"}) {
    const std::string s(suffix);
    if (name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return true;
    }
  }
  return false;
}

int run_weights(const WeightsFlags& f) {
  const auto file = read_anw_file(f.file);
  std::size_t total = 0;
  for (const auto& t : file.store.tensors()) {
    const bool trainable = is_trainable(t.name);
    if (trainable) total += t.data.size();
    print({{"name", t.name}, {"shape", t.dims}, {"trainable", trainable}});
  }
  print({{"tensors", file.store.tensors().size()}, {"parameters", total}});
  return kExitOk;
}

int main(int argc, char** argv) {
  CLI::App app{"angernet: anger detection from raw speech audio"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for every command");

  TrainFlags train;
  EvalFlags eval;
  PredictFlags predict;
  StreamFlags stream;
  ManifestFlags manifest;
  WeightsFlags weights;
  add_train(app, train);
  add_eval(app, eval);
  add_predict(app, predict);
  add_stream(app, stream);
  add_manifest(app, manifest);
  add_weights(app, weights);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  try {
    if (app.got_subcommand("train")) return run_train(train);
    if (app.got_subcommand("eval")) return run_eval(eval);
    if (app.got_subcommand("predict")) return run_predict(predict);
    if (app.got_subcommand("stream")) return run_stream(stream);
    if (app.got_subcommand("manifest")) return run_manifest(*app.get_subcommand("manifest"), manifest);
    if (app.got_subcommand("weights")) return run_weights(weights);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), kExitData);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitData);
  }
  return kExitUsage;
}

}  // namespace angernet::cli

int main(int argc, char** argv) {
  angernet::tune_allocator();
  return angernet::cli::main(argc, argv);
}
