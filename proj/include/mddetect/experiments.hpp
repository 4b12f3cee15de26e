// Copyright 2026 The mddetect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MDDETECT_EXPERIMENTS_HPP_
#define MDDETECT_EXPERIMENTS_HPP_

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mddetect/augment.hpp"
#include "mddetect/dataset.hpp"
#include "mddetect/dsp.hpp"
#include "mddetect/error.hpp"
#include "mddetect/metrics.hpp"
#include "mddetect/model.hpp"
#include "mddetect/rng.hpp"

namespace mdd::experiments {

namespace fs = std::filesystem;

inline const char* display_name(augment::Kind kind) {
  switch (kind) {
    case augment::Kind::kNone: return "Baseline";
    case augment::Kind::kTempo: return "Tempo Stretch";
    case augment::Kind::kPitch: return "Pitch Shift";
    case augment::Kind::kPitchTempo: return "Pitch Shift + Tempo Stretch";
  }
  return "unknown";
}

struct ExperimentConfig {
  std::optional<fs::path> corpus_root;
  std::optional<std::size_t> synthetic_per_class;
  std::uint64_t seed = 0;  // mandatory; never defaulted from the clock
  fs::path out_dir;
  dsp::MelConfig mel;
  int image_size = dsp::kImageSize;
  model::TrainConfig train;
  bool train_seed_overridden = false;
  std::optional<std::size_t> per_class;  // balance target; default min class
  std::vector<augment::Kind> order = {
      augment::Kind::kNone, augment::Kind::kTempo, augment::Kind::kPitch,
      augment::Kind::kPitchTempo};
  bool reset_optimizer = false;
  bool verbose = true;

  void validate() const {
    if (corpus_root.has_value() == synthetic_per_class.has_value()) {
      throw Error(ErrorKind::kBadConfig,
                  "exactly one of corpus root / synthetic count is required");
    }
  }
};

// Per-stage seeds. Changing the training seed alone never perturbs
// augmentation draws, and vice versa.
struct StageSeeds {
  std::uint64_t synth, balance, augment, split, train;

  explicit StageSeeds(const ExperimentConfig& cfg)
      : synth(derive_seed(cfg.seed, "stage.synth")),
        balance(derive_seed(cfg.seed, "stage.balance")),
        augment(derive_seed(cfg.seed, "stage.augment")),
        split(derive_seed(cfg.seed, "stage.split")),
        train(cfg.train_seed_overridden ? cfg.train.seed
                                        : derive_seed(cfg.seed, "stage.train")) {}
};

// ---------------------------------------------------------------------------
// Featurization with an on-disk cache keyed by (file content hash, mel
// config, image size). Cache entries are MELS blobs, so a hit skips decode
// and STFT but replays the identical render path.
// ---------------------------------------------------------------------------

inline std::uint64_t feature_cache_key(const std::vector<unsigned char>& bytes,
                                       const dsp::MelConfig& mel,
                                       int image_size) {
  std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  const auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
  mix(static_cast<std::uint64_t>(mel.n_fft));
  mix(static_cast<std::uint64_t>(mel.hop));
  mix(static_cast<std::uint64_t>(mel.n_mels));
  std::uint64_t bits;
  static_assert(sizeof(double) == 8);
  std::memcpy(&bits, &mel.fmin, 8);
  mix(bits);
  std::memcpy(&bits, &mel.fmax, 8);
  mix(bits);
  std::memcpy(&bits, &mel.top_db, 8);
  mix(bits);
  mix(static_cast<std::uint64_t>(image_size));
  return h;
}

// Grayscale features for every manifest entry, in manifest order.
inline model::FeatureSet featurize(const dataset::Manifest& manifest,
                                   const dsp::MelConfig& mel, int image_size,
                                   const fs::path& cache_dir) {
  fs::create_directories(cache_dir);
  const std::size_t n = manifest.entries.size();
  model::FeatureSet set;
  set.height = image_size;
  set.width = image_size;
  set.gray.resize(n);
  set.labels.resize(n);

  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n); ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    const auto& entry = manifest.entries[i];
    try {
      const auto bytes = audio::read_file_bytes(manifest.resolve(entry));
      const std::uint64_t key = feature_cache_key(bytes, mel, image_size);
      char name[32];
      std::snprintf(name, sizeof(name), "%016llx.mels",
                    static_cast<unsigned long long>(key));
      const fs::path cached = cache_dir / name;

      dsp::MelSpectrogram spectrogram;
      if (fs::exists(cached)) {
        spectrogram = dsp::read_mels(cached);
      } else {
        const auto clip = audio::canonicalize(audio::decode_wav(bytes, entry.path));
        spectrogram = dsp::mel_spectrogram(clip, mel);
        const fs::path tmp = cache_dir / (std::string(name) + ".tmp");
        dsp::write_mels(spectrogram, tmp);
        fs::rename(tmp, cached);
      }
      set.gray[i] = dsp::render_gray(spectrogram, image_size, image_size);
      set.labels[i] = entry.label;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorKind::kIoFailure, "featurizing " +
                                             manifest.entries[i].path + ": " +
                                             errors[i]);
    }
  }
  return set;
}

// Selects the rows of `features` belonging to `part`, matching by path.
inline model::FeatureSet select_features(const model::FeatureSet& features,
                                         const dataset::Manifest& all,
                                         const dataset::Manifest& part) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < all.entries.size(); ++i) {
    index[all.entries[i].path] = i;
  }
  model::FeatureSet out;
  out.height = features.height;
  out.width = features.width;
  for (const auto& e : part.entries) {
    const auto it = index.find(e.path);
    if (it == index.end()) {
      throw Error(ErrorKind::kBadConfig, "split entry missing features: " + e.path);
    }
    out.gray.push_back(features.gray[it->second]);
    out.labels.push_back(features.labels[it->second]);
  }
  return out;
}

struct VariantRun {
  augment::Kind kind = augment::Kind::kNone;
  dataset::DatasetSplit split;
  model::FeatureSet train_features;
  model::FeatureSet val_features;
  model::FeatureSet test_features;
  model::Checkpoint checkpoint;
  metrics::MetricsReport report;
};

// The single-variant pipeline: materialize the variant, featurize, split,
// train, evaluate on the variant's own test split.
inline VariantRun run_single(const ExperimentConfig& cfg, augment::Kind kind,
                             const dataset::Manifest& base) {
  const StageSeeds seeds(cfg);
  const std::string kind_name = augment::to_string(kind);
  if (cfg.verbose) {
    std::cerr << "[" << display_name(kind) << "] building variant...\n";
  }

  augment::AugmentSpec spec;
  spec.kind = kind;
  spec.seed = seeds.augment;
  const auto variant =
      augment::build_variant(base, spec, cfg.out_dir / "variants" / kind_name);

  if (cfg.verbose) {
    std::cerr << "[" << display_name(kind) << "] featurizing "
              << variant.manifest.size() << " clips...\n";
  }
  const auto features = featurize(variant.manifest, cfg.mel, cfg.image_size,
                                  cfg.out_dir / "cache");

  VariantRun run;
  run.kind = kind;
  run.split = dataset::split(variant.manifest, seeds.split);
  dataset::write_split(run.split, cfg.out_dir / "splits" / kind_name);
  run.train_features = select_features(features, variant.manifest, run.split.train);
  run.val_features = select_features(features, variant.manifest, run.split.val);
  run.test_features = select_features(features, variant.manifest, run.split.test);

  model::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seeds.train, kind_name);
  if (cfg.verbose) {
    std::cerr << "[" << display_name(kind) << "] training " << tc.epochs
              << " epochs on " << run.train_features.size() << " images...\n";
  }
  run.checkpoint = model::train(tc, run.train_features, run.val_features);
  fs::create_directories(cfg.out_dir / "models");
  model::save_checkpoint(run.checkpoint,
                         cfg.out_dir / "models" / (kind_name + ".mgck"));

  const auto test_eval = model::evaluate(run.checkpoint.params, run.test_features);
  const auto cm = metrics::confusion(test_eval.predictions, run.test_features.labels);
  run.report = metrics::compute_metrics(cm, display_name(kind));
  if (cfg.verbose) {
    std::cerr << "[" << display_name(kind) << "] test accuracy "
              << run.report.accuracy << "\n";
  }
  return run;
}

// One model trained sequentially across the variants (optimizer state carried
// unless reset_optimizer), evaluated on the pooled test sets.
inline metrics::MetricsReport run_continuous(const ExperimentConfig& cfg,
                                             const std::vector<VariantRun>& runs) {
  const StageSeeds seeds(cfg);
  model::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seeds.train, "continuous");

  auto params = model::init_model<float>(tc.seed);
  auto adam = model::make_adam<float>(tc.lr);

  for (const augment::Kind kind : cfg.order) {
    const VariantRun* run = nullptr;
    for (const auto& r : runs) {
      if (r.kind == kind) run = &r;
    }
    if (run == nullptr) {
      throw Error(ErrorKind::kBadConfig,
                  std::string("continuous stage not materialized: ") +
                      augment::to_string(kind));
    }
    if (cfg.reset_optimizer) {
      adam = model::make_adam<float>(tc.lr);
    }
    if (cfg.verbose) {
      std::cerr << "[Continuous Learning] stage " << display_name(kind) << "\n";
    }
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      model::train_one_epoch(
          params, adam, tc, run->train_features,
          derive_seed(tc.seed, std::string("continuous.") +
                                   augment::to_string(kind),
                      static_cast<std::uint64_t>(epoch)));
    }
  }

  model::FeatureSet pooled;
  pooled.height = cfg.image_size;
  pooled.width = cfg.image_size;
  for (const auto& r : runs) {
    pooled.gray.insert(pooled.gray.end(), r.test_features.gray.begin(),
                       r.test_features.gray.end());
    pooled.labels.insert(pooled.labels.end(), r.test_features.labels.begin(),
                         r.test_features.labels.end());
  }
  const auto eval = model::evaluate(params, pooled);
  const auto cm = metrics::confusion(eval.predictions, pooled.labels);
  return metrics::compute_metrics(cm, "Continuous Learning");
}

// Scan or synthesize the corpus, then balance classes.
inline dataset::Manifest materialize_corpus(const ExperimentConfig& cfg) {
  cfg.validate();
  const StageSeeds seeds(cfg);
  dataset::Manifest base;
  if (cfg.synthetic_per_class) {
    base = dataset::synth_corpus(*cfg.synthetic_per_class, seeds.synth,
                                 cfg.out_dir / "corpus");
  } else {
    base = dataset::scan_corpus(*cfg.corpus_root);
  }
  const std::size_t per_class =
      cfg.per_class.value_or(std::min(base.count_label(dsp::Label::kHuman),
                                      base.count_label(dsp::Label::kDeepfake)));
  return dataset::balance(base, per_class, seeds.balance);
}

// All five experiments; writes results.csv (one row per experiment, in
// execution order) and returns the reports.
inline std::vector<metrics::MetricsReport> run_all(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const dataset::Manifest base = materialize_corpus(cfg);

  std::vector<VariantRun> runs;
  std::vector<metrics::MetricsReport> reports;
  for (const augment::Kind kind :
       {augment::Kind::kNone, augment::Kind::kTempo, augment::Kind::kPitch,
        augment::Kind::kPitchTempo}) {
    runs.push_back(run_single(cfg, kind, base));
    reports.push_back(runs.back().report);
  }
  reports.push_back(run_continuous(cfg, runs));

  std::ofstream os(cfg.out_dir / "results.csv",
                   std::ios::binary | std::ios::trunc);
  if (!os) {
    throw Error(ErrorKind::kIoFailure, "cannot write results.csv");
  }
  os << metrics::to_csv(reports);
  return reports;
}

}  // namespace mdd::experiments

#endif  // MDDETECT_EXPERIMENTS_HPP_
