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
//
// Command-line front end for the detection pipeline.
//
//   scan          inventory a corpus tree into a manifest CSV
//   synth         generate the synthetic desk-scale corpus
//   augment       materialize one augmented dataset variant
//   featurize     precompute mel features into the cache
//   train         split + featurize + train one model
//   eval          evaluate a checkpoint on a manifest
//   experiment    run all five experiments and write results.csv
//   verify-table1 audit the published results table's internal identities
//
// Exit codes: 0 success, 1 stage error, 2 usage error.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mddetect/config.hpp"
#include "mddetect/mddetect.hpp"

namespace fs = std::filesystem;
using namespace mdd;

namespace {

struct Options {
  std::uint64_t seed = 0;
  bool seed_set = false;
  fs::path out = ".";
  fs::path config_path;

  fs::path corpus;
  fs::path manifest;
  fs::path checkpoint;
  std::size_t synthetic = 0;
  bool synthetic_set = false;
  std::size_t per_class = 0;
  bool per_class_set = false;
  std::size_t n = 0;

  std::string kind = "none";
  std::string order = "none,tempo,pitch,pitch_tempo";
  std::string name = "Evaluation";
  bool reset_optimizer = false;

  int epochs = 20;
  int batch_size = 32;
  double lr = 1e-4;
  bool train_seed_set = false;
  std::uint64_t train_seed = 0;

  dsp::MelConfig mel;
  int image_size = dsp::kImageSize;
};

void apply_config_value(Options& o, const std::string& key,
                        const std::string& value) {
  const auto as_u64 = [&value] { return std::stoull(value); };
  const auto as_int = [&value] { return std::stoi(value); };
  const auto as_double = [&value] { return std::stod(value); };
  if (key == "seed") {
    o.seed = as_u64();
    o.seed_set = true;
  } else if (key == "out") {
    o.out = value;
  } else if (key == "corpus") {
    o.corpus = value;
  } else if (key == "manifest") {
    o.manifest = value;
  } else if (key == "checkpoint") {
    o.checkpoint = value;
  } else if (key == "synthetic") {
    o.synthetic = as_u64();
    o.synthetic_set = true;
  } else if (key == "per_class") {
    o.per_class = as_u64();
    o.per_class_set = true;
  } else if (key == "n") {
    o.n = as_u64();
  } else if (key == "kind") {
    o.kind = value;
  } else if (key == "order") {
    o.order = value;
  } else if (key == "name") {
    o.name = value;
  } else if (key == "reset_optimizer") {
    o.reset_optimizer = value == "true" || value == "1";
  } else if (key == "epochs") {
    o.epochs = as_int();
  } else if (key == "batch_size") {
    o.batch_size = as_int();
  } else if (key == "lr") {
    o.lr = as_double();
  } else if (key == "n_fft") {
    o.mel.n_fft = as_int();
  } else if (key == "hop") {
    o.mel.hop = as_int();
  } else if (key == "n_mels") {
    o.mel.n_mels = as_int();
  } else if (key == "fmin") {
    o.mel.fmin = as_double();
  } else if (key == "fmax") {
    o.mel.fmax = as_double();
  } else if (key == "top_db") {
    o.mel.top_db = as_double();
  } else if (key == "image_size") {
    o.image_size = as_int();
  }
}

std::vector<augment::Kind> parse_order(const std::string& text) {
  std::vector<augment::Kind> kinds;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    const auto kind = augment::kind_from_string(config::trim(token));
    if (!kind) {
      throw Error(ErrorKind::kBadConfig, "unknown variant kind '" + token + "'");
    }
    kinds.push_back(*kind);
  }
  if (kinds.empty()) {
    throw Error(ErrorKind::kBadConfig, "empty --order");
  }
  return kinds;
}

void require_seed(const Options& o) {
  if (!o.seed_set) {
    throw Error(ErrorKind::kBadConfig,
                "--seed is required (runs are never seeded from the clock)");
  }
}

experiments::ExperimentConfig to_experiment_config(const Options& o) {
  require_seed(o);
  experiments::ExperimentConfig cfg;
  if (o.synthetic_set) cfg.synthetic_per_class = o.synthetic;
  if (!o.corpus.empty()) cfg.corpus_root = o.corpus;
  cfg.seed = o.seed;
  cfg.out_dir = o.out;
  cfg.mel = o.mel;
  cfg.image_size = o.image_size;
  cfg.train.epochs = o.epochs;
  cfg.train.batch_size = o.batch_size;
  cfg.train.lr = o.lr;
  if (o.train_seed_set) {
    cfg.train.seed = o.train_seed;
    cfg.train_seed_overridden = true;
  }
  if (o.per_class_set) cfg.per_class = o.per_class;
  cfg.order = parse_order(o.order);
  cfg.reset_optimizer = o.reset_optimizer;
  return cfg;
}

int cmd_scan(const Options& o) {
  const auto manifest = dataset::scan_corpus(o.corpus);
  fs::create_directories(o.out);
  dataset::write_manifest(manifest, o.out / "manifest.csv");
  std::cout << "scanned " << manifest.size() << " clips ("
            << manifest.count_label(dsp::Label::kHuman) << " human, "
            << manifest.count_label(dsp::Label::kDeepfake) << " deepfake) -> "
            << (o.out / "manifest.csv").string() << "\n";
  return 0;
}

int cmd_synth(const Options& o) {
  require_seed(o);
  if (o.n == 0) {
    throw Error(ErrorKind::kBadConfig, "synth needs --n clips per class");
  }
  const auto manifest = dataset::synth_corpus(o.n, o.seed, o.out);
  std::cout << "wrote " << manifest.size() << " clips under " << o.out.string()
            << "\n";
  return 0;
}

int cmd_augment(const Options& o) {
  require_seed(o);
  const auto kind = augment::kind_from_string(o.kind);
  if (!kind) {
    throw Error(ErrorKind::kBadConfig, "unknown --kind '" + o.kind + "'");
  }
  const auto manifest = dataset::read_manifest(o.manifest);
  augment::AugmentSpec spec;
  spec.kind = *kind;
  spec.seed = o.seed;
  const auto result = augment::build_variant(manifest, spec, o.out);
  dataset::write_manifest(result.manifest, o.out / "manifest.csv");
  std::cout << "variant '" << o.kind << "': " << result.manifest.size()
            << " clips written, " << result.dropped << " dropped\n";
  return 0;
}

int cmd_featurize(const Options& o) {
  const auto manifest = dataset::read_manifest(o.manifest);
  const fs::path cache = o.out / "cache";
  const auto features =
      experiments::featurize(manifest, o.mel, o.image_size, cache);
  std::ofstream index(o.out / "features_index.csv");
  index << "path,label\n";
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    index << manifest.entries[i].path << ','
          << dsp::to_string(features.labels[i]) << '\n';
  }
  std::cout << "featurized " << features.size() << " clips into "
            << cache.string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  require_seed(o);
  const auto manifest = dataset::read_manifest(o.manifest);
  const auto split = dataset::split(manifest, derive_seed(o.seed, "stage.split"));
  fs::create_directories(o.out);
  dataset::write_split(split, o.out / "split");

  const auto features =
      experiments::featurize(manifest, o.mel, o.image_size, o.out / "cache");
  const auto train_set =
      experiments::select_features(features, manifest, split.train);
  const auto val_set = experiments::select_features(features, manifest, split.val);

  model::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.lr = o.lr;
  tc.seed = o.train_seed_set ? o.train_seed : derive_seed(o.seed, "stage.train");
  const auto ckpt = model::train(tc, train_set, val_set);
  model::save_checkpoint(ckpt, o.out / "model.mgck");
  std::cout << "best val accuracy " << ckpt.best_val_accuracy << " at epoch "
            << ckpt.best_epoch << "; checkpoint -> "
            << (o.out / "model.mgck").string() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto ckpt = model::load_checkpoint(o.checkpoint);
  const auto manifest = dataset::read_manifest(o.manifest);
  const auto features =
      experiments::featurize(manifest, o.mel, o.image_size, o.out / "cache");
  const auto eval = model::evaluate(ckpt.params, features);
  const auto cm = metrics::confusion(eval.predictions, features.labels);
  const auto report = metrics::compute_metrics(cm, o.name);
  std::cout << metrics::render_table({report});
  fs::create_directories(o.out);
  std::ofstream os(o.out / "eval.csv", std::ios::binary | std::ios::trunc);
  os << metrics::to_csv({report});
  return 0;
}

int cmd_experiment(const Options& o) {
  const auto cfg = to_experiment_config(o);
  const auto reports = experiments::run_all(cfg);
  std::cout << metrics::render_table(reports);
  std::cout << "results -> " << (cfg.out_dir / "results.csv").string() << "\n";
  return 0;
}

int cmd_verify_table1() {
  const auto audit = metrics::audit_reference_table();
  bool all_pass = true;
  for (const auto& row : audit) {
    std::printf("%-28s |f1-2PR/(P+R)|=%.4f  |R+FNR-1|=%.4f  |FPR+S-1|=%.4f  %s\n",
                row.source.c_str(), row.f1_error, row.recall_fnr_error,
                row.fpr_spec_error, row.pass ? "PASS" : "FAIL");
    all_pass = all_pass && row.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mddetect: mel-spectrogram music deepfake detection pipeline"};
  app.require_subcommand(0, 1);

  Options o;

  // --config values act as defaults; explicit flags override them.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      o.config_path = argv[i + 1];
    }
  }
  if (!o.config_path.empty()) {
    try {
      for (const auto& [key, value] : config::parse_config_file(o.config_path)) {
        apply_config_value(o, key, value);
      }
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }

  std::string config_dummy;
  app.add_option("--config", config_dummy, "flat key = value config file");
  app.add_option("--seed", [&o](const CLI::results_t& res) {
    o.seed = std::stoull(res[0]);
    o.seed_set = true;
    return true;
  }, "master seed (required for randomized stages)");
  app.add_option("--out", o.out, "output directory");

  auto* scan = app.add_subcommand("scan", "inventory a corpus tree");
  scan->add_option("--corpus", o.corpus, "corpus root directory")->required();

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  synth->add_option("--n", o.n, "clips per class")->required();

  auto* aug = app.add_subcommand("augment", "materialize a dataset variant");
  aug->add_option("--manifest", o.manifest, "input manifest CSV")->required();
  aug->add_option("--kind", o.kind, "none|tempo|pitch|pitch_tempo")->required();

  auto* feat = app.add_subcommand("featurize", "precompute mel features");
  feat->add_option("--manifest", o.manifest, "input manifest CSV")->required();

  auto* train = app.add_subcommand("train", "train one model on a manifest");
  train->add_option("--manifest", o.manifest, "labeled manifest CSV")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  eval->add_option("--manifest", o.manifest, "test manifest CSV")->required();
  eval->add_option("--name", o.name, "report row label");

  auto* exp = app.add_subcommand("experiment", "run all five experiments");
  exp->add_option("--corpus", o.corpus, "real corpus root");
  exp->add_option("--synthetic", [&o](const CLI::results_t& res) {
    o.synthetic = std::stoull(res[0]);
    o.synthetic_set = true;
    return true;
  }, "synthetic clips per class");
  exp->add_option("--order", o.order, "continuous-learning stage order");
  exp->add_flag("--reset-optimizer", o.reset_optimizer,
                "reset Adam state between continuous stages");
  exp->add_option("--per-class", [&o](const CLI::results_t& res) {
    o.per_class = std::stoull(res[0]);
    o.per_class_set = true;
    return true;
  }, "balance target per class");

  auto* verify = app.add_subcommand(
      "verify-table1", "audit the published table's internal identities");

  for (CLI::App* sub : {scan, synth, aug, feat, train, eval, exp}) {
    sub->add_option("--epochs", o.epochs, "");
    sub->add_option("--batch-size", o.batch_size, "");
    sub->add_option("--lr", o.lr, "");
    sub->add_option("--train-seed", [&o](const CLI::results_t& res) {
      o.train_seed = std::stoull(res[0]);
      o.train_seed_set = true;
      return true;
    }, "");
    sub->add_option("--n-fft", o.mel.n_fft, "");
    sub->add_option("--hop", o.mel.hop, "");
    sub->add_option("--n-mels", o.mel.n_mels, "");
    sub->add_option("--fmin", o.mel.fmin, "");
    sub->add_option("--fmax", o.mel.fmax, "");
    sub->add_option("--top-db", o.mel.top_db, "");
    sub->add_option("--image-size", o.image_size, "");
  }

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (scan->parsed()) return cmd_scan(o);
    if (synth->parsed()) return cmd_synth(o);
    if (aug->parsed()) return cmd_augment(o);
    if (feat->parsed()) return cmd_featurize(o);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (exp->parsed()) return cmd_experiment(o);
    if (verify->parsed()) return cmd_verify_table1();
    std::cerr << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
