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
// End-to-end miniature: synthesize a tiny corpus, train briefly, and print
// the test metrics row.

#include <filesystem>
#include <iostream>

#include "mddetect/mddetect.hpp"

int main() {
  namespace fs = std::filesystem;
  using namespace mdd;

  const fs::path out = fs::temp_directory_path() / "mddetect_sample";
  fs::remove_all(out);

  experiments::ExperimentConfig cfg;
  cfg.synthetic_per_class = 24;
  cfg.seed = 7;
  cfg.out_dir = out;
  cfg.train.epochs = 2;
  cfg.verbose = false;

  try {
    const auto base = experiments::materialize_corpus(cfg);
    const auto run = experiments::run_single(cfg, augment::Kind::kNone, base);
    std::cout << metrics::render_table({run.report});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
