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
// Exercises the installed CLI binary end to end via subprocesses.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "oracles.hpp"

#ifndef MDDETECT_CLI_PATH
#error "MDDETECT_CLI_PATH must be defined by the build"
#endif

namespace {

namespace fs = std::filesystem;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MDDETECT_CLI_PATH) + " " + args + " >" +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp_text(const fs::path& p) {
  const auto bytes = oracle::slurp(p);
  return std::string(bytes.begin(), bytes.end());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mddetect_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Cli, NoArgumentsPrintsUsageAndExitsTwo) {
  const fs::path log = fresh_dir("usage") / "out.txt";
  EXPECT_EQ(run("", log), 2);
  const std::string text = slurp_text(log);
  EXPECT_NE(text.find("Usage"), std::string::npos);
  EXPECT_NE(text.find("experiment"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  const fs::path log = fresh_dir("badflag") / "out.txt";
  EXPECT_EQ(run("--frobnicate", log), 2);
}

TEST(Cli, VerifyTable1PassesAndPrintsRows) {
  const fs::path log = fresh_dir("table1") / "out.txt";
  EXPECT_EQ(run("verify-table1", log), 0);
  const std::string text = slurp_text(log);
  EXPECT_NE(text.find("Baseline"), std::string::npos);
  EXPECT_NE(text.find("Continuous Learning"), std::string::npos);
  EXPECT_NE(text.find("PASS"), std::string::npos);
  EXPECT_EQ(text.find("FAIL"), std::string::npos);
}

TEST(Cli, SynthRequiresSeed) {
  const fs::path dir = fresh_dir("noseed");
  const fs::path log = dir / "out.txt";
  EXPECT_EQ(run("--out " + dir.string() + " synth --n 2", log), 1);
  EXPECT_NE(slurp_text(log).find("seed"), std::string::npos);
}

TEST(Cli, SynthScanAugmentPipeline) {
  const fs::path dir = fresh_dir("pipeline");
  const fs::path log = dir / "out.txt";
  const fs::path corpus = dir / "corpus";
  ASSERT_EQ(run("--seed 5 --out " + corpus.string() + " synth --n 2", log), 0);
  EXPECT_TRUE(fs::exists(corpus / "manifest.csv"));
  EXPECT_TRUE(fs::exists(corpus / "synthetic_human" / "clip_00000.wav"));

  const fs::path scan_out = dir / "scan";
  ASSERT_EQ(run("--out " + scan_out.string() + " scan --corpus " +
                    corpus.string(),
                log),
            0);
  EXPECT_TRUE(fs::exists(scan_out / "manifest.csv"));

  const fs::path variant = dir / "variant";
  ASSERT_EQ(run("--seed 5 --out " + variant.string() + " augment --kind none" +
                    " --manifest " + (corpus / "manifest.csv").string(),
                log),
            0);
  EXPECT_TRUE(fs::exists(variant / "manifest.csv"));
  EXPECT_TRUE(fs::exists(variant / "augment_params.csv"));
}

TEST(Cli, ConfigFileUnknownKeyExitsTwo) {
  const fs::path dir = fresh_dir("cfgkey");
  const fs::path cfg = dir / "bad.cfg";
  {
    std::ofstream os(cfg);
    os << "not_a_key = 1\n";
  }
  const fs::path log = dir / "out.txt";
  EXPECT_EQ(run("--config " + cfg.string() + " verify-table1", log), 2);
  EXPECT_NE(slurp_text(log).find("not_a_key"), std::string::npos);
}

TEST(Cli, ConfigFileSuppliesSeed) {
  const fs::path dir = fresh_dir("cfgseed");
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream os(cfg);
    os << "seed = 11\nout = " << (dir / "corpus").string() << "\n";
  }
  const fs::path log = dir / "out.txt";
  EXPECT_EQ(run("--config " + cfg.string() + " synth --n 1", log), 0);
  EXPECT_TRUE(fs::exists(dir / "corpus" / "manifest.csv"));
}

}  // namespace
