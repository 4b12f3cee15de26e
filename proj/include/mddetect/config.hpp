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

#ifndef MDDETECT_CONFIG_HPP_
#define MDDETECT_CONFIG_HPP_

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "mddetect/error.hpp"

namespace mdd::config {

// Keys accepted in `--config` files. Anything else is rejected by name.
inline const std::array<std::string_view, 22> kKnownKeys = {
    "seed",       "out",        "corpus",    "synthetic", "per_class",
    "epochs",     "batch_size", "lr",        "n_fft",     "hop",
    "n_mels",     "fmin",       "fmax",      "top_db",    "image_size",
    "order",      "reset_optimizer",         "kind",      "manifest",
    "checkpoint", "n",          "name"};

inline bool is_known_key(std::string_view key) {
  return std::find(kKnownKeys.begin(), kKnownKeys.end(), key) !=
         kKnownKeys.end();
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Flat `key = value` file; '#' starts a comment; blank lines ignored.
// Unknown keys are an error naming the offending key.
inline std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIoFailure, "cannot open config " + path.string());
  }
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kBadConfig,
                  "config line " + std::to_string(line_no) +
                      " is not 'key = value': " + trimmed);
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (!is_known_key(key)) {
      throw Error(ErrorKind::kBadConfig,
                  "unknown config key '" + key + "' (line " +
                      std::to_string(line_no) + ")");
    }
    values[key] = value;
  }
  return values;
}

}  // namespace mdd::config

#endif  // MDDETECT_CONFIG_HPP_
