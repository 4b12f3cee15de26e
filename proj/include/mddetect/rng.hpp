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

#ifndef MDDETECT_RNG_HPP_
#define MDDETECT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mdd {

// Every random draw in the pipeline goes through this header so that a run is
// reproducible from a single 64-bit seed. std::mt19937_64 is bit-exact across
// implementations; the distributions in <random> are not, so the mappings from
// raw engine output to uniform/normal values are spelled out here.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Stage seeds derive from the master seed and the stage name, so changing one
// stage's seed never perturbs another stage's draws.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(master ^ fnv1a64(stage));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(master, stage) ^
                    splitmix64(index * 0xD1B54A32D192ED03ULL + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; uses (0, 1] to keep the log finite.
  double normal() {
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Unbiased bounded draw in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates; fixed draw order keeps shuffles identical everywhere.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mdd

#endif  // MDDETECT_RNG_HPP_
