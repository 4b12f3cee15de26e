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

#include "mddetect/fft.hpp"

#include <gtest/gtest.h>

#include <complex>
#include <vector>

#include "mddetect/rng.hpp"
#include "oracles.hpp"

namespace {

using mdd::Fft;

std::vector<std::complex<double>> random_signal(std::size_t n,
                                                std::uint64_t seed) {
  mdd::Rng rng(seed);
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return x;
}

TEST(Fft, MatchesNaiveDft) {
  for (const std::size_t n : {1u, 2u, 8u, 64u, 256u}) {
    auto x = random_signal(n, 1000 + n);
    const auto expected = oracle::naive_dft(x);
    Fft fft(n);
    fft.forward(x);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(std::abs(x[k] - expected[k]), 0.0, 1e-9)
          << "n=" << n << " bin=" << k;
    }
  }
}

TEST(Fft, InverseRoundtrip) {
  const std::size_t n = 512;
  const auto original = random_signal(n, 7);
  auto x = original;
  Fft fft(n);
  fft.forward(x);
  fft.inverse(x);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(std::abs(x[i] - original[i]), 0.0, 1e-12);
  }
}

TEST(Fft, RejectsNonPowerOfTwo) {
  EXPECT_THROW(Fft(0), mdd::Error);
  EXPECT_THROW(Fft(3), mdd::Error);
  EXPECT_THROW(Fft(100), mdd::Error);
}

TEST(Fft, RejectsWrongBufferSize) {
  Fft fft(8);
  std::vector<std::complex<double>> x(4);
  EXPECT_THROW(fft.forward(x), mdd::Error);
}

TEST(Fft, NextPow2) {
  EXPECT_EQ(mdd::next_pow2(1), 1u);
  EXPECT_EQ(mdd::next_pow2(2), 2u);
  EXPECT_EQ(mdd::next_pow2(3), 4u);
  EXPECT_EQ(mdd::next_pow2(160000), 262144u);
}

}  // namespace
