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

#ifndef MDDETECT_FFT_HPP_
#define MDDETECT_FFT_HPP_

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "mddetect/error.hpp"

namespace mdd {

// Iterative radix-2 FFT, power-of-two sizes only. Twiddles are precomputed
// once per plan; a plan is immutable after construction and safe to share
// across threads.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0 || (n & (n - 1)) != 0) {
      throw Error(ErrorKind::kShapeMismatch,
                  "FFT size must be a power of two, got " + std::to_string(n));
    }
    twiddles_.resize(n / 2);
    const double step = -2.0 * kPi / static_cast<double>(n);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddles_[k] = std::polar(1.0, step * static_cast<double>(k));
    }
    rev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        r |= ((i >> b) & 1u) << (bits - 1 - b);
      }
      rev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  void forward(std::complex<double>* data) const { transform(data, false); }
  void inverse(std::complex<double>* data) const {
    transform(data, true);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) data[i] *= scale;
  }

  void forward(std::vector<std::complex<double>>& data) const {
    check(data.size());
    forward(data.data());
  }
  void inverse(std::vector<std::complex<double>>& data) const {
    check(data.size());
    inverse(data.data());
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  void check(std::size_t n) const {
    if (n != n_) {
      throw Error(ErrorKind::kShapeMismatch, "FFT buffer size mismatch");
    }
  }

  void transform(std::complex<double>* a, bool invert) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          std::complex<double> w = twiddles_[k * stride];
          if (invert) w = std::conj(w);
          std::complex<double>& lo = a[start + k];
          std::complex<double>& hi = a[start + k + len / 2];
          const std::complex<double> t = hi * w;
          hi = lo - t;
          lo += t;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> rev_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace mdd

#endif  // MDDETECT_FFT_HPP_
