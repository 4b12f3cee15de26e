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
// Test-only oracles. Everything here is independent of the library paths it
// is used to check: the DFT is the quadratic definition, peak detection runs
// its own windowed transform, and the frame counter literally enumerates
// frame positions.

#ifndef MDDETECT_TESTS_ORACLES_HPP_
#define MDDETECT_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// O(n^2) DFT straight from the definition.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * kPi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<float> sine(double freq_hz, int sample_rate,
                               std::size_t n_samples, double amplitude = 0.5) {
  std::vector<float> x(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    x[i] = static_cast<float>(
        amplitude * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) /
                             sample_rate));
  }
  return x;
}

// Dominant frequency of a signal, measured on a Hann-windowed slice from the
// interior. The resolution (one bin) is sample_rate / fft_size.
inline double fft_peak_hz(const std::vector<float>& x, int sample_rate,
                          std::size_t fft_size = 16384) {
  std::size_t n = fft_size;
  while (n > x.size()) n /= 2;
  const std::size_t start = (x.size() - n) / 2;

  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w =
        n > 1 ? 0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1)) : 1.0;
    buf[i] = w * static_cast<double>(x[start + i]);
  }
  // recursive radix-2, written independently of the library FFT
  const std::function<void(std::vector<std::complex<double>>&)> fft =
      [&fft](std::vector<std::complex<double>>& a) {
        const std::size_t m = a.size();
        if (m == 1) return;
        std::vector<std::complex<double>> even(m / 2), odd(m / 2);
        for (std::size_t i = 0; i < m / 2; ++i) {
          even[i] = a[2 * i];
          odd[i] = a[2 * i + 1];
        }
        fft(even);
        fft(odd);
        for (std::size_t k = 0; k < m / 2; ++k) {
          const double ang = -2.0 * kPi * static_cast<double>(k) /
                             static_cast<double>(m);
          const auto t = std::polar(1.0, ang) * odd[k];
          a[k] = even[k] + t;
          a[k + m / 2] = even[k] - t;
        }
      };
  fft(buf);

  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double mag = std::abs(buf[k]);
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  return static_cast<double>(best) * sample_rate / static_cast<double>(n);
}

inline double fft_bin_hz(int sample_rate, std::size_t fft_size = 16384) {
  return static_cast<double>(sample_rate) / static_cast<double>(fft_size);
}

// Counts centered frames by walking the positions.
inline int enumerate_frames(std::size_t n_samples, int hop) {
  int frames = 0;
  for (std::size_t center = 0; center <= n_samples;
       center += static_cast<std::size_t>(hop)) {
    ++frames;
  }
  return frames;
}

// Canonical PCM16 WAV size: 44-byte header + payload.
inline std::size_t wav_file_size(std::size_t frames, std::size_t channels) {
  return 44 + 2 * frames * channels;
}

inline std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Pearson correlation over the common prefix, edges trimmed.
inline double correlation(const std::vector<float>& a,
                          const std::vector<float>& b, std::size_t trim = 0) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n <= 2 * trim + 1) return 0.0;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  const auto count = static_cast<double>(n - 2 * trim);
  for (std::size_t i = trim; i < n - trim; ++i) {
    sa += a[i];
    sb += b[i];
    saa += static_cast<double>(a[i]) * a[i];
    sbb += static_cast<double>(b[i]) * b[i];
    sab += static_cast<double>(a[i]) * b[i];
  }
  const double cov = sab - sa * sb / count;
  const double va = saa - sa * sa / count;
  const double vb = sbb - sb * sb / count;
  if (va <= 0 || vb <= 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace oracle

#endif  // MDDETECT_TESTS_ORACLES_HPP_
