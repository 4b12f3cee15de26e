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

#ifndef MDDETECT_DSP_HPP_
#define MDDETECT_DSP_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <vector>

#include "mddetect/audio.hpp"
#include "mddetect/error.hpp"
#include "mddetect/fft.hpp"

namespace mdd::dsp {

struct MelConfig {
  int n_fft = 2048;
  int hop = 512;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 8000.0;
  double top_db = 80.0;
};

inline void validate(const MelConfig& cfg, int sample_rate) {
  if (cfg.n_fft <= 0 || (cfg.n_fft & (cfg.n_fft - 1)) != 0) {
    throw Error(ErrorKind::kBadConfig, "n_fft must be a power of two");
  }
  if (cfg.hop <= 0 || cfg.hop > cfg.n_fft) {
    throw Error(ErrorKind::kBadConfig, "hop must satisfy 0 < hop <= n_fft");
  }
  if (cfg.n_mels < 2) {
    throw Error(ErrorKind::kBadConfig, "n_mels must be at least 2");
  }
  if (!(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax &&
        cfg.fmax <= sample_rate / 2.0)) {
    throw Error(ErrorKind::kBadConfig,
                "need 0 <= fmin < fmax <= sample_rate/2");
  }
  if (cfg.top_db <= 0.0) {
    throw Error(ErrorKind::kBadConfig, "top_db must be positive");
  }
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

// Triangular mel filters evaluated at FFT bin center frequencies. Rows are
// unnormalized with peak weight 1; row m rises over [point m, point m+1] and
// falls over [point m+1, point m+2] of the n_mels+2 point grid that is
// uniform on the mel axis.
struct FilterBank {
  int n_mels = 0;
  int n_bins = 0;
  std::vector<double> weights;          // n_mels x n_bins, row-major
  std::vector<double> centers_hz;       // peak frequency per row
  std::vector<int> support_begin;       // first nonzero bin per row
  std::vector<int> support_end;         // one past last nonzero bin per row

  double at(int mel, int bin) const {
    return weights[static_cast<std::size_t>(mel) * n_bins + bin];
  }
};

inline FilterBank mel_filterbank(const MelConfig& cfg, int sample_rate) {
  validate(cfg, sample_rate);
  const int n_bins = cfg.n_fft / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / cfg.n_fft;

  std::vector<double> points(cfg.n_mels + 2);
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    points[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto a = static_cast<long>(std::llround(points[i] / bin_hz));
    const auto b = static_cast<long>(std::llround(points[i + 1] / bin_hz));
    if (a == b) {
      throw Error(ErrorKind::kDegenerateBank,
                  "adjacent mel points land on FFT bin " + std::to_string(a) +
                      "; raise n_fft or lower n_mels");
    }
  }

  FilterBank fb;
  fb.n_mels = cfg.n_mels;
  fb.n_bins = n_bins;
  fb.weights.assign(static_cast<std::size_t>(cfg.n_mels) * n_bins, 0.0);
  fb.centers_hz.assign(cfg.n_mels, 0.0);
  fb.support_begin.assign(cfg.n_mels, n_bins);
  fb.support_end.assign(cfg.n_mels, 0);

  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = points[m];
    const double center = points[m + 1];
    const double right = points[m + 2];
    fb.centers_hz[m] = center;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f == center) {
        w = 1.0;
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      if (w > 0.0) {
        fb.weights[static_cast<std::size_t>(m) * n_bins + k] = w;
        fb.support_begin[m] = std::min(fb.support_begin[m], k);
        fb.support_end[m] = std::max(fb.support_end[m], k + 1);
      }
    }
  }
  return fb;
}

// Complex STFT grid, frames stored contiguously.
struct ComplexSpectrogram {
  int n_bins = 0;
  int n_frames = 0;
  MelConfig config;
  std::vector<std::complex<double>> values;  // n_frames x n_bins

  const std::complex<double>& at(int bin, int frame) const {
    return values[static_cast<std::size_t>(frame) * n_bins + bin];
  }
};

namespace detail {

// Symmetric Hann. The index symmetry w[n] == w[n-1-n] is what makes mel
// spectrograms of time-reversed audio exact column reversals.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / (n - 1));
  }
  return w;
}

// Reflection without edge repetition, bouncing for short signals.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto m = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t j = ((i % m) + m) % m;
  if (j >= static_cast<std::ptrdiff_t>(n)) j = m - j;
  return static_cast<std::size_t>(j);
}

}  // namespace detail

inline int stft_frame_count(std::size_t n_samples, int hop) {
  return 1 + static_cast<int>(n_samples / static_cast<std::size_t>(hop));
}

// Centered analysis: reflect-pad by n_fft/2 per side, symmetric Hann window,
// one frame every hop samples. Frame t covers input indices
// [t*hop - n_fft/2, t*hop + n_fft/2).
inline ComplexSpectrogram stft(const audio::AudioClip& clip,
                               const MelConfig& cfg) {
  if (clip.channel_count() != 1) {
    throw Error(ErrorKind::kShapeMismatch, "stft expects mono audio");
  }
  if (clip.length() == 0) {
    throw Error(ErrorKind::kShapeMismatch, "stft needs at least one sample");
  }
  validate(cfg, clip.sample_rate);

  const std::vector<float>& x = clip.channels.front();
  const std::size_t n = x.size();
  const int pad = cfg.n_fft / 2;
  const std::vector<double> window = detail::hann_window(cfg.n_fft);
  const Fft fft(static_cast<std::size_t>(cfg.n_fft));

  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.n_bins = cfg.n_fft / 2 + 1;
  spec.n_frames = stft_frame_count(n, cfg.hop);
  spec.values.resize(static_cast<std::size_t>(spec.n_frames) * spec.n_bins);

  std::vector<std::complex<double>> frame(cfg.n_fft);
  for (int t = 0; t < spec.n_frames; ++t) {
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(t) * cfg.hop - pad;
    for (int k = 0; k < cfg.n_fft; ++k) {
      const std::size_t idx = detail::reflect_index(start + k, n);
      frame[k] = window[k] * static_cast<double>(x[idx]);
    }
    fft.forward(frame);
    std::copy(frame.begin(), frame.begin() + spec.n_bins,
              spec.values.begin() + static_cast<std::size_t>(t) * spec.n_bins);
  }
  return spec;
}

// dB conversion with an amin floor, referenced to the grid maximum and
// clamped to [-top_db, 0].
inline std::vector<double> power_to_db(const std::vector<double>& power,
                                       double top_db) {
  constexpr double kAmin = 1e-10;
  std::vector<double> db(power.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < power.size(); ++i) {
    db[i] = 10.0 * std::log10(std::max(power[i], kAmin));
    peak = std::max(peak, db[i]);
  }
  for (double& v : db) {
    v = std::clamp(v - peak, -top_db, 0.0);
  }
  return db;
}

struct MelSpectrogram {
  int n_mels = 0;
  int n_frames = 0;
  MelConfig config;
  std::vector<float> values;  // n_mels x n_frames, row-major

  float at(int mel, int frame) const {
    return values[static_cast<std::size_t>(mel) * n_frames + frame];
  }
};

inline MelSpectrogram mel_spectrogram(const audio::AudioClip& clip,
                                      const MelConfig& cfg,
                                      const FilterBank& bank) {
  const ComplexSpectrogram spec = stft(clip, cfg);
  if (bank.n_bins != spec.n_bins || bank.n_mels != cfg.n_mels) {
    throw Error(ErrorKind::kShapeMismatch, "filter bank does not match config");
  }

  std::vector<double> mel_power(
      static_cast<std::size_t>(cfg.n_mels) * spec.n_frames, 0.0);
  std::vector<double> frame_power(spec.n_bins);
  for (int t = 0; t < spec.n_frames; ++t) {
    const std::complex<double>* col =
        spec.values.data() + static_cast<std::size_t>(t) * spec.n_bins;
    for (int k = 0; k < spec.n_bins; ++k) frame_power[k] = std::norm(col[k]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      for (int k = bank.support_begin[m]; k < bank.support_end[m]; ++k) {
        acc += bank.at(m, k) * frame_power[k];
      }
      mel_power[static_cast<std::size_t>(m) * spec.n_frames + t] = acc;
    }
  }

  const std::vector<double> db = power_to_db(mel_power, cfg.top_db);
  MelSpectrogram mel;
  mel.n_mels = cfg.n_mels;
  mel.n_frames = spec.n_frames;
  mel.config = cfg;
  mel.values.resize(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    mel.values[i] = static_cast<float>(db[i]);
  }
  return mel;
}

inline MelSpectrogram mel_spectrogram(const audio::AudioClip& clip,
                                      const MelConfig& cfg) {
  return mel_spectrogram(clip, cfg, mel_filterbank(cfg, clip.sample_rate));
}

enum class Label : std::uint8_t { kDeepfake = 0, kHuman = 1 };

inline const char* to_string(Label label) {
  return label == Label::kHuman ? "human" : "deepfake";
}

// Normalization constants, per channel.
inline constexpr double kNormMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kNormStd[3] = {0.229, 0.224, 0.225};

inline constexpr int kImageSize = 224;

struct SpectroImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // 3 x height x width, channel-major
  std::optional<Label> label;

  double at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Min-max scaled grayscale plane in [0, 1], bilinearly resized with the
// half-pixel convention. A constant spectrogram maps to all zeros.
inline std::vector<float> render_gray(const MelSpectrogram& mel,
                                      int height = kImageSize,
                                      int width = kImageSize) {
  const auto [mn_it, mx_it] =
      std::minmax_element(mel.values.begin(), mel.values.end());
  const float mn = *mn_it;
  const float range = *mx_it - mn;

  // divide rather than multiply by a reciprocal so the extremes land on
  // exactly 0 and 1
  std::vector<float> scaled(mel.values.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    scaled[i] = range > 0.0f ? (mel.values[i] - mn) / range : 0.0f;
  }

  const int sh = mel.n_mels;
  const int sw = mel.n_frames;
  std::vector<float> gray(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp(
        (y + 0.5) * static_cast<double>(sh) / height - 0.5, 0.0,
        static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const float fy = static_cast<float>(sy - y0);
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp(
          (x + 0.5) * static_cast<double>(sw) / width - 0.5, 0.0,
          static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const float fx = static_cast<float>(sx - x0);
      const float top = scaled[static_cast<std::size_t>(y0) * sw + x0] * (1 - fx) +
                        scaled[static_cast<std::size_t>(y0) * sw + x1] * fx;
      const float bot = scaled[static_cast<std::size_t>(y1) * sw + x0] * (1 - fx) +
                        scaled[static_cast<std::size_t>(y1) * sw + x1] * fx;
      gray[static_cast<std::size_t>(y) * width + x] = top * (1 - fy) + bot * fy;
    }
  }
  return gray;
}

inline SpectroImage normalize_gray(const std::vector<float>& gray, int height,
                                   int width) {
  SpectroImage img;
  img.height = height;
  img.width = width;
  img.pixels.resize(3 * gray.size());
  for (int c = 0; c < 3; ++c) {
    double* out = img.pixels.data() + static_cast<std::size_t>(c) * gray.size();
    for (std::size_t i = 0; i < gray.size(); ++i) {
      out[i] = (static_cast<double>(gray[i]) - kNormMean[c]) / kNormStd[c];
    }
  }
  return img;
}

inline SpectroImage render_image(const MelSpectrogram& mel,
                                 int height = kImageSize,
                                 int width = kImageSize) {
  return normalize_gray(render_gray(mel, height, width), height, width);
}

// Flat binary export: magic "MELS", u32 n_mels, u32 frames, then row-major
// 32-bit little-endian floats. Doubles as the on-disk feature cache format.
inline void write_mels(const MelSpectrogram& mel,
                       const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::kIoFailure, "cannot create " + path.string());
  os.write("MELS", 4);
  const auto put_u32 = [&os](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(mel.n_mels));
  put_u32(static_cast<std::uint32_t>(mel.n_frames));
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(mel.values.data()),
           static_cast<std::streamsize>(mel.values.size() * 4));
  if (!os) throw Error(ErrorKind::kIoFailure, "short write to " + path.string());
}

inline MelSpectrogram read_mels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MELS", 4) != 0) {
    throw Error(ErrorKind::kMalformedHeader, "bad MELS magic in " + path.string());
  }
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  if (!in) throw Error(ErrorKind::kTruncatedData, "truncated MELS header");
  MelSpectrogram mel;
  mel.n_mels = static_cast<int>(hdr[0] | (hdr[1] << 8) | (hdr[2] << 16) |
                                (static_cast<std::uint32_t>(hdr[3]) << 24));
  mel.n_frames = static_cast<int>(hdr[4] | (hdr[5] << 8) | (hdr[6] << 16) |
                                  (static_cast<std::uint32_t>(hdr[7]) << 24));
  if (mel.n_mels <= 0 || mel.n_frames <= 0) {
    throw Error(ErrorKind::kMalformedHeader, "bad MELS dimensions");
  }
  mel.values.resize(static_cast<std::size_t>(mel.n_mels) * mel.n_frames);
  in.read(reinterpret_cast<char*>(mel.values.data()),
          static_cast<std::streamsize>(mel.values.size() * 4));
  if (!in) throw Error(ErrorKind::kTruncatedData, "truncated MELS payload");
  return mel;
}

}  // namespace mdd::dsp

#endif  // MDDETECT_DSP_HPP_
