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

#ifndef MDDETECT_AUGMENT_HPP_
#define MDDETECT_AUGMENT_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mddetect/audio.hpp"
#include "mddetect/dataset.hpp"
#include "mddetect/dsp.hpp"
#include "mddetect/error.hpp"
#include "mddetect/fft.hpp"
#include "mddetect/rng.hpp"

namespace mdd::augment {

enum class Kind { kNone, kTempo, kPitch, kPitchTempo };

inline const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::kNone: return "none";
    case Kind::kTempo: return "tempo";
    case Kind::kPitch: return "pitch";
    case Kind::kPitchTempo: return "pitch_tempo";
  }
  return "unknown";
}

inline std::optional<Kind> kind_from_string(const std::string& s) {
  if (s == "none") return Kind::kNone;
  if (s == "tempo") return Kind::kTempo;
  if (s == "pitch") return Kind::kPitch;
  if (s == "pitch_tempo") return Kind::kPitchTempo;
  return std::nullopt;
}

struct AugmentSpec {
  Kind kind = Kind::kNone;
  std::uint64_t seed = 0;
  double rate_lo = 0.8;
  double rate_hi = 1.2;
  double semitone_lo = -2.0;
  double semitone_hi = 2.0;
};

struct DrawnParams {
  std::optional<double> rate;
  std::optional<double> semitones;
};

// Each clip gets its own parameter streams derived from (seed, clip_index),
// one stream per knob, so the pitch draw for a clip is the same whether or
// not tempo is also being applied.
inline DrawnParams draw_params(const AugmentSpec& spec, std::size_t clip_index) {
  DrawnParams p;
  if (spec.kind == Kind::kPitch || spec.kind == Kind::kPitchTempo) {
    Rng rng(derive_seed(spec.seed, "augment.pitch", clip_index));
    p.semitones = rng.uniform(spec.semitone_lo, spec.semitone_hi);
  }
  if (spec.kind == Kind::kTempo || spec.kind == Kind::kPitchTempo) {
    Rng rng(derive_seed(spec.seed, "augment.tempo", clip_index));
    p.rate = rng.uniform(spec.rate_lo, spec.rate_hi);
  }
  return p;
}

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr int kVocoderFft = 2048;
inline constexpr int kVocoderHop = 512;

struct Stft {
  int n_bins = 0;
  int n_frames = 0;
  std::vector<std::complex<double>> values;  // frame-major
};

inline Stft analyze(const std::vector<float>& x, const Fft& fft,
                    const std::vector<double>& window) {
  const int n_fft = static_cast<int>(fft.size());
  const int pad = n_fft / 2;
  Stft s;
  s.n_bins = n_fft / 2 + 1;
  s.n_frames = dsp::stft_frame_count(x.size(), kVocoderHop);
  s.values.resize(static_cast<std::size_t>(s.n_frames) * s.n_bins);

  std::vector<std::complex<double>> frame(n_fft);
  for (int t = 0; t < s.n_frames; ++t) {
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(t) * kVocoderHop - pad;
    for (int k = 0; k < n_fft; ++k) {
      const std::size_t idx = dsp::detail::reflect_index(start + k, x.size());
      frame[k] = window[k] * static_cast<double>(x[idx]);
    }
    fft.forward(frame);
    std::copy(frame.begin(), frame.begin() + s.n_bins,
              s.values.begin() + static_cast<std::size_t>(t) * s.n_bins);
  }
  return s;
}

inline double wrap_phase(double x) {
  return x - 2.0 * kPi * std::round(x / (2.0 * kPi));
}

// Hann-windowed overlap-add synthesis of half-spectrum frames, normalized by
// the accumulated squared window. Emits exactly out_len samples, dropping the
// centering pad.
inline std::vector<float> overlap_add(
    const std::vector<std::vector<std::complex<double>>>& frames,
    const Fft& fft, const std::vector<double>& window, std::size_t out_len) {
  const int n_fft = static_cast<int>(fft.size());
  const int n_bins = n_fft / 2 + 1;
  const int pad = n_fft / 2;
  const std::size_t ola_len =
      (frames.size() - 1) * kVocoderHop + static_cast<std::size_t>(n_fft);
  std::vector<double> acc(ola_len, 0.0);
  std::vector<double> wsum(ola_len, 0.0);

  std::vector<std::complex<double>> full(n_fft);
  for (std::size_t j = 0; j < frames.size(); ++j) {
    for (int k = 0; k < n_bins; ++k) full[k] = frames[j][k];
    for (int k = 1; k < n_fft / 2; ++k) {
      full[n_fft - k] = std::conj(frames[j][k]);
    }
    fft.inverse(full);
    const std::size_t base = j * kVocoderHop;
    for (int k = 0; k < n_fft; ++k) {
      acc[base + k] += window[k] * full[k].real();
      wsum[base + k] += window[k] * window[k];
    }
  }

  std::vector<float> out(out_len, 0.0f);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t src = i + pad;
    if (src < acc.size()) {
      out[i] = static_cast<float>(acc[src] / std::max(wsum[src], 1e-8));
    }
  }
  return out;
}

}  // namespace detail

// Phase-vocoder time stretch: duration scales by 1/rate, pitch is preserved.
// Analysis frames are read at fractional stride rate*hop with linear
// magnitude interpolation; per-bin phase advances by the expected increment
// plus the wrapped deviation observed between the bracketing frames.
inline audio::AudioClip time_stretch(const audio::AudioClip& clip, double rate) {
  if (!(rate >= 0.25 && rate <= 4.0)) {
    throw Error(ErrorKind::kBadConfig, "stretch rate must be in [0.25, 4]");
  }
  if (clip.channel_count() != 1) {
    throw Error(ErrorKind::kShapeMismatch, "time_stretch expects mono audio");
  }
  const std::vector<float>& x = clip.channels.front();
  if (x.empty()) {
    throw Error(ErrorKind::kShapeMismatch, "time_stretch needs samples");
  }

  const Fft fft(detail::kVocoderFft);
  const std::vector<double> window =
      dsp::detail::hann_window(detail::kVocoderFft);
  const detail::Stft spec = detail::analyze(x, fft, window);
  const int n_bins = spec.n_bins;

  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) / rate));
  const std::size_t n_out_frames = out_len / detail::kVocoderHop + 1;

  std::vector<double> expected_advance(n_bins);
  for (int k = 0; k < n_bins; ++k) {
    expected_advance[k] =
        2.0 * detail::kPi * k * detail::kVocoderHop / detail::kVocoderFft;
  }

  std::vector<std::vector<std::complex<double>>> out_frames(
      n_out_frames, std::vector<std::complex<double>>(n_bins));
  std::vector<double> phase(n_bins);
  for (int k = 0; k < n_bins; ++k) {
    phase[k] = std::arg(spec.values[k]);  // frame 0
  }

  for (std::size_t j = 0; j < n_out_frames; ++j) {
    const double pos = static_cast<double>(j) * rate;
    const int c0 = std::min(static_cast<int>(pos), spec.n_frames - 1);
    const int c1 = std::min(c0 + 1, spec.n_frames - 1);
    const double alpha = std::min(pos - static_cast<double>(c0), 1.0);
    const std::complex<double>* col0 =
        spec.values.data() + static_cast<std::size_t>(c0) * n_bins;
    const std::complex<double>* col1 =
        spec.values.data() + static_cast<std::size_t>(c1) * n_bins;

    for (int k = 0; k < n_bins; ++k) {
      const double mag =
          (1.0 - alpha) * std::abs(col0[k]) + alpha * std::abs(col1[k]);
      out_frames[j][k] = std::polar(mag, phase[k]);
    }
    for (int k = 0; k < n_bins; ++k) {
      const double dphase = detail::wrap_phase(
          std::arg(col1[k]) - std::arg(col0[k]) - expected_advance[k]);
      phase[k] += expected_advance[k] + dphase;
    }
  }

  return audio::make_mono_clip(
      detail::overlap_add(out_frames, fft, window, out_len), clip.sample_rate);
}

// Pitch shift by 2^(semitones/12) with duration preserved: stretch time by
// the inverse factor, then resample the stretched signal back to the
// original duration, which scales every frequency by the factor.
inline audio::AudioClip pitch_shift(const audio::AudioClip& clip,
                                    double semitones) {
  if (!(semitones >= -12.0 && semitones <= 12.0)) {
    throw Error(ErrorKind::kBadConfig, "semitones must be in [-12, 12]");
  }
  if (clip.channel_count() != 1) {
    throw Error(ErrorKind::kShapeMismatch, "pitch_shift expects mono audio");
  }
  const double factor = std::pow(2.0, semitones / 12.0);
  const audio::AudioClip stretched = time_stretch(clip, 1.0 / factor);

  const double ratio = 1.0 / factor;  // original rate over stretched rate
  const auto out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(stretched.length()) * ratio));
  audio::ResampleOptions opts;
  std::vector<float> resampled = audio::detail::resample_channel(
      stretched.channels.front(), ratio, opts.taps_per_side, opts.kaiser_beta,
      out_len);
  return audio::make_mono_clip(std::move(resampled), clip.sample_rate);
}

struct VariantResult {
  dataset::Manifest manifest;
  std::size_t dropped = 0;
};

// Materializes one dataset variant under out_dir, mirroring the source
// layout. Entries that fail to read or write are dropped with a warning
// rather than aborting the batch. A sidecar augment_params.csv records every
// draw. Entries are processed independently with per-index seeding, so
// parallel and serial runs produce identical bytes.
inline VariantResult build_variant(const dataset::Manifest& manifest,
                                   const AugmentSpec& spec,
                                   const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const std::size_t n = manifest.entries.size();
  std::vector<DrawnParams> params(n);
  std::vector<bool> ok(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    params[i] = draw_params(spec, i);
    fs::create_directories((out_dir / manifest.entries[i].path).parent_path());
  }

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n); ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    const auto& entry = manifest.entries[i];
    try {
      audio::AudioClip clip =
          audio::canonicalize(audio::read_wav(manifest.resolve(entry)));
      if (params[i].semitones) {
        clip = pitch_shift(clip, *params[i].semitones);
      }
      if (params[i].rate) {
        clip = time_stretch(clip, *params[i].rate);
      }
      audio::write_wav(clip, out_dir / entry.path);
      ok[i] = true;
    } catch (const std::exception& e) {
#pragma omp critical
      std::cerr << "warning: dropping " << entry.path << ": " << e.what()
                << "\n";
    }
  }

  std::ofstream side(out_dir / "augment_params.csv",
                     std::ios::binary | std::ios::trunc);
  side << "path,kind,rate,semitones,seed\n";
  VariantResult result;
  result.manifest.root = out_dir;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      ++result.dropped;
      continue;
    }
    const auto& entry = manifest.entries[i];
    side << entry.path << ',' << to_string(spec.kind) << ',';
    if (params[i].rate) side << *params[i].rate;
    side << ',';
    if (params[i].semitones) side << *params[i].semitones;
    side << ',' << spec.seed << '\n';
    result.manifest.entries.push_back(entry);
  }
  if (result.dropped > 0) {
    std::cerr << "warning: " << result.dropped << " of " << n
              << " entries dropped\n";
  }
  return result;
}

}  // namespace mdd::augment

#endif  // MDDETECT_AUGMENT_HPP_
