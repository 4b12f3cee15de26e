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

#ifndef MDDETECT_DATASET_HPP_
#define MDDETECT_DATASET_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mddetect/audio.hpp"
#include "mddetect/dsp.hpp"
#include "mddetect/error.hpp"
#include "mddetect/rng.hpp"

namespace mdd::dataset {

using dsp::Label;

// Subdirectory names the corpus scanner understands. The synthetic pair lets
// the whole pipeline run without the real corpus.
inline const std::array<std::string, 8> kPlatforms = {
    "MusicCaps",      "MusicGen_medium", "audioldm2",
    "musicldm",       "mustango",        "stable_audio_open",
    "synthetic_human", "synthetic_fake"};

inline bool is_known_platform(const std::string& name) {
  return std::find(kPlatforms.begin(), kPlatforms.end(), name) !=
         kPlatforms.end();
}

inline Label label_for_platform(const std::string& platform) {
  return (platform == "MusicCaps" || platform == "synthetic_human")
             ? Label::kHuman
             : Label::kDeepfake;
}

struct ManifestEntry {
  std::string path;  // relative to the manifest root, '/'-separated
  Label label = Label::kDeepfake;
  std::string platform;
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::filesystem::path resolve(const ManifestEntry& e) const {
    return root / e.path;
  }
  std::size_t count_label(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(),
                      [label](const ManifestEntry& e) { return e.label == label; }));
  }
};

inline void write_manifest(const Manifest& manifest,
                           const std::filesystem::path& csv_path);

inline void sort_by_path(std::vector<ManifestEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.path < b.path;
            });
}

// One entry per WAV file under root/<platform>/, labels derived from the
// platform directory. Ordering is lexicographic by relative path so scans are
// stable across filesystems.
inline Manifest scan_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::kEmptyCorpus, root.string() + " is not a directory");
  }
  Manifest m;
  m.root = root;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string platform = dir.path().filename().string();
    if (!is_known_platform(platform)) {
      std::cerr << "warning: skipping unknown subdirectory " << dir.path()
                << "\n";
      continue;
    }
    for (const auto& f : fs::directory_iterator(dir.path())) {
      if (!f.is_regular_file() || f.path().extension() != ".wav") continue;
      ManifestEntry e;
      e.path = platform + "/" + f.path().filename().string();
      e.platform = platform;
      e.label = label_for_platform(platform);
      m.entries.push_back(std::move(e));
    }
  }
  if (m.entries.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "no audio found under " + root.string());
  }
  sort_by_path(m.entries);
  return m;
}

// Keeps per_class entries of each label. Within a label the picks round-robin
// across its platforms (sorted by name) so per-platform counts differ by at
// most one; picks within a platform are a seeded draw without replacement.
inline Manifest balance(const Manifest& manifest, std::size_t per_class,
                        std::uint64_t seed) {
  Manifest out;
  out.root = manifest.root;

  for (const Label label : {Label::kDeepfake, Label::kHuman}) {
    std::map<std::string, std::vector<const ManifestEntry*>> by_platform;
    for (const auto& e : manifest.entries) {
      if (e.label == label) by_platform[e.platform].push_back(&e);
    }
    std::size_t available = 0;
    for (auto& [platform, group] : by_platform) {
      std::sort(group.begin(), group.end(),
                [](const ManifestEntry* a, const ManifestEntry* b) {
                  return a->path < b->path;
                });
      Rng rng(derive_seed(seed, "balance." + platform));
      rng.shuffle(group);
      available += group.size();
    }
    if (available < per_class) {
      throw Error(ErrorKind::kInsufficientEntries,
                  std::string(dsp::to_string(label)) + " has " +
                      std::to_string(available) + " entries, need " +
                      std::to_string(per_class));
    }
    std::vector<std::size_t> cursors(by_platform.size(), 0);
    std::size_t taken = 0;
    while (taken < per_class) {
      std::size_t idx = 0;
      for (auto& [platform, group] : by_platform) {
        if (taken == per_class) break;
        if (cursors[idx] < group.size()) {
          out.entries.push_back(*group[cursors[idx]]);
          ++cursors[idx];
          ++taken;
        }
        ++idx;
      }
    }
  }
  sort_by_path(out.entries);
  return out;
}

struct DatasetSplit {
  Manifest train;
  Manifest val;
  Manifest test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};
};

// Stratified 80/10/10: per label, a seeded shuffle, then floor arithmetic
// with the remainder going to test.
inline DatasetSplit split(const Manifest& manifest, std::uint64_t seed) {
  DatasetSplit s;
  s.seed = seed;
  s.train.root = s.val.root = s.test.root = manifest.root;

  for (const Label label : {Label::kDeepfake, Label::kHuman}) {
    std::vector<const ManifestEntry*> group;
    for (const auto& e : manifest.entries) {
      if (e.label == label) group.push_back(&e);
    }
    if (group.size() < 10) {
      throw Error(ErrorKind::kTooSmall,
                  std::string(dsp::to_string(label)) + " has only " +
                      std::to_string(group.size()) + " entries; need >= 10");
    }
    std::sort(group.begin(), group.end(),
              [](const ManifestEntry* a, const ManifestEntry* b) {
                return a->path < b->path;
              });
    Rng rng(derive_seed(seed, std::string("split.") + dsp::to_string(label)));
    rng.shuffle(group);

    const std::size_t n = group.size();
    const auto n_train = static_cast<std::size_t>(std::floor(0.8 * n));
    const auto n_val = static_cast<std::size_t>(std::floor(0.1 * n));
    for (std::size_t i = 0; i < n; ++i) {
      Manifest& part = i < n_train          ? s.train
                       : i < n_train + n_val ? s.val
                                             : s.test;
      part.entries.push_back(*group[i]);
    }
  }
  sort_by_path(s.train.entries);
  sort_by_path(s.val.entries);
  sort_by_path(s.test.entries);
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
//
// Two separable-by-construction families of 10-second clips. "Human" clips
// are a slowly enveloped harmonic stack with vibrato over a pink-noise floor;
// "fake" clips reuse the same stack parameters but are hard-lowpassed at
// 3 kHz and ring-modulated at 20 Hz, leaving them dark above 3 kHz and with a
// flattened amplitude texture.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kClipSeconds = 10.0;
inline constexpr double kNoiseFloorDb = -30.0;
inline constexpr double kLowpassHz = 3000.0;
inline constexpr double kRingHz = 20.0;

struct SynthParams {
  double f0 = 0.0;
  double vibrato_depth = 0.0;   // fractional frequency deviation
  double envelope_hz = 0.0;
  double envelope_phase = 0.0;
  std::array<double, 6> partial_phase{};
};

inline SynthParams draw_synth_params(std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, "synth.params", index));
  SynthParams p;
  p.f0 = rng.uniform(110.0, 440.0);
  p.vibrato_depth = rng.uniform(0.003, 0.01);
  p.envelope_hz = rng.uniform(0.1, 0.4);
  p.envelope_phase = rng.uniform(0.0, 2.0 * kPi);
  for (auto& ph : p.partial_phase) ph = rng.uniform(0.0, 2.0 * kPi);
  return p;
}

// Paul Kellet's economy pink filter over seeded white noise.
inline std::vector<float> pink_noise(std::size_t n, Rng& rng, double rms) {
  std::vector<float> out(n);
  double b0 = 0, b1 = 0, b2 = 0;
  double sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double white = rng.uniform(-1.0, 1.0);
    b0 = 0.99765 * b0 + white * 0.0990460;
    b1 = 0.96300 * b1 + white * 0.2965164;
    b2 = 0.57000 * b2 + white * 1.0526913;
    const double pink = b0 + b1 + b2 + white * 0.1848;
    out[i] = static_cast<float>(pink);
    sum_sq += pink * pink;
  }
  const double current = std::sqrt(sum_sq / static_cast<double>(n));
  const float gain = current > 0 ? static_cast<float>(rms / current) : 0.0f;
  for (float& v : out) v *= gain;
  return out;
}

inline std::vector<float> harmonic_stack(const SynthParams& p, int sample_rate,
                                         std::size_t n) {
  std::vector<float> y(n, 0.0f);
  double phase = 0.0;  // integrated fundamental phase, cycles
  const double dt = 1.0 / sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = i * dt;
    const double inst_f0 =
        p.f0 * (1.0 + p.vibrato_depth * std::sin(2.0 * kPi * 5.0 * t));
    phase += inst_f0 * dt;
    double v = 0.0;
    for (int k = 1; k <= 6; ++k) {
      v += (1.0 / k) *
           std::sin(2.0 * kPi * k * phase + p.partial_phase[k - 1]);
    }
    y[i] = static_cast<float>(v);
  }
  float peak = 0.0f;
  for (float v : y) peak = std::max(peak, std::abs(v));
  const float gain = peak > 0 ? 0.75f / peak : 0.0f;
  const double env_w = 2.0 * kPi * p.envelope_hz;
  for (std::size_t i = 0; i < n; ++i) {
    const double env =
        0.55 + 0.45 * std::sin(env_w * (i * dt) + p.envelope_phase);
    y[i] = static_cast<float>(y[i] * gain * env);
  }
  return y;
}

// Linear-phase Kaiser-windowed sinc lowpass, "same" length output.
inline std::vector<float> lowpass_fir(const std::vector<float>& x, double fc,
                                      int sample_rate, int half_taps = 128,
                                      double beta = 8.6) {
  const int taps = 2 * half_taps + 1;
  std::vector<double> h(taps);
  const double norm_fc = 2.0 * fc / sample_rate;
  const double i0_beta = audio::detail::bessel_i0(beta);
  double sum = 0.0;
  for (int m = 0; m < taps; ++m) {
    const int k = m - half_taps;
    const double t = norm_fc * k;
    const double sinc = k == 0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
    const double u = static_cast<double>(k) / half_taps;
    const double w =
        audio::detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) /
        i0_beta;
    h[m] = norm_fc * sinc * w;
    sum += h[m];
  }
  for (double& v : h) v /= sum;  // unity DC gain

  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<float> y(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int m = 0; m < taps; ++m) {
      const std::ptrdiff_t j = i + m - half_taps;
      if (j >= 0 && j < n) acc += h[m] * x[static_cast<std::size_t>(j)];
    }
    y[static_cast<std::size_t>(i)] = static_cast<float>(acc);
  }
  return y;
}

inline std::vector<float> make_synth_clip(std::uint64_t seed, std::size_t index,
                                          bool fake, int sample_rate) {
  const auto n = static_cast<std::size_t>(kClipSeconds * sample_rate);
  const SynthParams p = draw_synth_params(seed, index);
  std::vector<float> y = harmonic_stack(p, sample_rate, n);

  Rng noise_rng(derive_seed(seed, "synth.noise", index));
  const double noise_rms = std::pow(10.0, kNoiseFloorDb / 20.0);
  const std::vector<float> pink = pink_noise(n, noise_rng, noise_rms);
  for (std::size_t i = 0; i < n; ++i) y[i] += pink[i];

  if (fake) {
    y = lowpass_fir(y, kLowpassHz, sample_rate);
    const double w = 2.0 * kPi * kRingHz / sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<float>(y[i] * std::sin(w * static_cast<double>(i)));
    }
  }
  return y;
}

}  // namespace detail

// Writes n_per_class clips per family plus a manifest.csv under out_dir, all
// at the canonical rate. Deterministic: clip i of both families shares one
// parameter draw, so pairs are matched except for the fake-side processing.
inline Manifest synth_corpus(std::size_t n_per_class, std::uint64_t seed,
                             const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (n_per_class < 1) {
    throw Error(ErrorKind::kBadConfig, "n_per_class must be >= 1");
  }
  fs::create_directories(out_dir / "synthetic_human");
  fs::create_directories(out_dir / "synthetic_fake");

  Manifest m;
  m.root = out_dir;
  m.entries.resize(2 * n_per_class);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_per_class); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05ld.wav", static_cast<long>(i));
    for (const bool fake : {false, true}) {
      const std::string platform = fake ? "synthetic_fake" : "synthetic_human";
      const auto samples = detail::make_synth_clip(
          seed, static_cast<std::size_t>(i), fake, audio::kCanonicalRate);
      const auto clip =
          audio::make_mono_clip(samples, audio::kCanonicalRate);
      audio::write_wav(clip, out_dir / platform / name);

      ManifestEntry e;
      e.path = platform + "/" + name;
      e.platform = platform;
      e.label = fake ? Label::kDeepfake : Label::kHuman;
      m.entries[static_cast<std::size_t>(i) * 2 + (fake ? 1 : 0)] = std::move(e);
    }
  }
  sort_by_path(m.entries);
  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

// ---------------------------------------------------------------------------
// Manifest CSV: header `path,label,platform`, UTF-8, LF. Paths are stored
// relative to the CSV's directory.
// ---------------------------------------------------------------------------

inline void write_manifest(const Manifest& manifest,
                           const std::filesystem::path& csv_path) {
  std::ofstream os(csv_path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::kIoFailure, "cannot create " + csv_path.string());
  os << "path,label,platform\n";
  for (const auto& e : manifest.entries) {
    os << e.path << ',' << dsp::to_string(e.label) << ',' << e.platform << '\n';
  }
  if (!os) throw Error(ErrorKind::kIoFailure, "short write to " + csv_path.string());
}

inline Manifest read_manifest(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + csv_path.string());
  Manifest m;
  m.root = csv_path.parent_path();
  std::string line;
  if (!std::getline(in, line) || line != "path,label,platform") {
    throw Error(ErrorKind::kBadConfig,
                "manifest must start with 'path,label,platform'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string label;
    if (!std::getline(ss, e.path, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, e.platform)) {
      throw Error(ErrorKind::kBadConfig,
                  "bad manifest row at line " + std::to_string(line_no));
    }
    if (label == "human") {
      e.label = Label::kHuman;
    } else if (label == "deepfake") {
      e.label = Label::kDeepfake;
    } else {
      throw Error(ErrorKind::kBadConfig, "unknown label '" + label + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

// Persists a split as three manifest CSVs plus a split_meta.txt recording the
// seed and ratios.
inline void write_split(const DatasetSplit& s,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_manifest(s.train, dir / "train.csv");
  write_manifest(s.val, dir / "val.csv");
  write_manifest(s.test, dir / "test.csv");
  std::ofstream os(dir / "split_meta.txt", std::ios::binary | std::ios::trunc);
  os << "seed = " << s.seed << "\n"
     << "ratios = " << s.ratios[0] << "/" << s.ratios[1] << "/" << s.ratios[2]
     << "\n";
}

}  // namespace mdd::dataset

#endif  // MDDETECT_DATASET_HPP_
