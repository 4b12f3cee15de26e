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

#ifndef MDDETECT_AUDIO_HPP_
#define MDDETECT_AUDIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mddetect/error.hpp"

namespace mdd::audio {

// The canonical rate everything is resampled to before featurization.
inline constexpr int kCanonicalRate = 16000;

// Decoded PCM audio. Channels are planar and equal-length; samples live in
// [-1, 1] once decoded.
struct AudioClip {
  std::vector<std::vector<float>> channels;
  int sample_rate = 0;

  std::size_t channel_count() const { return channels.size(); }
  std::size_t length() const {
    return channels.empty() ? 0 : channels.front().size();
  }
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(length()) / sample_rate : 0.0;
  }
};

inline AudioClip make_mono_clip(std::vector<float> samples, int sample_rate) {
  AudioClip clip;
  clip.channels.push_back(std::move(samples));
  clip.sample_rate = sample_rate;
  return clip;
}

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

inline void put_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

inline double bessel_i0(double x) {
  // Power series for the zeroth-order modified Bessel function; converges
  // quickly for the beta values used here.
  double sum = 1.0;
  double term = 1.0;
  const double half_x2 = (x / 2.0) * (x / 2.0);
  for (int k = 1; k < 64; ++k) {
    term *= half_x2 / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace detail

// Decodes an in-memory RIFF/WAVE image holding 16-bit little-endian PCM.
// Chunks may appear in any order; unknown chunks are skipped (with
// word-alignment padding). `name` only labels error messages.
inline AudioClip decode_wav(const std::vector<unsigned char>& bytes,
                            const std::string& name = "<memory>") {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kMalformedHeader,
                "missing RIFF/WAVE magic in " + name);
  }

  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channel_count = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = detail::read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > bytes.size()) {
        throw Error(ErrorKind::kMalformedHeader,
                    "fmt chunk too small in " + name);
      }
      format = detail::read_u16le(&bytes[body]);
      channel_count = detail::read_u16le(&bytes[body + 2]);
      sample_rate = detail::read_u32le(&bytes[body + 4]);
      bits = detail::read_u16le(&bytes[body + 14]);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      if (body + chunk_size > bytes.size()) {
        throw Error(ErrorKind::kTruncatedData,
                    "data chunk declares " + std::to_string(chunk_size) +
                        " bytes but only " + std::to_string(bytes.size() - body) +
                        " remain in " + name);
      }
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_ptr == nullptr) {
    throw Error(ErrorKind::kMalformedHeader,
                "missing fmt/data chunk in " + name);
  }
  if (format != 1 || bits != 16) {
    throw Error(ErrorKind::kUnsupportedEncoding,
                "only 16-bit integer PCM is supported (format=" +
                    std::to_string(format) + ", bits=" + std::to_string(bits) +
                    ")");
  }
  if (channel_count < 1 || channel_count > 2 || sample_rate == 0) {
    throw Error(ErrorKind::kUnsupportedEncoding,
                "unsupported channel count or rate in " + name);
  }

  const std::size_t frame_bytes = 2u * channel_count;
  const std::size_t frames = data_size / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.channels.assign(channel_count, std::vector<float>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::uint16_t c = 0; c < channel_count; ++c) {
      std::int16_t v;
      std::memcpy(&v, data_ptr + f * frame_bytes + 2u * c, 2);
      clip.channels[c][f] = static_cast<float>(v) / 32768.0f;
    }
  }
  return clip;
}

inline std::vector<unsigned char> read_file_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  return decode_wav(read_file_bytes(path), path.string());
}

// Writes canonical 44-byte-header PCM16: sample s encodes as
// round(s * 32768) saturated to int16, which keeps the decode/encode
// roundtrip error within 1/32767 per sample.
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  if (clip.channels.empty() || clip.length() == 0 || clip.sample_rate <= 0) {
    throw Error(ErrorKind::kIoFailure, "refusing to write empty clip");
  }
  const auto channel_count = static_cast<std::uint16_t>(clip.channel_count());
  const auto frames = static_cast<std::uint32_t>(clip.length());
  const std::uint32_t data_size = frames * 2u * channel_count;

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32le(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  detail::put_u32le(out, 16);
  detail::put_u16le(out, 1);  // PCM
  detail::put_u16le(out, channel_count);
  detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put_u32le(out,
                    static_cast<std::uint32_t>(clip.sample_rate) * 2u * channel_count);
  detail::put_u16le(out, static_cast<std::uint16_t>(2 * channel_count));
  detail::put_u16le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32le(out, data_size);

  for (std::uint32_t f = 0; f < frames; ++f) {
    for (std::uint16_t c = 0; c < channel_count; ++c) {
      const long raw =
          std::lround(static_cast<double>(clip.channels[c][f]) * 32768.0);
      const auto v = static_cast<std::int16_t>(
          std::clamp(raw, long{-32768}, long{32767}));
      detail::put_u16le(out, static_cast<std::uint16_t>(v));
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw Error(ErrorKind::kIoFailure, "cannot create " + path.string());
  }
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) {
    throw Error(ErrorKind::kIoFailure, "short write to " + path.string());
  }
}

namespace detail {

// Windowed-sinc resampling of one channel by an arbitrary positive ratio
// (output rate / input rate). Kaiser window; the kernel cutoff scales with
// the ratio when downsampling so aliasing stays below the window sidelobes.
inline std::vector<float> resample_channel(const std::vector<float>& x,
                                           double ratio, int taps_per_side,
                                           double kaiser_beta,
                                           std::size_t out_len) {
  if (x.empty() || out_len == 0) return {};
  const double cutoff = std::min(1.0, ratio);
  const double half_width = taps_per_side / cutoff;
  const double i0_beta = bessel_i0(kaiser_beta);
  const auto n = static_cast<std::ptrdiff_t>(x.size());

  std::vector<float> y(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double center = static_cast<double>(j) / ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(center - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(center + half_width));
    double acc = 0.0;
    double norm = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double t = (static_cast<double>(i) - center) * cutoff;
      const double sinc =
          t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
      const double u = (static_cast<double>(i) - center) / half_width;
      const double w = bessel_i0(kaiser_beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      const double k = sinc * w;
      norm += k;
      if (i >= 0 && i < n) acc += k * static_cast<double>(x[static_cast<std::size_t>(i)]);
    }
    y[j] = norm != 0.0 ? static_cast<float>(acc / norm) : 0.0f;
  }
  return y;
}

}  // namespace detail

struct ResampleOptions {
  int taps_per_side = 32;
  double kaiser_beta = 8.6;
};

// Resamples every channel to target_rate. Output length per channel is
// round(input_length * target_rate / input_rate).
inline AudioClip resample(const AudioClip& clip, int target_rate,
                          const ResampleOptions& opts = {}) {
  if (target_rate <= 0) {
    throw Error(ErrorKind::kBadConfig, "target_rate must be positive");
  }
  if (clip.sample_rate == target_rate) return clip;

  const double ratio =
      static_cast<double>(target_rate) / static_cast<double>(clip.sample_rate);
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.length()) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.channels.reserve(clip.channel_count());
  for (const auto& ch : clip.channels) {
    out.channels.push_back(detail::resample_channel(
        ch, ratio, opts.taps_per_side, opts.kaiser_beta, out_len));
  }
  return out;
}

// Arithmetic mean across channels, per sample.
inline AudioClip to_mono(const AudioClip& clip) {
  if (clip.channels.empty()) {
    throw Error(ErrorKind::kShapeMismatch, "clip has no channels");
  }
  if (clip.channel_count() == 1) return clip;

  std::vector<float> mixed(clip.length(), 0.0f);
  for (const auto& ch : clip.channels) {
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += ch[i];
  }
  const float inv = 1.0f / static_cast<float>(clip.channel_count());
  for (float& s : mixed) s *= inv;
  return make_mono_clip(std::move(mixed), clip.sample_rate);
}

// Mono + canonical rate; the form every downstream stage expects.
inline AudioClip canonicalize(const AudioClip& clip,
                              int rate = kCanonicalRate) {
  return resample(to_mono(clip), rate);
}

}  // namespace mdd::audio

#endif  // MDDETECT_AUDIO_HPP_
