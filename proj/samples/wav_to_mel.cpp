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
// Minimal library walkthrough: decode a WAV, canonicalize it, compute the
// log-mel spectrogram, and dump it in the MELS debug format.

#include <iostream>

#include "mddetect/audio.hpp"
#include "mddetect/dsp.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: wav_to_mel <input.wav> <output.mels>\n";
    return 2;
  }
  try {
    const auto clip = mdd::audio::canonicalize(mdd::audio::read_wav(argv[1]));
    const auto mel = mdd::dsp::mel_spectrogram(clip, mdd::dsp::MelConfig{});
    mdd::dsp::write_mels(mel, argv[2]);
    std::cout << mel.n_mels << " mel bands x " << mel.n_frames
              << " frames (clip " << clip.duration_seconds() << " s)\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
