// Copyright 2026  The coughgate Authors
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

#ifndef COUGHGATE_AUDIO_IO_H_
#define COUGHGATE_AUDIO_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace coughgate {

/// Canonical rates used by the pipeline.
inline constexpr int kFeatureRate = 16000;
inline constexpr int kSegmentationRate = 44100;
inline constexpr int kEnvelopeRate = 4410;

/// Mono samples in [-1, 1] at a positive sample rate.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kFeatureRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes a RIFF/WAVE image into one buffer per channel. Integer PCM
/// (16/24/32 bit) is divided by the type's maximum magnitude; IEEE float
/// (32/64 bit) is clamped to [-1, 1].
std::vector<AudioBuffer> DecodeWav(std::span<const std::uint8_t> bytes);
std::vector<AudioBuffer> ReadWavFile(const std::filesystem::path& path);

/// Encodes mono audio as 16-bit PCM WAV.
std::vector<std::uint8_t> EncodeWav16(const AudioBuffer& buffer);
/// Encodes interleaved channels; all channels must share length and rate.
std::vector<std::uint8_t> EncodeWav(const std::vector<AudioBuffer>& channels,
                                    int bits_per_sample, bool ieee_float);
void WriteWavFile(const std::filesystem::path& path, const AudioBuffer& buffer);

/// Per-sample arithmetic mean of the channels.
AudioBuffer DownmixMono(const std::vector<AudioBuffer>& channels);

/// Rational windowed-sinc polyphase resampler (Kaiser window).
class Resampler {
 public:
  static constexpr int kTapsPerPhase = 32;
  static constexpr double kKaiserBeta = 8.0;

  Resampler(int source_rate, int target_rate);

  AudioBuffer Process(const AudioBuffer& input) const;
  static std::size_t OutputLength(std::size_t input_length, int source_rate,
                                  int target_rate);

 private:
  double Kernel(double tau) const;
  void PhaseTaps(std::int64_t phase, std::vector<double>& taps) const;

  int source_rate_;
  int target_rate_;
  std::int64_t up_;     // L
  std::int64_t down_;   // M
  double cutoff_;       // relative to the input Nyquist
  double half_width_;   // kernel half-width in input samples
  int taps_;            // taps per phase
  std::vector<double> table_;  // up_ x taps_, empty if computed on the fly
};

/// Resamples to `target_rate`; identical rates return a copy.
AudioBuffer Resample(const AudioBuffer& buffer, int target_rate);

/// Decode, downmix and resample a file to `target_rate`.
AudioBuffer LoadStandardized(const std::filesystem::path& path,
                             int target_rate = kFeatureRate);

}  // namespace coughgate

#endif  // COUGHGATE_AUDIO_IO_H_
