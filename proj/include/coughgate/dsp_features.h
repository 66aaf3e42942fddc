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

#ifndef COUGHGATE_DSP_FEATURES_H_
#define COUGHGATE_DSP_FEATURES_H_

#include <optional>
#include <string>
#include <vector>

#include "coughgate/audio_io.h"
#include "coughgate/augment.h"
#include "coughgate/random.h"
#include "coughgate/types.h"

namespace coughgate {

struct StftConfig {
  int n_freq = 2048;  // FFT size, must be a power of two
  int win_length = 640;
  int hop_length = 320;
  int sample_rate = kFeatureRate;
  double log_floor = 1e-10;

  int n_bins() const { return n_freq / 2 + 1; }
  void Validate() const;
};

/// Magnitude (or log-magnitude) STFT, one row per frame.
struct Spectrogram {
  Matrix values;  // [n_frames x n_bins]
  int n_fft = 0;
  int sample_rate = 0;
  double frame_hop_seconds = 0.0;
  bool is_log = false;

  std::size_t n_frames() const { return values.rows; }
  std::size_t n_bins() const { return values.cols; }
  double bin_hz(std::size_t k) const {
    return static_cast<double>(k) * sample_rate / n_fft;
  }
};

struct MfccConfig {
  int n_mfcc = 13;
  int n_mels = 40;
  double fmin = 0.0;
  double fmax = 8000.0;
  int delta_r = 2;
  double log_floor = 1e-10;

  void Validate() const;
};

/// Number of frames a length-N signal yields without padding.
std::size_t StftFrameCount(std::size_t n_samples, const StftConfig& config);

/// Hann-windowed magnitude STFT; frames start at multiples of hop_length and
/// only complete windows are used.
Spectrogram StftMagnitude(const AudioBuffer& buffer, const StftConfig& config);

/// log(magnitude + log_floor) of StftMagnitude.
Spectrogram StftLogSpectrogram(const AudioBuffer& buffer, const StftConfig& config);

/// Periodic Hann window.
std::vector<double> HannWindow(int length);

/// HTK-mel triangular filters, [n_mels x n_bins], peak weight 1.
Matrix MelFilterbank(const MfccConfig& config, int n_fft, int sample_rate);

/// Per frame: mel energies of |X|^2, natural log, orthonormal DCT-II, first
/// n_mfcc coefficients. Input must be a linear-magnitude spectrogram.
Matrix Mfcc(const Spectrogram& spectrogram, const MfccConfig& config);

/// D[n] = C[n+r] - C[n-r] with indices clamped to the valid frame range.
Matrix Delta(const Matrix& coeffs, int r);

struct FrameDescriptors {
  std::vector<double> spectral_centroid;  // Hz
  std::vector<double> rolloff_25;         // Hz
  std::vector<double> rolloff_75;         // Hz
  std::vector<double> rms;
};

FrameDescriptors ComputeFrameDescriptors(const Spectrogram& spectrogram);

/// Concatenates segment samples in order. Segments must be sorted, disjoint
/// and inside the buffer.
AudioBuffer CoughOnlyAudio(const AudioBuffer& buffer,
                           const std::vector<CoughSegment>& segments);

// --- SVM features -----------------------------------------------------------

inline constexpr int kSvmChannels = 43;
inline constexpr int kSvmFeatureLength = 4 * kSvmChannels;

struct SvmFeatureConfig {
  StftConfig stft;
  MfccConfig mfcc;
};

/// 172 values: mean[43], std[43], max[43], min[43]. Channel order within
/// each block: centroid, rolloff_25, rolloff_75, rms, mfcc[13], delta[13],
/// delta-delta[13].
struct SvmFeatureVector {
  std::vector<double> values;
};

SvmFeatureVector ComputeSvmFeatures(const AudioBuffer& buffer,
                                    const std::vector<CoughSegment>& segments,
                                    const SvmFeatureConfig& config = {});

/// Names of the 172 features, in order ("mean.centroid", ...).
std::vector<std::string> SvmFeatureNames();

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Z-scores each dimension. Without `stats` the input is treated as the
/// training set and its statistics are returned; dimensions with std below
/// 1e-12 map to 0.
std::vector<SvmFeatureVector> NormalizeFeatures(
    const std::vector<SvmFeatureVector>& vectors,
    const std::optional<FeatureStats>& stats, FeatureStats* out_stats);

// --- Sonographs -------------------------------------------------------------

inline constexpr int kSonographCoeffs = 64;
inline constexpr int kSonographFrames = 256;
inline constexpr int kSonographHop = 256;
inline constexpr int kSonographFft = 512;
inline constexpr std::size_t kSonographSamples = 65536;  // 4.096 s at 16 kHz

/// 64 x 256 MFCC image; rows are coefficients, columns frames.
struct Sonograph {
  Matrix values;
  std::string record_id;
  int copy_index = 0;
};

/// Cough-only audio padded or cut to 65,536 samples, optionally augmented,
/// then 64 MFCCs (64 mel filters, FFT 512, hop 256). Frame k covers samples
/// [256k, 256k + 512) with zeros past the end, giving exactly 256 frames.
Sonograph BuildSonograph(const AudioBuffer& buffer,
                         const std::vector<CoughSegment>& segments,
                         const AugmentSpec* augment, Rng* rng);

/// MFCC image of an already condensed 65,536-sample array.
Matrix SonographFromFixedAudio(const std::vector<double>& audio);

}  // namespace coughgate

#endif  // COUGHGATE_DSP_FEATURES_H_
