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

#include "coughgate/dsp_features.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coughgate/fft.h"

namespace coughgate {

namespace {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Magnitude frames of `samples`; frame k starts at k * hop, reads win samples
// (zero past the end), applies `window` and zero-pads to n_fft.
Matrix FrameMagnitudes(const std::vector<double>& samples, int n_fft, int hop,
                       const std::vector<double>& window, std::size_t n_frames) {
  const Fft fft(static_cast<std::size_t>(n_fft));
  const std::size_t win = window.size();
  Matrix out(n_frames, static_cast<std::size_t>(n_fft / 2 + 1));
  std::vector<double> frame(win);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * static_cast<std::size_t>(hop);
    for (std::size_t i = 0; i < win; ++i) {
      const std::size_t j = start + i;
      frame[i] = j < samples.size() ? samples[j] * window[i] : 0.0;
    }
    fft.RealMagnitudes(frame, out.row(f));
  }
  return out;
}

// Orthonormal DCT-II basis, [n_out x n_in].
Matrix DctMatrix(int n_out, int n_in) {
  Matrix d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int n = 0; n < n_in; ++n)
      d(k, n) = scale * std::cos(M_PI * k * (2.0 * n + 1.0) / (2.0 * n_in));
  }
  return d;
}

Matrix MfccFromMagnitudes(const Matrix& mags, const Matrix& bank,
                          const Matrix& dct, double log_floor) {
  Matrix out(mags.rows, dct.rows);
  std::vector<double> logmel(bank.rows);
  for (std::size_t f = 0; f < mags.rows; ++f) {
    auto frame = mags.row(f);
    for (std::size_t m = 0; m < bank.rows; ++m) {
      auto w = bank.row(m);
      double e = 0.0;
      for (std::size_t k = 0; k < frame.size(); ++k)
        if (w[k] != 0.0) e += w[k] * frame[k] * frame[k];
      logmel[m] = std::log(e + log_floor);
    }
    for (std::size_t c = 0; c < dct.rows; ++c) {
      auto basis = dct.row(c);
      double s = 0.0;
      for (std::size_t m = 0; m < logmel.size(); ++m) s += basis[m] * logmel[m];
      out(f, c) = s;
    }
  }
  return out;
}

MfccConfig SonographMfccConfig() {
  MfccConfig c;
  c.n_mfcc = kSonographCoeffs;
  c.n_mels = kSonographCoeffs;
  c.fmin = 0.0;
  c.fmax = kFeatureRate / 2.0;
  return c;
}

}  // namespace

void StftConfig::Validate() const {
  if (!IsPowerOfTwo(static_cast<std::size_t>(std::max(n_freq, 0))))
    throw std::invalid_argument("stft: n_freq must be a power of two");
  if (win_length <= 0 || win_length > n_freq)
    throw std::invalid_argument("stft: need 0 < win_length <= n_freq");
  if (hop_length <= 0 || hop_length > win_length)
    throw std::invalid_argument("stft: need 0 < hop_length <= win_length");
  if (sample_rate <= 0) throw std::invalid_argument("stft: sample_rate must be > 0");
  if (!(log_floor > 0)) throw std::invalid_argument("stft: log_floor must be > 0");
}

void MfccConfig::Validate() const {
  if (n_mfcc <= 0 || n_mels <= 0 || n_mfcc > n_mels)
    throw std::invalid_argument("mfcc: need 0 < n_mfcc <= n_mels");
  if (delta_r != 2 && delta_r != 3)
    throw std::invalid_argument("mfcc: delta_r must be 2 or 3");
  if (!(log_floor > 0)) throw std::invalid_argument("mfcc: log_floor must be > 0");
}

std::vector<double> HannWindow(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / length);
  return w;
}

std::size_t StftFrameCount(std::size_t n_samples, const StftConfig& config) {
  const auto win = static_cast<std::size_t>(config.win_length);
  if (n_samples < win) return 0;
  return 1 + (n_samples - win) / static_cast<std::size_t>(config.hop_length);
}

Spectrogram StftMagnitude(const AudioBuffer& buffer, const StftConfig& config) {
  config.Validate();
  if (buffer.sample_rate != config.sample_rate)
    throw std::invalid_argument("stft: buffer rate " +
                                std::to_string(buffer.sample_rate) +
                                " does not match config rate " +
                                std::to_string(config.sample_rate));
  if (buffer.size() < static_cast<std::size_t>(config.win_length))
    throw std::invalid_argument("stft: buffer shorter than one window");
  Spectrogram s;
  s.values = FrameMagnitudes(buffer.samples, config.n_freq, config.hop_length,
                             HannWindow(config.win_length),
                             StftFrameCount(buffer.size(), config));
  s.n_fft = config.n_freq;
  s.sample_rate = config.sample_rate;
  s.frame_hop_seconds = static_cast<double>(config.hop_length) / config.sample_rate;
  s.is_log = false;
  return s;
}

Spectrogram StftLogSpectrogram(const AudioBuffer& buffer, const StftConfig& config) {
  Spectrogram s = StftMagnitude(buffer, config);
  for (double& v : s.values.data) v = std::log(v + config.log_floor);
  s.is_log = true;
  return s;
}

Matrix MelFilterbank(const MfccConfig& config, int n_fft, int sample_rate) {
  const double nyquist = sample_rate / 2.0;
  if (!(config.fmin >= 0.0) || !(config.fmin < config.fmax) ||
      config.fmax > nyquist)
    throw std::invalid_argument("mel filterbank: need 0 <= fmin < fmax <= Nyquist");
  if (config.n_mels <= 0) throw std::invalid_argument("mel filterbank: n_mels must be > 0");
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = HzToMel(config.fmin);
  const double mel_hi = HzToMel(config.fmax);
  std::vector<double> edges(config.n_mels + 2);
  for (int i = 0; i < config.n_mels + 2; ++i)
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (config.n_mels + 1));

  Matrix bank(config.n_mels, n_bins);
  for (int m = 0; m < config.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f <= center)
        w = (f - left) / (center - left);
      else if (f > center && f < right)
        w = (right - f) / (right - center);
      bank(m, k) = w;
    }
  }
  return bank;
}

Matrix Mfcc(const Spectrogram& spectrogram, const MfccConfig& config) {
  if (config.n_mfcc > config.n_mels)
    throw std::invalid_argument("mfcc: n_mfcc exceeds n_mels");
  config.Validate();
  if (spectrogram.is_log)
    throw std::invalid_argument("mfcc: expects a linear-magnitude spectrogram");
  const Matrix bank =
      MelFilterbank(config, spectrogram.n_fft, spectrogram.sample_rate);
  return MfccFromMagnitudes(spectrogram.values, bank,
                            DctMatrix(config.n_mfcc, config.n_mels),
                            config.log_floor);
}

Matrix Delta(const Matrix& coeffs, int r) {
  if (r < 1) throw std::invalid_argument("delta: lag must be >= 1");
  if (coeffs.rows == 0) throw std::invalid_argument("delta: no frames");
  const auto last = static_cast<long>(coeffs.rows) - 1;
  Matrix out(coeffs.rows, coeffs.cols);
  for (long n = 0; n <= last; ++n) {
    const long ahead = std::min(n + r, last);
    const long behind = std::max(n - r, 0L);
    for (std::size_t c = 0; c < coeffs.cols; ++c)
      out(n, c) = coeffs(ahead, c) - coeffs(behind, c);
  }
  return out;
}

FrameDescriptors ComputeFrameDescriptors(const Spectrogram& spectrogram) {
  if (spectrogram.is_log)
    throw std::invalid_argument("frame descriptors: expects linear magnitudes");
  const std::size_t frames = spectrogram.n_frames();
  const std::size_t bins = spectrogram.n_bins();
  FrameDescriptors d;
  d.spectral_centroid.resize(frames);
  d.rolloff_25.resize(frames);
  d.rolloff_75.resize(frames);
  d.rms.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    auto x = spectrogram.values.row(f);
    double total = 0.0, weighted = 0.0, energy = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      total += x[k];
      weighted += spectrogram.bin_hz(k) * x[k];
      energy += x[k] * x[k];
    }
    d.rms[f] = std::sqrt(energy / static_cast<double>(bins));
    if (total <= 0.0) {
      d.spectral_centroid[f] = d.rolloff_25[f] = d.rolloff_75[f] = 0.0;
      continue;
    }
    d.spectral_centroid[f] = weighted / total;
    double cum = 0.0;
    bool have25 = false;
    for (std::size_t k = 0; k < bins; ++k) {
      cum += x[k];
      if (!have25 && cum >= 0.25 * total) {
        d.rolloff_25[f] = spectrogram.bin_hz(k);
        have25 = true;
      }
      if (cum >= 0.75 * total) {
        d.rolloff_75[f] = spectrogram.bin_hz(k);
        break;
      }
    }
  }
  return d;
}

AudioBuffer CoughOnlyAudio(const AudioBuffer& buffer,
                           const std::vector<CoughSegment>& segments) {
  if (segments.empty()) throw std::invalid_argument("cough-only audio: no segments");
  AudioBuffer out;
  out.sample_rate = buffer.sample_rate;
  std::size_t prev_end = 0;
  for (const auto& s : segments) {
    if (s.start >= s.end || s.end > buffer.size())
      throw std::invalid_argument("cough-only audio: segment outside buffer");
    if (s.start < prev_end)
      throw std::invalid_argument("cough-only audio: segments not sorted and disjoint");
    out.samples.insert(out.samples.end(), buffer.samples.begin() + s.start,
                       buffer.samples.begin() + s.end);
    prev_end = s.end;
  }
  return out;
}

SvmFeatureVector ComputeSvmFeatures(const AudioBuffer& buffer,
                                    const std::vector<CoughSegment>& segments,
                                    const SvmFeatureConfig& config) {
  if (segments.empty()) throw std::invalid_argument("svm features: no segments");
  AudioBuffer cough = CoughOnlyAudio(buffer, segments);
  if (cough.size() < static_cast<std::size_t>(config.stft.win_length))
    cough.samples.resize(config.stft.win_length, 0.0);

  const Spectrogram spec = StftMagnitude(cough, config.stft);
  const Matrix mfcc = Mfcc(spec, config.mfcc);
  const Matrix d1 = Delta(mfcc, config.mfcc.delta_r);
  const Matrix d2 = Delta(d1, config.mfcc.delta_r);
  const FrameDescriptors desc = ComputeFrameDescriptors(spec);
  const std::size_t nm = static_cast<std::size_t>(config.mfcc.n_mfcc);
  const std::size_t channels = 4 + 3 * nm;
  const std::size_t frames = spec.n_frames();

  Matrix per_frame(frames, channels);
  for (std::size_t f = 0; f < frames; ++f) {
    per_frame(f, 0) = desc.spectral_centroid[f];
    per_frame(f, 1) = desc.rolloff_25[f];
    per_frame(f, 2) = desc.rolloff_75[f];
    per_frame(f, 3) = desc.rms[f];
    for (std::size_t c = 0; c < nm; ++c) {
      per_frame(f, 4 + c) = mfcc(f, c);
      per_frame(f, 4 + nm + c) = d1(f, c);
      per_frame(f, 4 + 2 * nm + c) = d2(f, c);
    }
  }

  SvmFeatureVector v;
  v.values.assign(4 * channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0, lo = per_frame(0, c), hi = per_frame(0, c);
    for (std::size_t f = 0; f < frames; ++f) {
      const double x = per_frame(f, c);
      sum += x;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const double mean = sum / frames;
    double ss = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
      const double dev = per_frame(f, c) - mean;
      ss += dev * dev;
    }
    v.values[c] = mean;
    v.values[channels + c] = std::sqrt(ss / frames);
    v.values[2 * channels + c] = hi;
    v.values[3 * channels + c] = lo;
  }
  return v;
}

std::vector<std::string> SvmFeatureNames() {
  std::vector<std::string> channels = {"centroid", "rolloff_25", "rolloff_75", "rms"};
  for (const char* prefix : {"mfcc", "delta", "delta2"})
    for (int c = 0; c < 13; ++c) channels.push_back(prefix + std::to_string(c));
  std::vector<std::string> names;
  for (const char* stat : {"mean", "std", "max", "min"})
    for (const auto& ch : channels) names.push_back(std::string(stat) + "." + ch);
  return names;
}

std::vector<SvmFeatureVector> NormalizeFeatures(
    const std::vector<SvmFeatureVector>& vectors,
    const std::optional<FeatureStats>& stats, FeatureStats* out_stats) {
  FeatureStats s;
  if (stats) {
    s = *stats;
  } else {
    if (vectors.empty())
      throw std::invalid_argument("normalize: empty training set and no stats");
    const std::size_t d = vectors[0].values.size();
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    for (const auto& v : vectors) {
      if (v.values.size() != d) throw std::invalid_argument("normalize: length mismatch");
      for (std::size_t i = 0; i < d; ++i) s.mean[i] += v.values[i];
    }
    for (double& m : s.mean) m /= vectors.size();
    for (const auto& v : vectors)
      for (std::size_t i = 0; i < d; ++i) {
        const double dev = v.values[i] - s.mean[i];
        s.stddev[i] += dev * dev;
      }
    for (double& sd : s.stddev) sd = std::sqrt(sd / vectors.size());
  }
  std::vector<SvmFeatureVector> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.values.size() != s.mean.size())
      throw std::invalid_argument("normalize: length mismatch with stats");
    SvmFeatureVector n;
    n.values.resize(v.values.size());
    for (std::size_t i = 0; i < v.values.size(); ++i)
      n.values[i] = s.stddev[i] < 1e-12 ? 0.0 : (v.values[i] - s.mean[i]) / s.stddev[i];
    out.push_back(std::move(n));
  }
  if (out_stats) *out_stats = s;
  return out;
}

Matrix SonographFromFixedAudio(const std::vector<double>& audio) {
  if (audio.size() != kSonographSamples)
    throw std::invalid_argument("sonograph: audio must be exactly 65536 samples");
  static const MfccConfig config = SonographMfccConfig();
  static const Matrix bank = MelFilterbank(config, kSonographFft, kFeatureRate);
  static const Matrix dct = DctMatrix(kSonographCoeffs, kSonographCoeffs);
  const Matrix mags = FrameMagnitudes(audio, kSonographFft, kSonographHop,
                                      HannWindow(kSonographFft), kSonographFrames);
  const Matrix frames_by_coeff = MfccFromMagnitudes(mags, bank, dct, config.log_floor);
  Matrix out(kSonographCoeffs, kSonographFrames);
  for (std::size_t f = 0; f < frames_by_coeff.rows; ++f)
    for (std::size_t c = 0; c < frames_by_coeff.cols; ++c)
      out(c, f) = frames_by_coeff(f, c);
  return out;
}

Sonograph BuildSonograph(const AudioBuffer& buffer,
                         const std::vector<CoughSegment>& segments,
                         const AugmentSpec* augment, Rng* rng) {
  if (buffer.sample_rate != kFeatureRate)
    throw std::invalid_argument("sonograph: buffer must be 16 kHz");
  std::vector<double> audio = CoughOnlyAudio(buffer, segments).samples;
  audio.resize(kSonographSamples, 0.0);
  if (augment) {
    if (!rng) throw std::invalid_argument("sonograph: augmentation needs an rng");
    audio = AugmentAudio(audio, *augment, *rng);
  }
  Sonograph s;
  s.values = SonographFromFixedAudio(audio);
  return s;
}

}  // namespace coughgate
