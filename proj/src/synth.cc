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

#include "coughgate/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace coughgate {

void SynthOptions::Validate() const {
  if (n_per_class < 1) throw std::invalid_argument("synth: n_per_class must be >= 1");
  if (validation_fraction < 0 || test_fraction < 0 || validation_fraction + test_fraction >= 1.0)
    throw std::invalid_argument("synth: split fractions must be >= 0 and sum below 1");
  if (duration_s < 1.0) throw std::invalid_argument("synth: duration must be >= 1 s");
  if (!(positive_hz > 0) || !(negative_hz > 0) || positive_hz * 2 >= kFeatureRate ||
      negative_hz * 2 >= kFeatureRate)
    throw std::invalid_argument("synth: center frequencies must lie below Nyquist");
  if (frequency_jitter < 0 || frequency_jitter >= 0.5)
    throw std::invalid_argument("synth: frequency jitter must lie in [0, 0.5)");
  if (n_unlabeled < 0) throw std::invalid_argument("synth: n_unlabeled must be >= 0");
  if (floor_noise < 0) throw std::invalid_argument("synth: floor noise must be >= 0");
}

std::vector<double> BandPass(const std::vector<double>& x, double center_hz, double q,
                             int sample_rate) {
  const double w0 = 2.0 * M_PI * center_hz / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::vector<double> y = x;
  for (int pass = 0; pass < 2; ++pass) {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : y) {
      const double in = v;
      const double out = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1, x1 = in, y2 = y1, y1 = out;
      v = out;
    }
  }
  return y;
}

AudioBuffer SynthCough(double center_hz, const SynthOptions& options, Rng& rng) {
  const int sr = kFeatureRate;
  const auto n = static_cast<std::size_t>(options.duration_s * sr);
  std::vector<double> out(n, 0.0);
  // Bursts start after a quiet lead-in and never overlap.
  const int bursts = 1 + static_cast<int>(rng.UniformInt(3));
  std::size_t cursor = static_cast<std::size_t>(rng.Uniform(0.15, 0.3) * sr);
  for (int b = 0; b < bursts; ++b) {
    const auto len = static_cast<std::size_t>(rng.Uniform(0.2, 0.35) * sr);
    if (cursor + len + sr / 10 > n) break;
    const double f = center_hz * (1.0 + rng.Uniform(-options.frequency_jitter, options.frequency_jitter));
    std::vector<double> noise(len);
    for (auto& v : noise) v = rng.Normal();
    noise = BandPass(noise, f, rng.Uniform(2.0, 4.0), sr);
    // Unit RMS per burst keeps bursts of one clip at comparable loudness.
    double ss = 0.0;
    for (double v : noise) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(len));
    for (auto& v : noise) v /= rms > 0 ? rms : 1.0;
    // Fast attack, a sustained phase, then exponential decay.
    const double attack = rng.Uniform(0.008, 0.02) * sr;
    const double hold = attack + rng.Uniform(0.08, 0.14) * sr;
    const double decay = rng.Uniform(0.04, 0.08) * sr;
    const double gain = rng.Uniform(0.8, 1.0);
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i);
      const double env = t < attack ? t / attack : t < hold ? 1.0 : std::exp(-(t - hold) / decay);
      out[cursor + i] += gain * env * noise[i];
    }
    cursor += len + static_cast<std::size_t>(rng.Uniform(0.12, 0.3) * sr);
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  const double target = rng.Uniform(0.6, 0.8);
  for (auto& v : out) v = v * (peak > 0 ? target / peak : 0.0) + rng.Normal(0.0, options.floor_noise);
  AudioBuffer buf;
  buf.samples = std::move(out);
  buf.sample_rate = sr;
  return buf;
}

DatasetManifest SynthCorpus(const std::filesystem::path& out_dir, const SynthOptions& options,
                            std::uint64_t seed) {
  options.Validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  if (ec) throw std::runtime_error("synth: cannot create " + (out_dir / "audio").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  const int n = options.n_per_class;
  const int n_val = static_cast<int>(std::lround(options.validation_fraction * n));
  const int n_test = static_cast<int>(std::lround(options.test_fraction * n));
  const int n_train = n - n_val - n_test;
  auto add = [&](const std::string& id, Label label, Split split, double hz, std::uint64_t tag) {
    Rng rng(MixSeed(seed, tag));
    const AudioBuffer audio = SynthCough(hz, options, rng);
    DatasetRecord r;
    r.id = id;
    r.audio_path = "audio/" + id + ".wav";
    r.label = label;
    r.split = split;
    r.source = "synthetic";
    r.metadata["center_hz"] = std::to_string(static_cast<int>(hz));
    WriteWavFile(out_dir / r.audio_path, audio);
    manifest.records.push_back(std::move(r));
  };
  char id[32];
  for (int cls = 0; cls < 2; ++cls) {
    const bool pos = cls == 0;
    for (int i = 0; i < n; ++i) {
      const Split split = i < n_train ? Split::kTrain : i < n_train + n_val ? Split::kValidation : Split::kTest;
      std::snprintf(id, sizeof(id), "%s_%04d", pos ? "pos" : "neg", i);
      add(id, pos ? Label::kPositive : Label::kNegative, split,
          pos ? options.positive_hz : options.negative_hz,
          (static_cast<std::uint64_t>(cls) << 32) | static_cast<std::uint64_t>(i));
    }
  }
  for (int i = 0; i < options.n_unlabeled; ++i) {
    std::snprintf(id, sizeof(id), "unl_%04d", i);
    Rng pick(MixSeed(seed, (2ULL << 32) | static_cast<std::uint64_t>(i)));
    const double hz = pick.Bernoulli(0.5) ? options.positive_hz : options.negative_hz;
    add(id, Label::kUnlabeled, Split::kTrain, hz, (3ULL << 32) | static_cast<std::uint64_t>(i));
  }
  WriteManifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace coughgate
