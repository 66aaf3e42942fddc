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

#ifndef COUGHGATE_SYNTH_H_
#define COUGHGATE_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coughgate/audio_io.h"
#include "coughgate/dataset.h"
#include "coughgate/random.h"

namespace coughgate {

/// Toy two-class corpus: cough-like bursts of band-limited noise centered
/// near 600 Hz (positive) or 1.8 kHz (negative) over a low noise floor.
struct SynthOptions {
  int n_per_class = 100;
  double validation_fraction = 0.15;
  double test_fraction = 0.15;
  double duration_s = 2.0;
  double positive_hz = 600.0;
  double negative_hz = 1800.0;
  /// Relative jitter of the center frequency per burst.
  double frequency_jitter = 0.1;
  /// Standard deviation of the white background added to the whole clip.
  double floor_noise = 1e-4;
  /// Extra unlabeled training records (for self-supervised pretraining).
  int n_unlabeled = 0;

  void Validate() const;
};

/// One 16 kHz cough-like clip; deterministic given the rng state.
AudioBuffer SynthCough(double center_hz, const SynthOptions& options, Rng& rng);

/// Writes <out_dir>/audio/*.wav and <out_dir>/manifest.csv. Each class is
/// split by index into train, validation and test by the given fractions.
DatasetManifest SynthCorpus(const std::filesystem::path& out_dir, const SynthOptions& options,
                            std::uint64_t seed);

/// Biquad band-pass (constant peak gain) applied twice.
std::vector<double> BandPass(const std::vector<double>& x, double center_hz, double q,
                             int sample_rate);

}  // namespace coughgate

#endif  // COUGHGATE_SYNTH_H_
