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

#ifndef COUGHGATE_AUGMENT_H_
#define COUGHGATE_AUGMENT_H_

#include <vector>

#include "coughgate/random.h"

namespace coughgate {

/// Time shift plus additive Gaussian noise, as applied to CNN training audio.
struct AugmentSpec {
  double shift_min_fraction = -0.5;
  double shift_max_fraction = 0.5;
  double shift_probability = 1.0;
  /// Noise RMS relative to signal RMS, drawn uniformly from this range.
  double noise_param_min = 0.25;
  double noise_param_max = 0.9;
  double noise_probability = 0.5;

  void Validate() const;
};

/// Shifts by round(fraction * length) samples (positive = later), zero-fills
/// the vacated region, then optionally adds noise. Draw order is fixed:
/// shift gate, shift fraction, noise gate, noise level, noise samples.
std::vector<double> AugmentAudio(const std::vector<double>& audio,
                                 const AugmentSpec& spec, Rng& rng);

/// The shift step alone, exposed for index-arithmetic tests.
std::vector<double> ShiftAudio(const std::vector<double>& audio, double fraction);

}  // namespace coughgate

#endif  // COUGHGATE_AUGMENT_H_
