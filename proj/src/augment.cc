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

#include "coughgate/augment.h"

#include <cmath>
#include <stdexcept>

namespace coughgate {

void AugmentSpec::Validate() const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!in(shift_min_fraction, -1, 1) || !in(shift_max_fraction, -1, 1) ||
      shift_min_fraction > shift_max_fraction)
    throw std::invalid_argument("augment: shift fractions must lie in [-1, 1]");
  if (!in(shift_probability, 0, 1) || !in(noise_probability, 0, 1))
    throw std::invalid_argument("augment: probabilities must lie in [0, 1]");
  if (noise_param_min < 0 || noise_param_min > noise_param_max)
    throw std::invalid_argument("augment: invalid noise range");
}

std::vector<double> ShiftAudio(const std::vector<double>& audio, double fraction) {
  const auto n = static_cast<long>(audio.size());
  const long shift = std::lround(fraction * static_cast<double>(n));
  std::vector<double> out(audio.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    const long j = i + shift;
    if (j >= 0 && j < n) out[j] = audio[i];
  }
  return out;
}

std::vector<double> AugmentAudio(const std::vector<double>& audio,
                                 const AugmentSpec& spec, Rng& rng) {
  std::vector<double> out = audio;
  if (rng.Bernoulli(spec.shift_probability)) {
    const double f = rng.Uniform(spec.shift_min_fraction, spec.shift_max_fraction);
    out = ShiftAudio(out, f);
  }
  if (rng.Bernoulli(spec.noise_probability)) {
    const double level = rng.Uniform(spec.noise_param_min, spec.noise_param_max);
    double energy = 0.0;
    for (double x : out) energy += x * x;
    const double rms = out.empty() ? 0.0 : std::sqrt(energy / out.size());
    const double sigma = level * rms;
    for (double& x : out) x += rng.Normal(0.0, sigma);
  }
  return out;
}

}  // namespace coughgate
