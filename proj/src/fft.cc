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

#include "coughgate/fft.h"

#include <cmath>
#include <stdexcept>

namespace coughgate {

bool IsPowerOfTwo(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

Fft::Fft(std::size_t n) : n_(n), bitrev_(n), twiddles_(n / 2), scratch_(n) {
  if (!IsPowerOfTwo(n)) throw std::invalid_argument("FFT size must be a power of two");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    bitrev_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = {std::cos(a), std::sin(a)};
  }
}

void Fft::Forward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw std::invalid_argument("FFT input size mismatch");
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> t = twiddles_[k * step] * data[start + k + half];
        data[start + k + half] = data[start + k] - t;
        data[start + k] += t;
      }
    }
  }
}

void Fft::RealMagnitudes(std::span<const double> input,
                         std::span<double> magnitudes) const {
  if (input.size() > n_) throw std::invalid_argument("FFT frame longer than size");
  if (magnitudes.size() != n_ / 2 + 1)
    throw std::invalid_argument("magnitude buffer must hold n/2+1 bins");
  for (std::size_t i = 0; i < n_; ++i)
    scratch_[i] = i < input.size() ? std::complex<double>(input[i], 0.0)
                                   : std::complex<double>(0.0, 0.0);
  Forward(scratch_);
  for (std::size_t k = 0; k <= n_ / 2; ++k) magnitudes[k] = std::abs(scratch_[k]);
}

}  // namespace coughgate
