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

#ifndef COUGHGATE_FFT_H_
#define COUGHGATE_FFT_H_

#include <complex>
#include <span>
#include <vector>

namespace coughgate {

/// Iterative radix-2 FFT for a fixed power-of-two size.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  /// In-place forward transform (no scaling).
  void Forward(std::span<std::complex<double>> data) const;

  /// Magnitudes of bins 0..n/2 of a real input of length <= n (zero padded).
  void RealMagnitudes(std::span<const double> input,
                      std::span<double> magnitudes) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddles_;
  mutable std::vector<std::complex<double>> scratch_;
};

bool IsPowerOfTwo(std::size_t n);

}  // namespace coughgate

#endif  // COUGHGATE_FFT_H_
