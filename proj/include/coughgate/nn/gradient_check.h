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

#ifndef COUGHGATE_NN_GRADIENT_CHECK_H_
#define COUGHGATE_NN_GRADIENT_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>

#include "coughgate/nn/layers.h"

namespace coughgate::nn {

/// Scalar loss of a network output; fills `grad` with dL/d(output).
using LossFn = std::function<double(const Tensor<double>& output, Tensor<double>* grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // finite difference straddled a ReLU or pooling kink
  std::string worst;        // "layer:param[index]" of the largest error
};

struct GradCheckOptions {
  std::size_t samples = 200;  // all parameters when the network has fewer
  double step = 1e-5;
  std::uint64_t seed = 0;
};

/// Compares backprop gradients with central differences. Runs in eval mode so
/// dropout is off. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult GradientCheck(Network<double>& net, const Tensor<double>& x, const LossFn& loss,
                              const GradCheckOptions& options = {},
                              const std::vector<std::uint8_t>* frame_validity = nullptr);

}  // namespace coughgate::nn

#endif  // COUGHGATE_NN_GRADIENT_CHECK_H_
