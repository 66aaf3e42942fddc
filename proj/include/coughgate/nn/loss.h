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

#ifndef COUGHGATE_NN_LOSS_H_
#define COUGHGATE_NN_LOSS_H_

#include <cstdint>
#include <vector>

#include "coughgate/nn/tensor.h"

namespace coughgate::nn {

/// Mean binary cross-entropy of probabilities `p` (any shape, one value per
/// target). Probabilities are clamped to [1e-7, 1 - 1e-7] inside the log. If
/// `grad` is non-null it receives dL/dp with the shape of `p`.
template <typename T>
T BinaryCrossEntropy(const Tensor<T>& p, const std::vector<T>& targets, Tensor<T>* grad);

/// Mean squared error over the cells where mask != 0. Returns 0 (and a zero
/// gradient) when the mask is empty. An empty `mask` vector means all cells.
template <typename T>
T MaskedMse(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask,
            Tensor<T>* grad);

}  // namespace coughgate::nn

#endif  // COUGHGATE_NN_LOSS_H_
