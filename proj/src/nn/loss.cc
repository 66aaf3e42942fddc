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

#include "coughgate/nn/loss.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coughgate::nn {

template <typename T>
T BinaryCrossEntropy(const Tensor<T>& p, const std::vector<T>& targets, Tensor<T>* grad) {
  if (p.size() != targets.size() || p.size() == 0)
    throw std::invalid_argument("bce: " + std::to_string(p.size()) + " predictions vs " +
                                std::to_string(targets.size()) + " targets");
  const T eps = static_cast<T>(1e-7);
  const T n = static_cast<T>(p.size());
  if (grad) *grad = Tensor<T>(p.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T y = targets[i];
    const T q = std::clamp(p.data[i], eps, T(1) - eps);
    loss -= y * std::log(q) + (T(1) - y) * std::log(T(1) - q);
    // Unclamped derivative keeps (p - y) exact through a sigmoid.
    if (grad) {
      const T pi = p.data[i];
      const T denom = std::max(pi * (T(1) - pi), eps * eps);
      grad->data[i] = (pi - y) / denom / n;
    }
  }
  return static_cast<T>(loss / static_cast<double>(p.size()));
}

template <typename T>
T MaskedMse(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask,
            Tensor<T>* grad) {
  if (pred.shape != target.shape)
    throw std::invalid_argument("mse: shape " + ShapeString(pred.shape) + " vs " +
                                ShapeString(target.shape));
  if (!mask.empty() && mask.size() != pred.size())
    throw std::invalid_argument("mse: mask size mismatch");
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) count += mask.empty() || mask[i] ? 1 : 0;
  if (grad) *grad = Tensor<T>(pred.shape);
  if (count == 0) return T(0);
  double loss = 0.0;
  const T scale = T(2) / static_cast<T>(count);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const T d = pred.data[i] - target.data[i];
    loss += static_cast<double>(d) * d;
    if (grad) grad->data[i] = scale * d;
  }
  return static_cast<T>(loss / static_cast<double>(count));
}

template float BinaryCrossEntropy<float>(const Tensor<float>&, const std::vector<float>&,
                                         Tensor<float>*);
template double BinaryCrossEntropy<double>(const Tensor<double>&, const std::vector<double>&,
                                           Tensor<double>*);
template float MaskedMse<float>(const Tensor<float>&, const Tensor<float>&,
                                const std::vector<std::uint8_t>&, Tensor<float>*);
template double MaskedMse<double>(const Tensor<double>&, const Tensor<double>&,
                                  const std::vector<std::uint8_t>&, Tensor<double>*);

}  // namespace coughgate::nn
