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

#include "coughgate/nn/optimizer.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coughgate::nn {

std::string ToString(OptimizerKind kind) {
  return kind == OptimizerKind::kAdamax ? "adamax" : "adamw";
}

double LrSchedule::At(std::int64_t step) const {
  if (total <= 0) return max_lr;
  if (step < 0) return 0.0;
  if (step < warmup) return max_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total) return 0.0;
  return max_lr * (static_cast<double>(total - step) / static_cast<double>(total - warmup));
}

void LrSchedule::Validate() const {
  if (!(max_lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (warmup < 0 || total < 0) throw std::invalid_argument("schedule steps must be >= 0");
  if (total > 0 && warmup > total) throw std::invalid_argument("warmup exceeds total steps");
}

OptimizerConfig OptimizerConfig::Adamax(double lr) {
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdamax;
  c.schedule.max_lr = lr;
  c.eps = 1e-7;
  return c;
}

OptimizerConfig OptimizerConfig::AdamW(double max_lr, std::int64_t warmup, std::int64_t total,
                                       double weight_decay) {
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdamW;
  c.schedule = {max_lr, warmup, total};
  c.eps = 1e-8;
  c.weight_decay = weight_decay;
  return c;
}

void OptimizerConfig::Validate() const {
  schedule.Validate();
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("optimizer betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("optimizer eps must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
}

nlohmann::json OptimizerConfig::ToJson() const {
  return {{"kind", ToString(kind)},       {"max_lr", schedule.max_lr},
          {"warmup", schedule.warmup},    {"total", schedule.total},
          {"beta1", beta1},               {"beta2", beta2},
          {"eps", eps},                   {"weight_decay", weight_decay}};
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config) : config_(config) {
  config_.Validate();
}

template <typename T>
void Optimizer<T>::Step(const std::vector<Param<T>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }
  if (params.size() != m_.size()) throw std::invalid_argument("optimizer: parameter list changed");
  const double lr = config_.schedule.At(step_);
  ++step_;
  const double t = static_cast<double>(step_);
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  const T eps = static_cast<T>(config_.eps);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    if (p.value.size() != m_[k].size() || p.grad.size() != p.value.size())
      throw std::invalid_argument("optimizer: shape mismatch for " + p.name);
    auto& m = m_[k];
    auto& v = v_[k];
    if (config_.kind == OptimizerKind::kAdamax) {
      const T step = static_cast<T>(lr / bc1);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const T g = p.grad.data[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = std::max(b2 * v[i], std::abs(g));
        p.value.data[i] -= step * m[i] / (v[i] + eps);
      }
    } else {
      const double bc2 = 1.0 - std::pow(config_.beta2, t);
      const T decay = static_cast<T>(1.0 - lr * config_.weight_decay);
      const T a = static_cast<T>(lr / bc1);
      const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
      for (std::size_t i = 0; i < m.size(); ++i) {
        const T g = p.grad.data[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        p.value.data[i] = p.value.data[i] * decay - a * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
      }
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace coughgate::nn
