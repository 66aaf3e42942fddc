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

#ifndef COUGHGATE_NN_OPTIMIZER_H_
#define COUGHGATE_NN_OPTIMIZER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "coughgate/nn/layers.h"
#include "json.hpp"

namespace coughgate::nn {

enum class OptimizerKind { kAdamax, kAdamW };

std::string ToString(OptimizerKind kind);

/// Linear warmup from zero to max_lr over `warmup` steps, then linear decay
/// to zero at `total`. total == 0 means a constant rate.
struct LrSchedule {
  double max_lr = 1e-4;
  std::int64_t warmup = 0;
  std::int64_t total = 0;

  double At(std::int64_t step) const;
  void Validate() const;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamax;
  LrSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  double weight_decay = 0.0;

  static OptimizerConfig Adamax(double lr);
  static OptimizerConfig AdamW(double max_lr, std::int64_t warmup, std::int64_t total,
                               double weight_decay = 0.01);
  void Validate() const;
  nlohmann::json ToJson() const;
};

/// Moments are allocated on the first step from the parameter shapes; the
/// parameter list must stay the same afterwards.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Applies one update using the gradients stored in `params`. The update
  /// with index t (starting at 0) uses schedule.At(t).
  void Step(const std::vector<Param<T>*>& params);

  std::int64_t step() const { return step_; }
  const OptimizerConfig& config() const { return config_; }
  double CurrentLr() const { return config_.schedule.At(step_); }

 private:
  OptimizerConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;  // second moment (AdamW) or infinity norm (Adamax)
};

}  // namespace coughgate::nn

#endif  // COUGHGATE_NN_OPTIMIZER_H_
