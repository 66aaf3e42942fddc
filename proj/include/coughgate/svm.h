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

#ifndef COUGHGATE_SVM_H_
#define COUGHGATE_SVM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coughgate/dsp_features.h"
#include "json.hpp"

namespace coughgate {

struct SvmParams {
  double C = 1.0;
  double gamma = 0.0;  // 0 selects 1 / (d * var(features)) at training time
  double tolerance = 1e-3;
  int max_passes = 1000;  // full sweeps over the training set
  /// Multipliers on C for each class; 1/1 means no class weighting.
  double positive_weight = 1.0;
  double negative_weight = 1.0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static SvmParams FromJson(const nlohmann::json& j);
};

struct PlattParams {
  double A = 0.0;
  double B = 0.0;
  bool converged = true;
  int iterations = 0;
};

struct SvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> alphas;  // alpha_i * y_i of each support vector
  double bias = 0.0;
  SvmParams params;            // gamma always resolved
  std::size_t dimension = 0;
  PlattParams platt;
  std::optional<FeatureStats> stats;  // applied by the *Raw entry points
};

struct SvmTrainResult {
  SvmModel model;
  std::vector<double> duals;  // alpha_i for every training vector, >= 0
  int passes = 0;
  bool converged = false;     // every KKT condition held within tolerance
};

/// SMO on the RBF dual. Labels are +1 / -1. Working pairs: every training
/// vector that violates KKT in a seeded-shuffle sweep is paired with the
/// partner maximizing |E_i - E_j|; other partners are tried if that fails.
SvmTrainResult TrainSvm(const std::vector<std::vector<double>>& vectors,
                        const std::vector<int>& labels, SvmParams params,
                        std::uint64_t seed);

double RbfKernel(const std::vector<double>& a, const std::vector<double>& b, double gamma);

/// sum_i alpha_i y_i exp(-gamma ||x - x_i||^2) + bias.
double DecisionValue(const SvmModel& model, const std::vector<double>& x);

/// Platt's sigmoid fit by Newton steps with backtracking, using smoothed
/// targets. Labels are +1 / -1 (or 1 / 0).
PlattParams FitPlatt(const std::vector<double>& scores, const std::vector<int>& labels,
                     int max_iter = 100, double tol = 1e-10);

/// 1 / (1 + exp(A f + B)), kept strictly inside (0, 1).
double PlattProbability(const PlattParams& platt, double decision_value);

double PredictProba(const SvmModel& model, const std::vector<double>& x);

/// Same as above on un-normalized vectors, using model.stats.
double DecisionValueRaw(const SvmModel& model, const std::vector<double>& raw);
double PredictProbaRaw(const SvmModel& model, const std::vector<double>& raw);

inline constexpr int kSvmModelVersion = 1;
nlohmann::json SvmModelToJson(const SvmModel& model);
SvmModel SvmModelFromJson(const nlohmann::json& j);

}  // namespace coughgate

#endif  // COUGHGATE_SVM_H_
