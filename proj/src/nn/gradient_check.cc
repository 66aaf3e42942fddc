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

#include "coughgate/nn/gradient_check.h"

#include <algorithm>
#include <cmath>

namespace coughgate::nn {

namespace {

double RelError(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

}  // namespace

GradCheckResult GradientCheck(Network<double>& net, const Tensor<double>& x, const LossFn& loss,
                              const GradCheckOptions& options,
                              const std::vector<std::uint8_t>* frame_validity) {
  ForwardContext ctx;
  ctx.mode = Mode::kEval;
  ctx.frame_validity = frame_validity;

  auto eval_loss = [&](const Tensor<double>& in, std::vector<std::uint64_t>* pattern) {
    const Tensor<double> out = net.Forward(in, ctx);
    if (pattern) *pattern = net.Pattern();
    return loss(out, nullptr);
  };

  net.ZeroGrad();
  Tensor<double> out = net.Forward(x, ctx);
  const auto base_pattern = net.Pattern();
  Tensor<double> g;
  loss(out, &g);
  net.Backward(g);

  auto params = net.Params();
  const auto owner = net.ParamLayerIndex();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) coords.emplace_back(k, i);
  Rng rng(options.seed);
  rng.Shuffle(coords);
  if (coords.size() > options.samples) coords.resize(options.samples);

  GradCheckResult result;
  auto consider = [&](double analytic, double numeric, const std::string& where) {
    const double e = RelError(analytic, numeric);
    ++result.checked;
    if (e > result.max_rel_error || result.worst.empty()) {
      result.max_rel_error = e;
      result.worst = where;
    }
  };

  std::vector<std::uint64_t> pat_plus, pat_minus;
  for (auto [k, i] : coords) {
    double& w = params[k]->value.data[i];
    const double saved = w;
    w = saved + options.step;
    const double lp = eval_loss(x, &pat_plus);
    w = saved - options.step;
    const double lm = eval_loss(x, &pat_minus);
    w = saved;
    if (pat_plus != base_pattern || pat_minus != base_pattern) {
      ++result.skipped;
      continue;
    }
    consider(params[k]->grad.data[i], (lp - lm) / (2.0 * options.step),
             std::to_string(owner[k]) + ":" + params[k]->name + "[" + std::to_string(i) + "]");
  }

  return result;
}

}  // namespace coughgate::nn
