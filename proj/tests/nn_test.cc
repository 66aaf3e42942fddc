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

#include <cmath>

#include "coughgate/cnn_model.h"
#include "coughgate/nn/checkpoint.h"
#include "coughgate/nn/gradient_check.h"
#include "coughgate/nn/layers.h"
#include "coughgate/nn/loss.h"
#include "coughgate/nn/optimizer.h"
#include "coughgate/ssl_model.h"
#include "doctest.h"

namespace coughgate::nn {
namespace {

Tensor<double> RandomTensor(Shape shape, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.Normal(0.0, sd);
  return t;
}

// Sum of squares against a fixed random target keeps gradients O(1).
LossFn QuadraticLoss(const Shape& out_shape, std::uint64_t seed) {
  const Tensor<double> target = RandomTensor(out_shape, seed);
  return [target](const Tensor<double>& out, Tensor<double>* grad) {
    double l = 0.0;
    if (grad) *grad = Tensor<double>(out.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = out.data[i] - target.data[i];
      l += 0.5 * d * d;
      if (grad) grad->data[i] = d;
    }
    return l;
  };
}

double AuditNetwork(const std::vector<LayerSpec>& specs, const Shape& in, std::uint64_t seed,
                    const std::vector<std::uint8_t>* validity = nullptr) {
  Network<double> net(specs, in, seed);
  Shape batch_in = in;
  batch_in.insert(batch_in.begin(), 2);
  if (validity) batch_in[1] = static_cast<int>(validity->size() / 2);
  const auto x = RandomTensor(batch_in, seed + 1);
  ForwardContext ctx;
  ctx.frame_validity = validity;
  const auto out_shape = net.Forward(x, ctx).shape;
  GradCheckOptions opt;
  opt.seed = seed;
  auto r = GradientCheck(net, x, QuadraticLoss(out_shape, seed + 2), opt, validity);
  INFO("worst " << r.worst << " checked " << r.checked << " skipped " << r.skipped);
  CHECK(r.checked >= std::min<std::size_t>(200, net.ParameterCount()));
  return r.max_rel_error;
}

TEST_CASE("every layer kind passes the finite-difference audit") {
  SUBCASE("conv2d stride 1 and 2") {
    CHECK(AuditNetwork({LayerSpec::Conv2d(3, 3, 1), LayerSpec::Conv2d(2, 5, 2)}, {6, 7, 2}, 1) <
          1e-4);
  }
  SUBCASE("maxpool") {
    CHECK(AuditNetwork({LayerSpec::Conv2d(3, 3), LayerSpec::MaxPool2d(2, 2)}, {6, 8, 1}, 2) < 1e-4);
  }
  SUBCASE("global average pool and dense") {
    CHECK(AuditNetwork({LayerSpec::Conv2d(3, 3), LayerSpec::GlobalAvgPool(), LayerSpec::Dense(2)},
                       {4, 5, 2}, 3) < 1e-4);
  }
  SUBCASE("relu and sigmoid") {
    CHECK(AuditNetwork({LayerSpec::Dense(8), LayerSpec::Relu(), LayerSpec::Dense(3),
                        LayerSpec::Sigmoid()},
                       {5}, 4) < 1e-4);
  }
  SUBCASE("dropout in eval mode") {
    CHECK(AuditNetwork({LayerSpec::Dense(4), LayerSpec::Dropout(0.3), LayerSpec::Dense(2)}, {3}, 5) <
          1e-4);
  }
  SUBCASE("layer norm") {
    CHECK(AuditNetwork({LayerSpec::Dense(6), LayerSpec::LayerNorm()}, {4, 5}, 6) < 1e-4);
  }
  SUBCASE("attention with padding") {
    std::vector<std::uint8_t> valid = {1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
    CHECK(AuditNetwork({LayerSpec::Dense(8), LayerSpec::PositionalEncoding(),
                        LayerSpec::MultiheadAttention(2)},
                       {5, 3}, 7, &valid) < 1e-4);
  }
  SUBCASE("feed forward") {
    CHECK(AuditNetwork({LayerSpec::FeedForward(7)}, {4, 6}, 8) < 1e-4);
  }
}

TEST_CASE("whole toy models pass the finite-difference audit") {
  SUBCASE("reduced sonograph CNN") {
    // Same topology as the full network, narrower and on a smaller image.
    const auto arch = CnnArchitecture::Scaled({2, 3, 3, 3, 3, 4}, 4);
    CHECK(AuditNetwork(arch.layers, {16, 32, 1}, 11) < 1e-4);
  }
  SUBCASE("toy transformer encoder") {
    const EncoderConfig cfg{1, 8, 2, 12, 6};
    std::vector<std::uint8_t> valid = {1, 1, 1, 1, 1, 1, 1, 1, 1, 0};
    CHECK(AuditNetwork(cfg.Specs(), {5, 6}, 12, &valid) < 1e-4);
  }
}

TEST_CASE("linear model with squared loss is exact") {
  Network<double> net({LayerSpec::Dense(1)}, {4}, 11);
  const auto x = RandomTensor({3, 4}, 12);
  auto r = GradientCheck(net, x, QuadraticLoss({3, 1}, 13));
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("attention rows sum to one and ignore padded keys") {
  Network<double> net({LayerSpec::MultiheadAttention(2)}, {4, 4}, 3);
  const auto x = RandomTensor({1, 4, 4}, 4);
  std::vector<std::uint8_t> valid = {1, 1, 1, 0};
  ForwardContext ctx;
  ctx.frame_validity = &valid;
  net.Forward(x, ctx);
  const auto& a = AttentionWeights(net.layer(0));
  for (int row = 0; row < 8; ++row) {
    double s = 0.0;
    for (int c = 0; c < 4; ++c) s += a[row * 4 + c];
    CHECK(std::abs(s - 1.0) < 1e-9);
    CHECK(a[row * 4 + 3] == 0.0);
  }
}

TEST_CASE("backward without forward is a stale cache") {
  Network<double> net({LayerSpec::Dense(2)}, {3}, 1);
  CHECK_THROWS_AS(net.Backward(Tensor<double>({1, 2})), std::logic_error);
}

TEST_CASE("inverted dropout preserves expectation") {
  Network<double> net({LayerSpec::Dropout(0.2)}, {1}, 1);
  Rng rng(5);
  ForwardContext ctx{Mode::kTrain, &rng, nullptr};
  Tensor<double> x({10000, 1}, 1.5);
  const auto y = net.Forward(x, ctx);
  double mean = 0.0;
  for (double v : y.data) mean += v;
  mean /= 10000.0;
  CHECK(std::abs(mean - 1.5) / 1.5 < 0.02);
}

TEST_CASE("dropout with rate zero is the identity") {
  Network<double> net({LayerSpec::Dropout(0.0)}, {4}, 1);
  Rng rng(1);
  const auto x = RandomTensor({2, 4}, 9);
  CHECK(net.Forward(x, {Mode::kTrain, &rng, nullptr}) == x);
  CHECK(net.Forward(x, {}) == x);
}

TEST_CASE("BCE through sigmoid gives p - y at the logit") {
  Network<double> net({LayerSpec::Sigmoid()}, {1}, 1);
  Tensor<double> z({3, 1}, std::vector<double>{-1.0, 0.3, 2.0});
  const auto p = net.Forward(z, {});
  std::vector<double> y = {0.0, 1.0, 1.0};
  Tensor<double> g;
  BinaryCrossEntropy(p, y, &g);
  const auto dz = net.Backward(g);
  for (int i = 0; i < 3; ++i) CHECK(dz.data[i] * 3.0 == doctest::Approx(p.data[i] - y[i]).epsilon(1e-12));
}

TEST_CASE("masked MSE ignores unmasked cells") {
  Tensor<double> pred({1, 4}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> t1({1, 4}, std::vector<double>{0, 2, 9, 4});
  Tensor<double> t2({1, 4}, std::vector<double>{0, -50, 9, 70});
  std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  CHECK(MaskedMse<double>(pred, t1, mask, nullptr) == MaskedMse<double>(pred, t2, mask, nullptr));
  CHECK(MaskedMse<double>(pred, t1, mask, nullptr) == doctest::Approx((1.0 + 36.0) / 2.0));
}

TEST_CASE("optimizers") {
  Param<double> p;
  p.name = "w";
  p.value = Tensor<double>({3}, std::vector<double>{1.0, -2.0, 0.5});
  p.grad = Tensor<double>({3}, std::vector<double>{0.3, -4.0, 0.0});
  SUBCASE("adamax first step moves by lr * sign(g)") {
    Optimizer<double> opt(OptimizerConfig::Adamax(1e-3));
    opt.Step({&p});
    CHECK(p.value.data[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
    CHECK(p.value.data[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-9));
    CHECK(p.value.data[2] == 0.5);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    p.grad = Tensor<double>({3});
    const auto before = p.value;
    Optimizer<double> opt(OptimizerConfig::Adamax(1e-3));
    opt.Step({&p});
    CHECK(p.value == before);
  }
  SUBCASE("adamw schedule") {
    LrSchedule s{1e-4, 100, 1000};
    CHECK(s.At(0) == 0.0);
    CHECK(s.At(100) == 1e-4);
    CHECK(s.At(50) == doctest::Approx(5e-5));
    CHECK(s.At(1000) == 0.0);
    Optimizer<double> opt(OptimizerConfig::AdamW(1e-4, 100, 1000));
    const auto before = p.value;
    opt.Step({&p});  // step 0 has lr 0
    CHECK(p.value == before);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "coughgate_nn_test";
  std::filesystem::create_directories(dir);
  Network<float> net({LayerSpec::Conv2d(2, 3), LayerSpec::Relu(), LayerSpec::GlobalAvgPool(),
                      LayerSpec::Dense(1), LayerSpec::Sigmoid()},
                     {4, 4, 1}, 7);
  SaveCheckpoint(net, dir / "m.ckpt", {{"epoch", 3}});
  auto loaded = LoadNetwork<float>(dir / "m.ckpt");
  CHECK(loaded.Snapshot() == net.Snapshot());
  CHECK(ReadSidecar(dir / "m.ckpt")["epoch"] == 3);
  Network<float> other({LayerSpec::Dense(3)}, {4}, 1);
  CHECK_THROWS_AS(LoadWeights(other, dir / "m.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace coughgate::nn
