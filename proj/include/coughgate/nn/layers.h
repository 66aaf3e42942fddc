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

#ifndef COUGHGATE_NN_LAYERS_H_
#define COUGHGATE_NN_LAYERS_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coughgate/nn/tensor.h"
#include "coughgate/random.h"
#include "json.hpp"

namespace coughgate::nn {

enum class LayerKind {
  kConv2d,
  kMaxPool2d,
  kGlobalAvgPool,
  kDense,
  kRelu,
  kDropout,
  kSigmoid,
  kLayerNorm,
  kMultiheadAttention,
  kFeedForward,
  kPositionalEncoding,
};

std::string ToString(LayerKind kind);
LayerKind ParseLayerKind(const std::string& name);

/// Declarative description of one layer. Which fields matter depends on kind:
///   conv2d: filters, window (kernel), stride ("same" padding)
///   maxpool2d: window, stride ("valid")
///   dense: units
///   dropout: rate
///   multihead_attention: heads, pre_norm, residual
///   feed_forward: hidden (inner width), pre_norm, residual
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int units = 0;
  int window_h = 0;
  int window_w = 0;
  int stride = 1;
  double rate = 0.0;
  int heads = 0;
  int hidden = 0;
  bool pre_norm = false;
  bool residual = false;

  static LayerSpec Conv2d(int filters, int window, int stride = 1);
  static LayerSpec MaxPool2d(int window, int stride);
  static LayerSpec GlobalAvgPool();
  static LayerSpec Dense(int units);
  static LayerSpec Relu();
  static LayerSpec Dropout(double rate);
  static LayerSpec Sigmoid();
  static LayerSpec LayerNorm();
  static LayerSpec MultiheadAttention(int heads, bool pre_norm = true, bool residual = true);
  static LayerSpec FeedForward(int hidden, bool pre_norm = true, bool residual = true);
  static LayerSpec PositionalEncoding();

  void Validate() const;
  nlohmann::json ToJson() const;
  static LayerSpec FromJson(const nlohmann::json& j);
  bool operator==(const LayerSpec&) const = default;
};

enum class Mode { kTrain, kEval };

/// Per-call state for a forward pass.
struct ForwardContext {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;  // required for dropout in train mode
  /// Sequence inputs [N, T, D]: 1 for real frames, 0 for padding, N*T entries.
  /// Null means every frame is valid.
  const std::vector<std::uint8_t>* frame_validity = nullptr;
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// One layer of a fixed sequence. Forward caches what Backward needs;
/// Backward consumes the cache, accumulates parameter gradients and returns
/// the gradient with respect to the layer input.
template <typename T>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(spec) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }

  /// Per-sample output shape for a per-sample input shape.
  virtual Shape OutputShape(const Shape& in) const = 0;
  /// Creates parameters for the given per-sample input shape.
  virtual void Build(const Shape& in, Rng& rng, bool relu_follows) {
    (void)in, (void)rng, (void)relu_follows;
  }
  virtual Tensor<T> Forward(const Tensor<T>& x, const ForwardContext& ctx) = 0;
  virtual Tensor<T> Backward(const Tensor<T>& dy) = 0;
  virtual std::vector<Param<T>*> Params() { return {}; }
  /// Appends the non-differentiable decisions of the last forward (ReLU
  /// signs, pooling argmaxes) so gradient audits can detect kink crossings.
  virtual void AppendPattern(std::vector<std::uint64_t>& out) const { (void)out; }
  virtual std::unique_ptr<Layer<T>> Clone() const = 0;

  /// When false, Backward may return an empty tensor instead of the input
  /// gradient (used for the first layer during training).
  void set_input_grad(bool needed) { input_grad_ = needed; }

 protected:
  void RequireCache() const;
  LayerSpec spec_;
  bool has_cache_ = false;
  bool input_grad_ = true;
};

template <typename T>
std::unique_ptr<Layer<T>> MakeLayer(const LayerSpec& spec);

/// A fixed layer sequence with exact reverse-mode gradients.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// x has a leading batch dimension followed by the per-sample input shape.
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext& ctx);
  /// Returns the gradient with respect to the network input, or an empty
  /// tensor when input gradients are disabled.
  Tensor<T> Backward(const Tensor<T>& dy);

  /// Training never needs d(loss)/d(input); disabling it skips that work in
  /// the first layer.
  void set_input_grad(bool needed);

  void ZeroGrad();
  std::vector<Param<T>*> Params();
  std::vector<const Param<T>*> Params() const;

  const std::vector<LayerSpec>& specs() const { return specs_; }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t num_layers() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }

  /// Per-sample output shape after each layer.
  std::vector<Shape> LayerOutputShapes() const;
  std::vector<std::size_t> LayerParameterCounts() const;
  std::size_t ParameterCount() const;
  /// Index of the layer owning each entry of Params().
  std::vector<std::size_t> ParamLayerIndex() const;

  std::vector<std::uint64_t> Pattern() const;

  /// Flat copy of all parameter values, and the reverse.
  std::vector<std::vector<T>> Snapshot() const;
  void Restore(const std::vector<std::vector<T>>& snapshot);

 private:
  std::vector<LayerSpec> specs_;
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Softmax attention weights of the last forward of an attention layer,
/// laid out [N, heads, T, T]. Throws if `layer` is not attention.
template <typename T>
const AlignedVector<T>& AttentionWeights(const Layer<T>& layer);

}  // namespace coughgate::nn

#endif  // COUGHGATE_NN_LAYERS_H_
