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

#include "coughgate/nn/layers.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coughgate::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapRow = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

void CheckSampleShape(const Shape& full, const Shape& expected, LayerKind kind) {
  if (full.empty() || Shape(full.begin() + 1, full.end()) != expected)
    throw std::invalid_argument(ToString(kind) + ": input shape " + ShapeString(full) +
                                " does not match expected [N]" + ShapeString(expected));
}

// Layers that act on the last axis accept any leading extent (sequence length).
void CheckLastDim(const Shape& full, const Shape& expected, LayerKind kind) {
  if (full.size() != expected.size() + 1 || full.back() != expected.back())
    throw std::invalid_argument(ToString(kind) + ": input shape " + ShapeString(full) +
                                " does not match expected [N]" + ShapeString(expected));
}

template <typename T>
void FillUniform(Tensor<T>& t, double limit, Rng& rng) {
  for (auto& v : t.data) v = static_cast<T>(rng.Uniform(-limit, limit));
}

template <typename T>
Param<T> MakeParam(std::string name, Shape shape) {
  Param<T> p;
  p.name = std::move(name);
  p.value = Tensor<T>(shape);
  p.grad = Tensor<T>(std::move(shape));
  return p;
}

double HeLimit(int fan_in) { return std::sqrt(6.0 / fan_in); }
double XavierLimit(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

template <typename V>
std::uint64_t PackBits(const V& bits) {
  // FNV-1a over the bit sequence; collisions only weaken kink detection.
  std::uint64_t h = 1469598103934665603ULL;
  for (bool b : bits) h = (h ^ (b ? 1u : 0u)) * 1099511628211ULL;
  return h;
}

// Layer normalization over the last dimension of a [rows x D] block.
template <typename T>
struct LayerNormCore {
  static constexpr double kEps = 1e-5;
  Param<T> gamma;
  Param<T> beta;
  AlignedVector<T> xhat;
  AlignedVector<T> inv_std;
  int width = 0;

  void Build(int d, const std::string& prefix) {
    width = d;
    gamma = MakeParam<T>(prefix + "gamma", {d});
    beta = MakeParam<T>(prefix + "beta", {d});
    std::fill(gamma.value.data.begin(), gamma.value.data.end(), T(1));
  }

  void Forward(const T* x, T* y, std::size_t rows) {
    const auto d = static_cast<std::size_t>(width);
    xhat.resize(rows * d);
    inv_std.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = x + r * d;
      double mean = 0.0;
      for (std::size_t i = 0; i < d; ++i) mean += xr[i];
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
      var /= static_cast<double>(d);
      const double inv = 1.0 / std::sqrt(var + kEps);
      inv_std[r] = static_cast<T>(inv);
      for (std::size_t i = 0; i < d; ++i) {
        const T h = static_cast<T>((xr[i] - mean) * inv);
        xhat[r * d + i] = h;
        y[r * d + i] = gamma.value[i] * h + beta.value[i];
      }
    }
  }

  void Backward(const T* dy, T* dx, std::size_t rows) {
    const auto d = static_cast<std::size_t>(width);
    AlignedVector<T> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* g = dy + r * d;
      const T* h = xhat.data() + r * d;
      T sum_dxhat = 0, sum_dxhat_h = 0;
      for (std::size_t i = 0; i < d; ++i) {
        gamma.grad[i] += g[i] * h[i];
        beta.grad[i] += g[i];
        dxhat[i] = g[i] * gamma.value[i];
        sum_dxhat += dxhat[i];
        sum_dxhat_h += dxhat[i] * h[i];
      }
      const T scale = inv_std[r] / static_cast<T>(d);
      for (std::size_t i = 0; i < d; ++i)
        dx[r * d + i] = scale * (static_cast<T>(d) * dxhat[i] - sum_dxhat - h[i] * sum_dxhat_h);
    }
  }
};

// --- Conv2d ------------------------------------------------------------------

template <typename T>
class Conv2dLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Shape OutputShape(const Shape& in) const override {
    if (in.size() != 3) throw std::invalid_argument("conv2d: expects [H, W, C] input");
    const int s = this->spec_.stride;
    return {(in[0] + s - 1) / s, (in[1] + s - 1) / s, this->spec_.units};
  }

  void Build(const Shape& in, Rng& rng, bool) override {
    in_ = in;
    out_ = OutputShape(in);
    const auto& sp = this->spec_;
    const int s = sp.stride;
    pad_top_ = std::max((out_[0] - 1) * s + sp.window_h - in[0], 0) / 2;
    pad_left_ = std::max((out_[1] - 1) * s + sp.window_w - in[1], 0) / 2;
    const int fan_in = sp.window_h * sp.window_w * in[2];
    weight_ = MakeParam<T>("weight", {sp.window_h, sp.window_w, in[2], sp.units});
    bias_ = MakeParam<T>("bias", {sp.units});
    FillUniform(weight_.value, HeLimit(fan_in), rng);

  }

  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    CheckSampleShape(x.shape, in_, LayerKind::kConv2d);
    const int n = x.dim(0);
    const int rows = out_[0] * out_[1];
    const int k = this->spec_.window_h * this->spec_.window_w * in_[2];
    const int f = this->spec_.units;
    Tensor<T> y({n, out_[0], out_[1], f});
    col_.resize(static_cast<std::size_t>(rows) * k);
    CMapMat<T> w(weight_.value.ptr(), k, f);
    MapRow<T> b(bias_.value.ptr(), f);
    for (int i = 0; i < n; ++i) {
      Im2Col(x.ptr() + static_cast<std::size_t>(i) * NumElements(in_));
      MapMat<T> out(y.ptr() + static_cast<std::size_t>(i) * rows * f, rows, f);
      out.noalias() = CMapMat<T>(col_.data(), rows, k) * w;
      out.rowwise() += b;
    }
    x_ = x;
    this->has_cache_ = true;
    return y;
  }

  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    const int n = x_.dim(0);
    const int rows = out_[0] * out_[1];
    const int k = this->spec_.window_h * this->spec_.window_w * in_[2];
    const int f = this->spec_.units;
    Tensor<T> dx;
    if (this->input_grad_) dx = Tensor<T>(x_.shape);
    AlignedVector<T> dcol(this->input_grad_ ? static_cast<std::size_t>(rows) * k : 0);
    CMapMat<T> w(weight_.value.ptr(), k, f);
    MapMat<T> dw(weight_.grad.ptr(), k, f);
    MapRow<T> db(bias_.grad.ptr(), f);
    for (int i = 0; i < n; ++i) {
      Im2Col(x_.ptr() + static_cast<std::size_t>(i) * NumElements(in_));
      CMapMat<T> g(dy.ptr() + static_cast<std::size_t>(i) * rows * f, rows, f);
      CMapMat<T> col(col_.data(), rows, k);
      dw.noalias() += col.transpose() * g;
      db += g.colwise().sum();
      if (!this->input_grad_) continue;
      MapMat<T>(dcol.data(), rows, k).noalias() = g * w.transpose();
      Col2Im(dcol, dx.ptr() + static_cast<std::size_t>(i) * NumElements(in_));
    }
    this->has_cache_ = false;
    x_ = Tensor<T>();
    return dx;
  }

  std::vector<Param<T>*> Params() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> Clone() const override {
    return std::make_unique<Conv2dLayer>(*this);
  }

 private:
  // For a fixed kernel row the (kx, channel) cells are one contiguous run
  // of the input, clipped at the left/right border.
  template <typename Fn>
  void ForEachRun(Fn&& fn) const {
    const auto& sp = this->spec_;
    const int c = in_[2], kw = sp.window_w, s = sp.stride;
    const std::size_t row_len = static_cast<std::size_t>(kw) * c;
    std::size_t off = 0;
    for (int oy = 0; oy < out_[0]; ++oy)
      for (int ox = 0; ox < out_[1]; ++ox) {
        const int ix0 = ox * s - pad_left_;
        const int lo = std::max(0, -ix0), hi = std::min(kw, in_[1] - ix0);
        for (int ky = 0; ky < sp.window_h; ++ky, off += row_len) {
          const int iy = oy * s - pad_top_ + ky;
          if (iy < 0 || iy >= in_[0] || hi <= lo) {
            fn(off, std::size_t{0}, std::size_t{0}, std::size_t{0});
            continue;
          }
          fn(off, static_cast<std::size_t>(lo) * c,
             (static_cast<std::size_t>(iy) * in_[1] + ix0 + lo) * c,
             static_cast<std::size_t>(hi - lo) * c);
        }
      }
  }

  void Im2Col(const T* x) {
    T* col = col_.data();
    const std::size_t row_len = static_cast<std::size_t>(this->spec_.window_w) * in_[2];
    ForEachRun([&](std::size_t off, std::size_t dst, std::size_t src, std::size_t len) {
      T* row = col + off;
      std::fill(row, row + dst, T(0));
      std::copy_n(x + src, len, row + dst);
      std::fill(row + dst + len, row + row_len, T(0));
    });
  }

  void Col2Im(const AlignedVector<T>& dcol, T* dx) const {
    ForEachRun([&](std::size_t off, std::size_t dst, std::size_t src, std::size_t len) {
      const T* row = dcol.data() + off + dst;
      T* out = dx + src;
      for (std::size_t j = 0; j < len; ++j) out[j] += row[j];
    });
  }

  Shape in_, out_;
  int pad_top_ = 0, pad_left_ = 0;
  Param<T> weight_, bias_;
  Tensor<T> x_;
  AlignedVector<T> col_;
};

// --- MaxPool2d ---------------------------------------------------------------

template <typename T>
class MaxPoolLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Shape OutputShape(const Shape& in) const override {
    if (in.size() != 3) throw std::invalid_argument("maxpool2d: expects [H, W, C] input");
    const auto& sp = this->spec_;
    if (in[0] < sp.window_h || in[1] < sp.window_w)
      throw std::invalid_argument("maxpool2d: input smaller than window");
    return {(in[0] - sp.window_h) / sp.stride + 1, (in[1] - sp.window_w) / sp.stride + 1, in[2]};
  }

  void Build(const Shape& in, Rng&, bool) override {
    in_ = in;
    out_ = OutputShape(in);
  }

  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    CheckSampleShape(x.shape, in_, LayerKind::kMaxPool2d);
    const auto& sp = this->spec_;
    const int n = x.dim(0), c = in_[2];
    Tensor<T> y({n, out_[0], out_[1], c});
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (int i = 0; i < n; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * NumElements(in_);
      for (int oy = 0; oy < out_[0]; ++oy)
        for (int ox = 0; ox < out_[1]; ++ox)
          for (int ch = 0; ch < c; ++ch, ++o) {
            std::size_t best = 0;
            T best_v = -std::numeric_limits<T>::infinity();
            for (int ky = 0; ky < sp.window_h; ++ky)
              for (int kx = 0; kx < sp.window_w; ++kx) {
                const std::size_t idx =
                    base + ((static_cast<std::size_t>(oy * sp.stride + ky) * in_[1]) +
                            ox * sp.stride + kx) * c + ch;
                if (x.data[idx] > best_v) {
                  best_v = x.data[idx];
                  best = idx;
                }
              }
            y.data[o] = best_v;
            argmax_[o] = best;
          }
    }
    x_shape_ = x.shape;
    this->has_cache_ = true;
    return y;
  }

  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    Tensor<T> dx(x_shape_);
    for (std::size_t o = 0; o < argmax_.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
    this->has_cache_ = false;
    return dx;
  }

  void AppendPattern(std::vector<std::uint64_t>& out) const override {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto a : argmax_) h = (h ^ a) * 1099511628211ULL;
    out.push_back(h);
  }

  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

 private:
  Shape in_, out_, x_shape_;
  std::vector<std::size_t> argmax_;
};

// --- GlobalAvgPool -----------------------------------------------------------

template <typename T>
class GlobalAvgPoolLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Shape OutputShape(const Shape& in) const override {
    if (in.size() < 2) throw std::invalid_argument("global_avg_pool: needs rank >= 2 input");
    return {in.back()};
  }

  void Build(const Shape& in, Rng&, bool) override { in_ = in; }

  // Averages over every position but the channel axis. Sequence inputs
  // ([T, D]) honor frame validity; a sample with no valid frame averages all.
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext& ctx) override {
    if (in_.size() == 2)
      CheckLastDim(x.shape, in_, LayerKind::kGlobalAvgPool);
    else
      CheckSampleShape(x.shape, in_, LayerKind::kGlobalAvgPool);
    const int n = x.dim(0);
    const int c = in_.back();
    const std::size_t positions = x.size() / (static_cast<std::size_t>(n) * c);
    const bool use_validity = ctx.frame_validity && in_.size() == 2;
    if (use_validity && ctx.frame_validity->size() != static_cast<std::size_t>(n) * positions)
      throw std::invalid_argument("global_avg_pool: validity size mismatch");
    Tensor<T> y({n, c});
    weights_.assign(static_cast<std::size_t>(n) * positions, T(0));
    for (int i = 0; i < n; ++i) {
      std::size_t count = 0;
      auto valid = [&](std::size_t p) {
        return !use_validity || (*ctx.frame_validity)[i * positions + p] != 0;
      };
      for (std::size_t p = 0; p < positions; ++p) count += valid(p) ? 1 : 0;
      const bool all = count == 0;
      if (all) count = positions;
      const T w = T(1) / static_cast<T>(count);
      for (std::size_t p = 0; p < positions; ++p) {
        if (!all && !valid(p)) continue;
        weights_[i * positions + p] = w;
        const T* xr = x.ptr() + (i * positions + p) * c;
        for (int ch = 0; ch < c; ++ch) y.data[static_cast<std::size_t>(i) * c + ch] += w * xr[ch];
      }
    }
    x_shape_ = x.shape;
    this->has_cache_ = true;
    return y;
  }

  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    Tensor<T> dx(x_shape_);
    const int n = x_shape_[0];
    const int c = in_.back();
    const std::size_t positions = dx.size() / (static_cast<std::size_t>(n) * c);
    for (int i = 0; i < n; ++i)
      for (std::size_t p = 0; p < positions; ++p) {
        const T w = weights_[i * positions + p];
        if (w == T(0)) continue;
        T* d = dx.ptr() + (i * positions + p) * c;
        for (int ch = 0; ch < c; ++ch) d[ch] = w * dy.data[static_cast<std::size_t>(i) * c + ch];
      }
    this->has_cache_ = false;
    return dx;
  }

  std::unique_ptr<Layer<T>> Clone() const override {
    return std::make_unique<GlobalAvgPoolLayer>(*this);
  }

 private:
  Shape in_, x_shape_;
  AlignedVector<T> weights_;
};

// --- Dense -------------------------------------------------------------------

template <typename T>
class DenseLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Shape OutputShape(const Shape& in) const override {
    if (in.empty()) throw std::invalid_argument("dense: empty input shape");
    Shape out = in;
    out.back() = this->spec_.units;
    return out;
  }

  void Build(const Shape& in, Rng& rng, bool relu_follows) override {
    in_ = in;
    const int fan_in = in.back(), fan_out = this->spec_.units;
    weight_ = MakeParam<T>("weight", {fan_in, fan_out});
    bias_ = MakeParam<T>("bias", {fan_out});
    FillUniform(weight_.value, relu_follows ? HeLimit(fan_in) : XavierLimit(fan_in, fan_out), rng);
  }

  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    CheckLastDim(x.shape, in_, LayerKind::kDense);
    const int in = in_.back(), out = this->spec_.units;
    const auto rows = static_cast<Eigen::Index>(x.size() / in);
    Shape ys = x.shape;
    ys.back() = out;
    Tensor<T> y(ys);
    MapMat<T> ym(y.ptr(), rows, out);
    ym.noalias() = CMapMat<T>(x.ptr(), rows, in) * CMapMat<T>(weight_.value.ptr(), in, out);
    ym.rowwise() += MapRow<T>(bias_.value.ptr(), out);
    x_ = x;
    this->has_cache_ = true;
    return y;
  }

  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    const int in = in_.back(), out = this->spec_.units;
    const auto rows = static_cast<Eigen::Index>(x_.size() / in);
    CMapMat<T> g(dy.ptr(), rows, out);
    MapMat<T>(weight_.grad.ptr(), in, out).noalias() +=
        CMapMat<T>(x_.ptr(), rows, in).transpose() * g;
    MapRow<T>(bias_.grad.ptr(), out) += g.colwise().sum();
    Tensor<T> dx(x_.shape);
    MapMat<T>(dx.ptr(), rows, in).noalias() =
        g * CMapMat<T>(weight_.value.ptr(), in, out).transpose();
    this->has_cache_ = false;
    x_ = Tensor<T>();
    return dx;
  }

  std::vector<Param<T>*> Params() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<DenseLayer>(*this); }

 private:
  Shape in_;
  Param<T> weight_, bias_;
  Tensor<T> x_;
};

// --- Element-wise ------------------------------------------------------------

template <typename T>
class ReluLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape OutputShape(const Shape& in) const override { return in; }
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    Tensor<T> y = x;
    mask_.resize(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      mask_[i] = y.data[i] > T(0);
      y.data[i] = mask_[i] ? y.data[i] : T(0);
    }
    this->has_cache_ = true;
    return y;
  }
  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = mask_[i] ? dx.data[i] : T(0);
    this->has_cache_ = false;
    return dx;
  }
  void AppendPattern(std::vector<std::uint64_t>& out) const override { out.push_back(PackBits(mask_)); }
  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<ReluLayer>(*this); }

 private:
  std::vector<std::uint8_t> mask_;
};

template <typename T>
class SigmoidLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape OutputShape(const Shape& in) const override { return in; }
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    y_ = x;
    for (auto& v : y_.data) {
      // Split by sign so exp never overflows.
      if (v >= T(0)) {
        v = T(1) / (T(1) + std::exp(-v));
      } else {
        const T e = std::exp(v);
        v = e / (T(1) + e);
      }
    }
    this->has_cache_ = true;
    return y_;
  }
  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
    this->has_cache_ = false;
    return dx;
  }
  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<SigmoidLayer>(*this); }

 private:
  Tensor<T> y_;
};

template <typename T>
class DropoutLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape OutputShape(const Shape& in) const override { return in; }
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext& ctx) override {
    const double rate = this->spec_.rate;
    active_ = ctx.mode == Mode::kTrain && rate > 0.0;
    this->has_cache_ = true;
    if (!active_) return x;
    if (!ctx.rng) throw std::invalid_argument("dropout: train mode needs an rng");
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    // One engine draw per call; per-element decisions come from a counter
    // hash, two 32-bit lanes per 64-bit value.
    const std::uint64_t key = ctx.rng->NextU64();
    const auto cut = static_cast<std::uint64_t>(std::ldexp(rate, 32));
    const std::size_t m = x.size();
    scale_.resize(m);
    Tensor<T> y = x;
    for (std::size_t i = 0; i < m; i += 2) {
      const std::uint64_t h = MixSeed(key, i >> 1);
      scale_[i] = (h & 0xffffffffULL) < cut ? T(0) : scale;
      if (i + 1 < m) scale_[i + 1] = (h >> 32) < cut ? T(0) : scale;
    }
    for (std::size_t i = 0; i < m; ++i) y.data[i] *= scale_[i];
    return y;
  }
  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    this->has_cache_ = false;
    if (!active_) return dy;
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= scale_[i];
    return dx;
  }
  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<DropoutLayer>(*this); }

 private:
  bool active_ = false;
  AlignedVector<T> scale_;
};

template <typename T>
class LayerNormLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape OutputShape(const Shape& in) const override { return in; }
  void Build(const Shape& in, Rng&, bool) override {
    in_ = in;
    core_.Build(in.back(), "");
  }
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    CheckLastDim(x.shape, in_, LayerKind::kLayerNorm);
    Tensor<T> y(x.shape);
    core_.Forward(x.ptr(), y.ptr(), x.size() / in_.back());
    this->has_cache_ = true;
    return y;
  }
  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    Tensor<T> dx(dy.shape);
    core_.Backward(dy.ptr(), dx.ptr(), dy.size() / in_.back());
    this->has_cache_ = false;
    return dx;
  }
  std::vector<Param<T>*> Params() override { return {&core_.gamma, &core_.beta}; }
  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<LayerNormLayer>(*this); }

 private:
  Shape in_;
  LayerNormCore<T> core_;
};

template <typename T>
class PositionalEncodingLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape OutputShape(const Shape& in) const override {
    if (in.size() != 2) throw std::invalid_argument("positional_encoding: expects [T, D] input");
    return in;
  }
  void Build(const Shape& in, Rng&, bool) override { in_ = in; }
  // Accepts any sequence length; only D is fixed.
  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    if (x.rank() != 3 || x.dim(2) != in_[1])
      throw std::invalid_argument("positional_encoding: bad input shape " + ShapeString(x.shape));
    Tensor<T> y = x;
    const int n = x.dim(0), t = x.dim(1), d = x.dim(2);
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < t; ++p)
        for (int k = 0; k < d; ++k) {
          const double freq = std::pow(10000.0, -static_cast<double>(k - k % 2) / d);
          const double v = k % 2 == 0 ? std::sin(p * freq) : std::cos(p * freq);
          y.data[(static_cast<std::size_t>(i) * t + p) * d + k] += static_cast<T>(v);
        }
    this->has_cache_ = true;
    return y;
  }
  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    this->has_cache_ = false;
    return dy;
  }
  std::unique_ptr<Layer<T>> Clone() const override {
    return std::make_unique<PositionalEncodingLayer>(*this);
  }

 private:
  Shape in_;
};

// --- Multi-head self-attention -----------------------------------------------

template <typename T>
class AttentionLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Shape OutputShape(const Shape& in) const override {
    if (in.size() != 2) throw std::invalid_argument("multihead_attention: expects [T, D] input");
    return in;
  }

  void Build(const Shape& in, Rng& rng, bool) override {
    d_ = in[1];
    if (d_ % this->spec_.heads != 0)
      throw std::invalid_argument("multihead_attention: width not divisible by heads");
    const double lim = XavierLimit(d_, d_);
    for (auto* p : {&wq_, &wk_, &wv_, &wo_}) {
      *p = MakeParam<T>("w", {d_, d_});
      FillUniform(p->value, lim, rng);
    }
    wq_.name = "wq", wk_.name = "wk", wv_.name = "wv", wo_.name = "wo";
    bq_ = MakeParam<T>("bq", {d_});
    bv_ = MakeParam<T>("bv", {d_});
    bo_ = MakeParam<T>("bo", {d_});
    if (this->spec_.pre_norm) ln_.Build(d_, "ln_");
  }

  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext& ctx) override {
    if (x.rank() != 3 || x.dim(2) != d_)
      throw std::invalid_argument("multihead_attention: bad input shape " + ShapeString(x.shape));
    n_ = x.dim(0);
    t_ = x.dim(1);
    const auto rows = static_cast<Eigen::Index>(n_) * t_;
    h_ = x;
    if (this->spec_.pre_norm) ln_.Forward(x.ptr(), h_.ptr(), rows);
    CMapMat<T> h(h_.ptr(), rows, d_);
    q_.assign(rows * d_, T(0));
    k_.assign(rows * d_, T(0));
    v_.assign(rows * d_, T(0));
    Project(h, wq_, &bq_, q_);
    Project(h, wk_, nullptr, k_);
    Project(h, wv_, &bv_, v_);

    const int heads = this->spec_.heads, dh = d_ / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    attn_.assign(static_cast<std::size_t>(n_) * heads * t_ * t_, T(0));
    o_.assign(rows * d_, T(0));
    valid_.assign(static_cast<std::size_t>(n_) * t_, 1);
    if (ctx.frame_validity) {
      if (ctx.frame_validity->size() != valid_.size())
        throw std::invalid_argument("multihead_attention: validity size mismatch");
      valid_ = *ctx.frame_validity;
    }
    for (int i = 0; i < n_; ++i) {
      bool any_valid = false;
      for (int p = 0; p < t_; ++p) any_valid |= valid_[i * t_ + p] != 0;
      for (int hd = 0; hd < heads; ++hd) {
        auto qh = Block(q_, i, hd);
        auto kh = Block(k_, i, hd);
        auto vh = Block(v_, i, hd);
        MapMat<T> a(attn_.data() + ((static_cast<std::size_t>(i) * heads + hd) * t_ * t_), t_, t_);
        a.noalias() = (qh * kh.transpose()) * scale;
        for (int r = 0; r < t_; ++r) {
          T mx = -std::numeric_limits<T>::infinity();
          for (int c = 0; c < t_; ++c)
            if (!any_valid || valid_[i * t_ + c]) mx = std::max(mx, a(r, c));
          T sum = 0;
          for (int c = 0; c < t_; ++c) {
            if (any_valid && !valid_[i * t_ + c]) {
              a(r, c) = T(0);
            } else {
              a(r, c) = std::exp(a(r, c) - mx);
              sum += a(r, c);
            }
          }
          a.row(r) /= sum;
        }
        Block(o_, i, hd).noalias() = a * vh;
      }
    }
    Tensor<T> y(x.shape);
    MapMat<T> ym(y.ptr(), rows, d_);
    ym.noalias() = CMapMat<T>(o_.data(), rows, d_) * CMapMat<T>(wo_.value.ptr(), d_, d_);
    ym.rowwise() += MapRow<T>(bo_.value.ptr(), d_);
    if (this->spec_.residual) ym += CMapMat<T>(x.ptr(), rows, d_);
    this->has_cache_ = true;
    return y;
  }

  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    const auto rows = static_cast<Eigen::Index>(n_) * t_;
    const int heads = this->spec_.heads, dh = d_ / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    CMapMat<T> g(dy.ptr(), rows, d_);
    MapMat<T>(wo_.grad.ptr(), d_, d_).noalias() += CMapMat<T>(o_.data(), rows, d_).transpose() * g;
    MapRow<T>(bo_.grad.ptr(), d_) += g.colwise().sum();
    AlignedVector<T> d_o(rows * d_), dq(rows * d_, T(0)), dk(rows * d_, T(0)), dv(rows * d_, T(0));
    MapMat<T>(d_o.data(), rows, d_).noalias() = g * CMapMat<T>(wo_.value.ptr(), d_, d_).transpose();

    RowMat<T> da(t_, t_), ds(t_, t_);
    for (int i = 0; i < n_; ++i)
      for (int hd = 0; hd < heads; ++hd) {
        CMapMat<T> a(attn_.data() + ((static_cast<std::size_t>(i) * heads + hd) * t_ * t_), t_, t_);
        auto doh = Block(d_o, i, hd);
        da.noalias() = doh * Block(v_, i, hd).transpose();
        Block(dv, i, hd).noalias() += a.transpose() * doh;
        for (int r = 0; r < t_; ++r) {
          const T dot = (da.row(r).array() * a.row(r).array()).sum();
          ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
        }
        Block(dq, i, hd).noalias() += (ds * Block(k_, i, hd)) * scale;
        Block(dk, i, hd).noalias() += (ds.transpose() * Block(q_, i, hd)) * scale;
      }

    CMapMat<T> h(h_.ptr(), rows, d_);
    Tensor<T> dh_t(dy.shape);
    MapMat<T> dhm(dh_t.ptr(), rows, d_);
    dhm.setZero();
    BackProject(h, wq_, &bq_, dq, dhm);
    BackProject(h, wk_, nullptr, dk, dhm);
    BackProject(h, wv_, &bv_, dv, dhm);

    Tensor<T> dx(dy.shape);
    if (this->spec_.pre_norm)
      ln_.Backward(dh_t.ptr(), dx.ptr(), rows);
    else
      dx = dh_t;
    if (this->spec_.residual)
      for (std::size_t j = 0; j < dx.size(); ++j) dx.data[j] += dy.data[j];
    this->has_cache_ = false;
    return dx;
  }

  std::vector<Param<T>*> Params() override {
    std::vector<Param<T>*> p = {&wq_, &bq_, &wk_, &wv_, &bv_, &wo_, &bo_};
    if (this->spec_.pre_norm) {
      p.push_back(&ln_.gamma);
      p.push_back(&ln_.beta);
    }
    return p;
  }

  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<AttentionLayer>(*this); }

  const AlignedVector<T>& weights() const { return attn_; }

 private:
  using BlockRef = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;

  BlockRef Block(AlignedVector<T>& m, int sample, int head) {
    const int dh = d_ / this->spec_.heads;
    return BlockRef(m.data() + static_cast<std::size_t>(sample) * t_ * d_ + head * dh, t_, dh,
                    Eigen::OuterStride<>(d_));
  }

  // Keys carry no bias: a key bias shifts every logit of a row equally, so
  // softmax cancels it and its gradient is identically zero.
  void Project(const CMapMat<T>& h, const Param<T>& w, Param<T>* b, AlignedVector<T>& out) {
    MapMat<T> o(out.data(), h.rows(), d_);
    o.noalias() = h * CMapMat<T>(w.value.ptr(), d_, d_);
    if (b) o.rowwise() += MapRow<T>(b->value.ptr(), d_);
  }

  void BackProject(const CMapMat<T>& h, Param<T>& w, Param<T>* b, const AlignedVector<T>& g,
                   MapMat<T>& dh) {
    CMapMat<T> gm(g.data(), h.rows(), d_);
    MapMat<T>(w.grad.ptr(), d_, d_).noalias() += h.transpose() * gm;
    if (b) MapRow<T>(b->grad.ptr(), d_) += gm.colwise().sum();
    dh.noalias() += gm * CMapMat<T>(w.value.ptr(), d_, d_).transpose();
  }

  int d_ = 0, n_ = 0, t_ = 0;
  Param<T> wq_, wk_, wv_, wo_, bq_, bv_, bo_;
  LayerNormCore<T> ln_;
  Tensor<T> h_;
  AlignedVector<T> q_, k_, v_, o_, attn_;
  std::vector<std::uint8_t> valid_;
};

// --- Position-wise feed-forward ----------------------------------------------

template <typename T>
class FeedForwardLayer : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Shape OutputShape(const Shape& in) const override {
    if (in.empty()) throw std::invalid_argument("feed_forward: empty input shape");
    return in;
  }

  void Build(const Shape& in, Rng& rng, bool) override {
    d_ = in.back();
    const int hidden = this->spec_.hidden;
    w1_ = MakeParam<T>("w1", {d_, hidden});
    b1_ = MakeParam<T>("b1", {hidden});
    w2_ = MakeParam<T>("w2", {hidden, d_});
    b2_ = MakeParam<T>("b2", {d_});
    FillUniform(w1_.value, HeLimit(d_), rng);
    FillUniform(w2_.value, XavierLimit(hidden, d_), rng);
    if (this->spec_.pre_norm) ln_.Build(d_, "ln_");
  }

  Tensor<T> Forward(const Tensor<T>& x, const ForwardContext&) override {
    if (x.rank() < 2 || x.shape.back() != d_)
      throw std::invalid_argument("feed_forward: bad input shape " + ShapeString(x.shape));
    const int hidden = this->spec_.hidden;
    rows_ = static_cast<Eigen::Index>(x.size() / d_);
    h_ = x;
    if (this->spec_.pre_norm) ln_.Forward(x.ptr(), h_.ptr(), rows_);
    u_.resize(rows_ * hidden);
    MapMat<T> u(u_.data(), rows_, hidden);
    u.noalias() = CMapMat<T>(h_.ptr(), rows_, d_) * CMapMat<T>(w1_.value.ptr(), d_, hidden);
    u.rowwise() += MapRow<T>(b1_.value.ptr(), hidden);
    r_ = u_;
    for (auto& v : r_) v = std::max(v, T(0));
    Tensor<T> y(x.shape);
    MapMat<T> ym(y.ptr(), rows_, d_);
    ym.noalias() = CMapMat<T>(r_.data(), rows_, hidden) * CMapMat<T>(w2_.value.ptr(), hidden, d_);
    ym.rowwise() += MapRow<T>(b2_.value.ptr(), d_);
    if (this->spec_.residual) ym += CMapMat<T>(x.ptr(), rows_, d_);
    this->has_cache_ = true;
    return y;
  }

  Tensor<T> Backward(const Tensor<T>& dy) override {
    this->RequireCache();
    const int hidden = this->spec_.hidden;
    CMapMat<T> g(dy.ptr(), rows_, d_);
    MapMat<T>(w2_.grad.ptr(), hidden, d_).noalias() +=
        CMapMat<T>(r_.data(), rows_, hidden).transpose() * g;
    MapRow<T>(b2_.grad.ptr(), d_) += g.colwise().sum();
    AlignedVector<T> du(rows_ * hidden);
    MapMat<T> dum(du.data(), rows_, hidden);
    dum.noalias() = g * CMapMat<T>(w2_.value.ptr(), hidden, d_).transpose();
    for (std::size_t j = 0; j < du.size(); ++j)
      if (!(u_[j] > T(0))) du[j] = T(0);
    MapMat<T>(w1_.grad.ptr(), d_, hidden).noalias() +=
        CMapMat<T>(h_.ptr(), rows_, d_).transpose() * dum;
    MapRow<T>(b1_.grad.ptr(), hidden) += dum.colwise().sum();
    Tensor<T> dh(dy.shape);
    MapMat<T>(dh.ptr(), rows_, d_).noalias() =
        dum * CMapMat<T>(w1_.value.ptr(), d_, hidden).transpose();
    Tensor<T> dx(dy.shape);
    if (this->spec_.pre_norm)
      ln_.Backward(dh.ptr(), dx.ptr(), rows_);
    else
      dx = dh;
    if (this->spec_.residual)
      for (std::size_t j = 0; j < dx.size(); ++j) dx.data[j] += dy.data[j];
    this->has_cache_ = false;
    return dx;
  }

  std::vector<Param<T>*> Params() override {
    std::vector<Param<T>*> p = {&w1_, &b1_, &w2_, &b2_};
    if (this->spec_.pre_norm) {
      p.push_back(&ln_.gamma);
      p.push_back(&ln_.beta);
    }
    return p;
  }

  void AppendPattern(std::vector<std::uint64_t>& out) const override {
    std::vector<bool> bits(u_.size());
    for (std::size_t j = 0; j < u_.size(); ++j) bits[j] = u_[j] > T(0);
    out.push_back(PackBits(bits));
  }

  std::unique_ptr<Layer<T>> Clone() const override { return std::make_unique<FeedForwardLayer>(*this); }

 private:
  int d_ = 0;
  Eigen::Index rows_ = 0;
  Param<T> w1_, b1_, w2_, b2_;
  LayerNormCore<T> ln_;
  Tensor<T> h_;
  AlignedVector<T> u_, r_;
};

}  // namespace

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string ToString(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kLayerNorm: return "layer_norm";
    case LayerKind::kMultiheadAttention: return "multihead_attention";
    case LayerKind::kFeedForward: return "feed_forward";
    case LayerKind::kPositionalEncoding: return "positional_encoding";
  }
  return "unknown";
}

LayerKind ParseLayerKind(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(LayerKind::kPositionalEncoding); ++k)
    if (ToString(static_cast<LayerKind>(k)) == name) return static_cast<LayerKind>(k);
  throw std::invalid_argument("unknown layer kind \"" + name + "\"");
}

LayerSpec LayerSpec::Conv2d(int filters, int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.units = filters;
  s.window_h = s.window_w = window;
  s.stride = stride;
  return s;
}
LayerSpec LayerSpec::MaxPool2d(int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool2d;
  s.window_h = s.window_w = window;
  s.stride = stride;
  return s;
}
LayerSpec LayerSpec::GlobalAvgPool() {
  LayerSpec s;
  s.kind = LayerKind::kGlobalAvgPool;
  return s;
}
LayerSpec LayerSpec::Dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.units = units;
  return s;
}
LayerSpec LayerSpec::Relu() {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  return s;
}
LayerSpec LayerSpec::Dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::kDropout;
  s.rate = rate;
  return s;
}
LayerSpec LayerSpec::Sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::kSigmoid;
  return s;
}
LayerSpec LayerSpec::LayerNorm() {
  LayerSpec s;
  s.kind = LayerKind::kLayerNorm;
  return s;
}
LayerSpec LayerSpec::MultiheadAttention(int heads, bool pre_norm, bool residual) {
  LayerSpec s;
  s.kind = LayerKind::kMultiheadAttention;
  s.heads = heads;
  s.pre_norm = pre_norm;
  s.residual = residual;
  return s;
}
LayerSpec LayerSpec::FeedForward(int hidden, bool pre_norm, bool residual) {
  LayerSpec s;
  s.kind = LayerKind::kFeedForward;
  s.hidden = hidden;
  s.pre_norm = pre_norm;
  s.residual = residual;
  return s;
}
LayerSpec LayerSpec::PositionalEncoding() {
  LayerSpec s;
  s.kind = LayerKind::kPositionalEncoding;
  return s;
}

void LayerSpec::Validate() const {
  const std::string name = ToString(kind);
  switch (kind) {
    case LayerKind::kConv2d:
      if (units <= 0 || window_h <= 0 || window_w <= 0 || stride < 1)
        throw std::invalid_argument(name + ": need filters, window > 0 and stride >= 1");
      break;
    case LayerKind::kMaxPool2d:
      if (window_h <= 0 || window_w <= 0 || stride < 1)
        throw std::invalid_argument(name + ": need window > 0 and stride >= 1");
      break;
    case LayerKind::kDense:
      if (units <= 0) throw std::invalid_argument(name + ": units must be > 0");
      break;
    case LayerKind::kDropout:
      if (!(rate >= 0.0 && rate < 1.0))
        throw std::invalid_argument(name + ": rate must lie in [0, 1)");
      break;
    case LayerKind::kMultiheadAttention:
      if (heads <= 0) throw std::invalid_argument(name + ": heads must be > 0");
      break;
    case LayerKind::kFeedForward:
      if (hidden <= 0) throw std::invalid_argument(name + ": hidden width must be > 0");
      break;
    default:
      break;
  }
}

nlohmann::json LayerSpec::ToJson() const {
  nlohmann::json j = {{"kind", ToString(kind)}};
  switch (kind) {
    case LayerKind::kConv2d:
      j["filters"] = units;
      j["window"] = {window_h, window_w};
      j["stride"] = stride;
      break;
    case LayerKind::kMaxPool2d:
      j["window"] = {window_h, window_w};
      j["stride"] = stride;
      break;
    case LayerKind::kDense:
      j["units"] = units;
      break;
    case LayerKind::kDropout:
      j["rate"] = rate;
      break;
    case LayerKind::kMultiheadAttention:
      j["heads"] = heads;
      j["pre_norm"] = pre_norm;
      j["residual"] = residual;
      break;
    case LayerKind::kFeedForward:
      j["hidden"] = hidden;
      j["pre_norm"] = pre_norm;
      j["residual"] = residual;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec LayerSpec::FromJson(const nlohmann::json& j) {
  LayerSpec s;
  s.kind = ParseLayerKind(j.at("kind").get<std::string>());
  if (j.contains("filters")) s.units = j["filters"];
  if (j.contains("units")) s.units = j["units"];
  if (j.contains("window")) {
    s.window_h = j["window"][0];
    s.window_w = j["window"][1];
  }
  if (j.contains("stride")) s.stride = j["stride"];
  if (j.contains("rate")) s.rate = j["rate"];
  if (j.contains("heads")) s.heads = j["heads"];
  if (j.contains("hidden")) s.hidden = j["hidden"];
  if (j.contains("pre_norm")) s.pre_norm = j["pre_norm"];
  if (j.contains("residual")) s.residual = j["residual"];
  s.Validate();
  return s;
}

template <typename T>
void Layer<T>::RequireCache() const {
  if (!has_cache_)
    throw std::logic_error(ToString(spec_.kind) +
                           ": backward called without a matching forward (stale cache)");
}

template <typename T>
std::unique_ptr<Layer<T>> MakeLayer(const LayerSpec& spec) {
  spec.Validate();
  switch (spec.kind) {
    case LayerKind::kConv2d: return std::make_unique<Conv2dLayer<T>>(spec);
    case LayerKind::kMaxPool2d: return std::make_unique<MaxPoolLayer<T>>(spec);
    case LayerKind::kGlobalAvgPool: return std::make_unique<GlobalAvgPoolLayer<T>>(spec);
    case LayerKind::kDense: return std::make_unique<DenseLayer<T>>(spec);
    case LayerKind::kRelu: return std::make_unique<ReluLayer<T>>(spec);
    case LayerKind::kDropout: return std::make_unique<DropoutLayer<T>>(spec);
    case LayerKind::kSigmoid: return std::make_unique<SigmoidLayer<T>>(spec);
    case LayerKind::kLayerNorm: return std::make_unique<LayerNormLayer<T>>(spec);
    case LayerKind::kMultiheadAttention: return std::make_unique<AttentionLayer<T>>(spec);
    case LayerKind::kFeedForward: return std::make_unique<FeedForwardLayer<T>>(spec);
    case LayerKind::kPositionalEncoding: return std::make_unique<PositionalEncodingLayer<T>>(spec);
  }
  throw std::invalid_argument("unknown layer kind");
}

template <typename T>
Network<T>::Network(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed)
    : specs_(std::move(specs)), input_shape_(std::move(input_shape)) {
  Rng rng(seed);
  Shape shape = input_shape_;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    auto layer = MakeLayer<T>(specs_[i]);
    bool relu_follows = false;
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      if (specs_[j].kind == LayerKind::kDropout) continue;
      relu_follows = specs_[j].kind == LayerKind::kRelu;
      break;
    }
    layer->Build(shape, rng, relu_follows);
    shape = layer->OutputShape(shape);
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Network<T>::Network(const Network& other)
    : specs_(other.specs_), input_shape_(other.input_shape_) {
  for (const auto& l : other.layers_) layers_.push_back(l->Clone());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
Tensor<T> Network<T>::Forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() != static_cast<int>(input_shape_.size()) + 1)
    throw std::invalid_argument("network: input " + ShapeString(x.shape) +
                                " does not match [N]" + ShapeString(input_shape_));
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->Forward(h, ctx);
  return h;
}

template <typename T>
Tensor<T> Network<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->Backward(g);
  return g;
}

template <typename T>
void Network<T>::set_input_grad(bool needed) {
  if (!layers_.empty()) layers_.front()->set_input_grad(needed);
}

template <typename T>
void Network<T>::ZeroGrad() {
  for (auto* p : Params()) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
}

template <typename T>
std::vector<Param<T>*> Network<T>::Params() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->Params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<const Param<T>*> Network<T>::Params() const {
  std::vector<const Param<T>*> out;
  for (const auto& l : layers_)
    for (auto* p : l->Params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Shape> Network<T>::LayerOutputShapes() const {
  std::vector<Shape> out;
  Shape shape = input_shape_;
  for (const auto& l : layers_) {
    shape = l->OutputShape(shape);
    out.push_back(shape);
  }
  return out;
}

template <typename T>
std::vector<std::size_t> Network<T>::LayerParameterCounts() const {
  std::vector<std::size_t> out;
  for (const auto& l : layers_) {
    std::size_t n = 0;
    for (auto* p : l->Params()) n += p->value.size();
    out.push_back(n);
  }
  return out;
}

template <typename T>
std::size_t Network<T>::ParameterCount() const {
  std::size_t n = 0;
  for (auto c : LayerParameterCounts()) n += c;
  return n;
}

template <typename T>
std::vector<std::size_t> Network<T>::ParamLayerIndex() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (std::size_t k = 0; k < layers_[i]->Params().size(); ++k) out.push_back(i);
  return out;
}

template <typename T>
std::vector<std::uint64_t> Network<T>::Pattern() const {
  std::vector<std::uint64_t> out;
  for (const auto& l : layers_) l->AppendPattern(out);
  return out;
}

template <typename T>
std::vector<std::vector<T>> Network<T>::Snapshot() const {
  std::vector<std::vector<T>> out;
  for (const auto* p : Params()) out.emplace_back(p->value.data.begin(), p->value.data.end());
  return out;
}

template <typename T>
void Network<T>::Restore(const std::vector<std::vector<T>>& snapshot) {
  auto params = Params();
  if (params.size() != snapshot.size())
    throw std::invalid_argument("network restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.size() != snapshot[i].size())
      throw std::invalid_argument("network restore: shape mismatch for " + params[i]->name);
    params[i]->value.data.assign(snapshot[i].begin(), snapshot[i].end());
  }
}

template <typename T>
const AlignedVector<T>& AttentionWeights(const Layer<T>& layer) {
  const auto* a = dynamic_cast<const AttentionLayer<T>*>(&layer);
  if (!a) throw std::invalid_argument("layer is not multihead_attention");
  return a->weights();
}

template class Layer<float>;
template class Layer<double>;
template class Network<float>;
template class Network<double>;
template std::unique_ptr<Layer<float>> MakeLayer<float>(const LayerSpec&);
template std::unique_ptr<Layer<double>> MakeLayer<double>(const LayerSpec&);
template const AlignedVector<float>& AttentionWeights<float>(const Layer<float>&);
template const AlignedVector<double>& AttentionWeights<double>(const Layer<double>&);

}  // namespace coughgate::nn
