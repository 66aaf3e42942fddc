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

#include "coughgate/ssl_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coughgate/eval.h"
#include "coughgate/nn/checkpoint.h"
#include "coughgate/nn/loss.h"
#include "coughgate/nn/optimizer.h"

namespace coughgate {

namespace {

// Per-sample sequence length used when building networks; layers accept any
// length at run time.
constexpr int kNominalFrames = 100;

void Require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

nlohmann::json StftToJson(const StftConfig& c) {
  return {{"n_freq", c.n_freq}, {"win_length", c.win_length}, {"hop_length", c.hop_length},
          {"sample_rate", c.sample_rate}, {"log_floor", c.log_floor}};
}

StftConfig StftFromJson(const nlohmann::json& j) {
  StftConfig c;
  c.n_freq = j.at("n_freq").get<int>();
  c.win_length = j.at("win_length").get<int>();
  c.hop_length = j.at("hop_length").get<int>();
  c.sample_rate = j.at("sample_rate").get<int>();
  c.log_floor = j.at("log_floor").get<double>();
  c.Validate();
  return c;
}

std::vector<nn::Param<float>*> Concat(std::vector<nn::Param<float>*> a,
                                      const std::vector<nn::Param<float>*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Cycles through seeded reshuffles of an index list.
class BatchCursor {
 public:
  BatchCursor(std::vector<std::size_t> items, std::uint64_t seed)
      : items_(std::move(items)), rng_(seed) {
    rng_.Shuffle(items_);
  }
  std::vector<std::size_t> Next(int n) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (pos_ == items_.size()) {
        rng_.Shuffle(items_);
        pos_ = 0;
      }
      out.push_back(items_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> items_;
  Rng rng_;
  std::size_t pos_ = 0;
};

Matrix Standardized(const Matrix& raw, const BinStats& stats) {
  Matrix z = raw;
  stats.Apply(z);
  return z;
}

}  // namespace

// --- Masking ----------------------------------------------------------------

MaskSpec MaskSpec::None() {
  MaskSpec m;
  m.time_mask_fraction = 0.0;
  m.max_freq_band_fraction = 0.0;
  m.noise_probability = 0.0;
  return m;
}

void MaskSpec::Validate() const {
  Require(time_mask_fraction >= 0.0 && time_mask_fraction <= 1.0,
          "mask: time_mask_fraction must be in [0, 1]");
  Require(max_freq_band_fraction >= 0.0 && max_freq_band_fraction <= 1.0,
          "mask: max_freq_band_fraction must be in [0, 1]");
  Require(noise_probability >= 0.0 && noise_probability <= 1.0,
          "mask: noise_probability must be in [0, 1]");
  Require(noise_variance >= 0.0, "mask: noise_variance must be >= 0");
  Require(time_block_width >= 1, "mask: time_block_width must be >= 1");
}

nlohmann::json MaskSpec::ToJson() const {
  return {{"time_mask_fraction", time_mask_fraction},
          {"max_freq_band_fraction", max_freq_band_fraction},
          {"noise_probability", noise_probability},
          {"noise_mean", noise_mean},
          {"noise_variance", noise_variance},
          {"time_block_width", time_block_width}};
}

MaskSpec MaskSpec::FromJson(const nlohmann::json& j) {
  MaskSpec m;
  m.time_mask_fraction = j.at("time_mask_fraction").get<double>();
  m.max_freq_band_fraction = j.at("max_freq_band_fraction").get<double>();
  m.noise_probability = j.at("noise_probability").get<double>();
  m.noise_mean = j.at("noise_mean").get<double>();
  m.noise_variance = j.at("noise_variance").get<double>();
  m.time_block_width = j.at("time_block_width").get<int>();
  m.Validate();
  return m;
}

MaskedSpectrogram MaskSpectrogram(const Matrix& spec, const MaskSpec& mspec, Rng& rng) {
  mspec.Validate();
  const int frames = static_cast<int>(spec.rows);
  const int bins = static_cast<int>(spec.cols);
  MaskedSpectrogram out;
  out.values = spec;
  out.mask.assign(spec.rows * spec.cols, 0);

  if (mspec.time_mask_fraction > 0.0) {
    const int w = mspec.time_block_width;
    if (frames < w)
      throw std::invalid_argument("mask: spectrogram has " + std::to_string(frames) +
                                  " frames, shorter than one block of " + std::to_string(w));
    const double want = mspec.time_mask_fraction * frames / w;
    int blocks = static_cast<int>(std::floor(want));
    if (rng.Uniform() < want - blocks) ++blocks;
    blocks = std::min(blocks, frames / w);
    // Shrinking every block to one slot leaves frames - blocks*(w-1) slots;
    // any `blocks` distinct slots map back to a non-overlapping placement.
    const int slots = frames - blocks * (w - 1);
    std::vector<int> pick(static_cast<std::size_t>(slots));
    std::iota(pick.begin(), pick.end(), 0);
    for (int i = 0; i < blocks; ++i) {
      const auto j = i + static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(slots - i)));
      std::swap(pick[i], pick[j]);
    }
    pick.resize(static_cast<std::size_t>(blocks));
    std::sort(pick.begin(), pick.end());
    for (int i = 0; i < blocks; ++i) {
      const int start = pick[i] + i * (w - 1);
      out.block_starts.push_back(start);
      for (int t = start; t < start + w; ++t)
        for (int b = 0; b < bins; ++b) {
          out.values(t, b) = 0.0;
          out.mask[static_cast<std::size_t>(t) * bins + b] = 1;
        }
    }
  }

  if (mspec.max_freq_band_fraction > 0.0 && bins > 0) {
    const int max_width = static_cast<int>(std::floor(mspec.max_freq_band_fraction * bins));
    out.band_width = static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(max_width) + 1));
    out.band_start =
        static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(bins - out.band_width) + 1));
    for (int t = 0; t < frames; ++t)
      for (int b = out.band_start; b < out.band_start + out.band_width; ++b) {
        out.values(t, b) = 0.0;
        out.mask[static_cast<std::size_t>(t) * bins + b] = 1;
      }
  }

  if (mspec.noise_probability > 0.0 && rng.Uniform() < mspec.noise_probability) {
    out.noise_added = true;
    const double sd = std::sqrt(mspec.noise_variance);
    for (double& v : out.values.data) v += rng.Normal(mspec.noise_mean, sd);
  }
  return out;
}

// --- Configs ------------------------------------------------------------------

void EncoderConfig::Validate() const {
  Require(layers >= 1, "encoder: layers must be >= 1");
  Require(hidden >= 1 && heads >= 1, "encoder: hidden and heads must be >= 1");
  Require(hidden % heads == 0, "encoder: hidden " + std::to_string(hidden) +
                                   " is not divisible by heads " + std::to_string(heads));
  Require(ffn >= 1, "encoder: ffn must be >= 1");
  Require(n_bins >= 1, "encoder: n_bins must be >= 1");
}

std::vector<nn::LayerSpec> EncoderConfig::Specs() const {
  Validate();
  std::vector<nn::LayerSpec> s = {nn::LayerSpec::Dense(hidden),
                                  nn::LayerSpec::PositionalEncoding()};
  for (int i = 0; i < layers; ++i) {
    s.push_back(nn::LayerSpec::MultiheadAttention(heads));
    s.push_back(nn::LayerSpec::FeedForward(ffn));
  }
  s.push_back(nn::LayerSpec::LayerNorm());
  return s;
}

nlohmann::json EncoderConfig::ToJson() const {
  return {{"layers", layers}, {"hidden", hidden}, {"heads", heads}, {"ffn", ffn},
          {"n_bins", n_bins}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c{j.at("layers").get<int>(), j.at("hidden").get<int>(), j.at("heads").get<int>(),
                  j.at("ffn").get<int>(), j.at("n_bins").get<int>()};
  c.Validate();
  return c;
}

UpstreamConfig UpstreamConfig::Toy() {
  UpstreamConfig c;
  c.batch_size = 8;
  c.total_steps = 3000;
  c.warmup_steps = 300;
  return c;
}

void UpstreamConfig::Validate() const {
  Require(batch_size >= 1, "upstream: batch size must be >= 1");
  Require(max_lr > 0.0, "upstream: max lr must be > 0");
  Require(total_steps >= 1, "upstream: total steps must be >= 1");
  Require(warmup_steps >= 0 && warmup_steps <= total_steps,
          "upstream: warmup steps must be in [0, total steps]");
  Require(weight_decay >= 0.0, "upstream: weight decay must be >= 0");
}

nlohmann::json UpstreamConfig::ToJson() const {
  return {{"batch_size", batch_size},     {"max_lr", max_lr},
          {"total_steps", total_steps},   {"warmup_steps", warmup_steps},
          {"weight_decay", weight_decay}, {"masked_only", masked_only}};
}

UpstreamConfig UpstreamConfig::FromJson(const nlohmann::json& j) {
  UpstreamConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.max_lr = j.at("max_lr").get<double>();
  c.total_steps = j.at("total_steps").get<std::int64_t>();
  c.warmup_steps = j.at("warmup_steps").get<std::int64_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.masked_only = j.at("masked_only").get<bool>();
  c.Validate();
  return c;
}

DownstreamConfig DownstreamConfig::Toy() {
  DownstreamConfig c;
  c.steps = 2000;
  c.warmup_steps = 300;
  return c;
}

void DownstreamConfig::Validate() const {
  Require(batch_size >= 1, "downstream: batch size must be >= 1");
  Require(lr > 0.0, "downstream: lr must be > 0");
  Require(steps >= 1, "downstream: steps must be >= 1");
  Require(warmup_steps >= 0 && warmup_steps <= steps,
          "downstream: warmup steps must be in [0, steps]");
  Require(eval_interval >= 1, "downstream: eval interval must be >= 1");
  Require(upsample_ratio >= 1, "downstream: upsample ratio must be >= 1");
  Require(head_width >= 1, "downstream: head width must be >= 1");
  Require(weight_decay >= 0.0, "downstream: weight decay must be >= 0");
}

nlohmann::json DownstreamConfig::ToJson() const {
  return {{"batch_size", batch_size},       {"lr", lr},
          {"steps", steps},                 {"warmup_steps", warmup_steps},
          {"eval_interval", eval_interval}, {"upsample_ratio", upsample_ratio},
          {"head_width", head_width},       {"weight_decay", weight_decay}};
}

DownstreamConfig DownstreamConfig::FromJson(const nlohmann::json& j) {
  DownstreamConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.steps = j.at("steps").get<std::int64_t>();
  c.warmup_steps = j.at("warmup_steps").get<std::int64_t>();
  c.eval_interval = j.at("eval_interval").get<int>();
  c.upsample_ratio = j.at("upsample_ratio").get<int>();
  c.head_width = j.at("head_width").get<int>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.Validate();
  return c;
}

// --- Models -------------------------------------------------------------------

BinStats BinStats::Fit(const std::vector<Matrix>& spectrograms) {
  if (spectrograms.empty()) throw std::invalid_argument("bin stats: no spectrograms");
  const std::size_t bins = spectrograms[0].cols;
  BinStats s;
  s.mean.assign(bins, 0.0);
  s.stddev.assign(bins, 0.0);
  std::vector<double> sum2(bins, 0.0);
  double count = 0.0;
  for (const auto& m : spectrograms) {
    if (m.cols != bins) throw std::invalid_argument("bin stats: bin count mismatch");
    for (std::size_t t = 0; t < m.rows; ++t)
      for (std::size_t b = 0; b < bins; ++b) {
        s.mean[b] += m(t, b);
        sum2[b] += m(t, b) * m(t, b);
      }
    count += static_cast<double>(m.rows);
  }
  if (count == 0.0) throw std::invalid_argument("bin stats: no frames");
  for (std::size_t b = 0; b < bins; ++b) {
    s.mean[b] /= count;
    s.stddev[b] = std::sqrt(std::max(0.0, sum2[b] / count - s.mean[b] * s.mean[b]));
  }
  return s;
}

void BinStats::Apply(Matrix& spec) const {
  if (spec.cols != mean.size())
    throw std::invalid_argument("bin stats: spectrogram has " + std::to_string(spec.cols) +
                                " bins, expected " + std::to_string(mean.size()));
  for (std::size_t t = 0; t < spec.rows; ++t)
    for (std::size_t b = 0; b < spec.cols; ++b) {
      const double inv = stddev[b] > 1e-12 ? 1.0 / stddev[b] : 0.0;
      spec(t, b) = (spec(t, b) - mean[b]) * inv;
    }
}

SslEncoder BuildEncoder(const EncoderConfig& config, const StftConfig& stft, std::uint64_t seed) {
  config.Validate();
  stft.Validate();
  if (config.n_bins != stft.n_bins())
    throw std::invalid_argument("encoder: n_bins " + std::to_string(config.n_bins) +
                                " does not match the STFT (" + std::to_string(stft.n_bins()) + ")");
  SslEncoder e;
  e.config = config;
  e.stft = stft;
  e.net = nn::Network<float>(config.Specs(), {kNominalFrames, config.n_bins}, seed);
  return e;
}

SslHead BuildHead(int hidden, int head_width, std::uint64_t seed) {
  Require(hidden >= 1 && head_width >= 1, "head: widths must be >= 1");
  std::vector<nn::LayerSpec> s;
  for (int i = 0; i < 3; ++i) {
    s.push_back(nn::LayerSpec::Dense(head_width));
    s.push_back(nn::LayerSpec::LayerNorm());
    s.push_back(nn::LayerSpec::Relu());
  }
  s.push_back(nn::LayerSpec::GlobalAvgPool());
  s.push_back(nn::LayerSpec::Dense(1));
  s.push_back(nn::LayerSpec::Sigmoid());
  SslHead h;
  h.head_width = head_width;
  h.net = nn::Network<float>(s, {kNominalFrames, hidden}, seed);
  return h;
}

Matrix SslSpectrogram(const AudioBuffer& buffer, const std::vector<CoughSegment>& segments,
                      const StftConfig& stft) {
  return StftLogSpectrogram(CoughOnlyAudio(buffer, segments), stft).values;
}

PaddedBatch PadBatch(const std::vector<const Matrix*>& items) {
  if (items.empty()) throw std::invalid_argument("pad batch: no items");
  std::size_t t_max = 0;
  const std::size_t d = items[0]->cols;
  for (const Matrix* m : items) {
    if (m->cols != d) throw std::invalid_argument("pad batch: feature width mismatch");
    t_max = std::max(t_max, m->rows);
  }
  PaddedBatch b;
  const int n = static_cast<int>(items.size());
  b.x = nn::Tensor<float>({n, static_cast<int>(t_max), static_cast<int>(d)});
  b.validity.assign(items.size() * t_max, 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Matrix& m = *items[i];
    float* dst = b.x.ptr() + i * t_max * d;
    for (std::size_t k = 0; k < m.data.size(); ++k) dst[k] = static_cast<float>(m.data[k]);
    std::fill_n(b.validity.begin() + static_cast<std::ptrdiff_t>(i * t_max), m.rows, 1);
  }
  return b;
}

Matrix Encode(SslEncoder& encoder, const Matrix& raw) {
  const Matrix z = Standardized(raw, encoder.stats);
  const PaddedBatch b = PadBatch({&z});
  nn::ForwardContext ctx{nn::Mode::kEval, nullptr, &b.validity};
  const auto h = encoder.net.Forward(b.x, ctx);
  Matrix out(z.rows, static_cast<std::size_t>(encoder.config.hidden));
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] = h.data[k];
  return out;
}

// --- Training -----------------------------------------------------------------

UpstreamResult PretrainUpstream(const std::vector<Matrix>& spectrograms,
                                const EncoderConfig& econfig, const UpstreamConfig& uconfig,
                                const MaskSpec& mspec, const StftConfig& stft,
                                std::uint64_t seed) {
  uconfig.Validate();
  mspec.Validate();
  if (spectrograms.empty()) throw std::invalid_argument("upstream: no training records");
  const std::size_t min_frames =
      mspec.time_mask_fraction > 0.0 ? static_cast<std::size_t>(mspec.time_block_width) : 1;

  UpstreamResult result;
  std::vector<Matrix> usable;
  for (const auto& s : spectrograms) {
    if (static_cast<int>(s.cols) != econfig.n_bins)
      throw std::invalid_argument("upstream: spectrogram has " + std::to_string(s.cols) +
                                  " bins, encoder expects " + std::to_string(econfig.n_bins));
    if (s.rows < min_frames) {
      ++result.skipped_short;
      continue;
    }
    usable.push_back(s);
  }
  if (usable.empty()) throw std::invalid_argument("upstream: every input is shorter than one mask block");

  SslEncoder& enc = result.encoder;
  enc = BuildEncoder(econfig, stft, MixSeed(seed, 1));
  enc.stats = BinStats::Fit(usable);
  for (auto& s : usable) enc.stats.Apply(s);
  enc.net.set_input_grad(false);

  // Prediction head, dropped after training.
  nn::Network<float> head({nn::LayerSpec::Dense(econfig.hidden), nn::LayerSpec::Relu(),
                           nn::LayerSpec::Dense(econfig.n_bins)},
                          {kNominalFrames, econfig.hidden}, MixSeed(seed, 2));
  const auto params = Concat(enc.net.Params(), head.Params());
  nn::Optimizer<float> opt(nn::OptimizerConfig::AdamW(uconfig.max_lr, uconfig.warmup_steps,
                                                      uconfig.total_steps, uconfig.weight_decay));
  std::vector<std::size_t> all(usable.size());
  std::iota(all.begin(), all.end(), 0);
  BatchCursor cursor(all, MixSeed(seed, 3));
  Rng mask_rng(MixSeed(seed, 4));

  const std::size_t bins = static_cast<std::size_t>(econfig.n_bins);
  result.loss_history.reserve(static_cast<std::size_t>(uconfig.total_steps));
  for (std::int64_t step = 0; step < uconfig.total_steps; ++step) {
    const auto idx = cursor.Next(uconfig.batch_size);
    std::vector<MaskedSpectrogram> masked;
    std::vector<const Matrix*> inputs, targets;
    masked.reserve(idx.size());
    for (std::size_t i : idx) masked.push_back(MaskSpectrogram(usable[i], mspec, mask_rng));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      inputs.push_back(&masked[k].values);
      targets.push_back(&usable[idx[k]]);
    }
    const PaddedBatch x = PadBatch(inputs);
    const PaddedBatch y = PadBatch(targets);
    const std::size_t t_max = static_cast<std::size_t>(x.x.dim(1));
    std::vector<std::uint8_t> cells(x.x.size(), 0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t frames = usable[idx[k]].rows;
      std::uint8_t* dst = cells.data() + k * t_max * bins;
      if (uconfig.masked_only) {
        std::copy(masked[k].mask.begin(), masked[k].mask.end(), dst);
      } else {
        std::fill_n(dst, frames * bins, 1);
      }
    }

    enc.net.ZeroGrad();
    head.ZeroGrad();
    nn::ForwardContext ctx{nn::Mode::kTrain, nullptr, &x.validity};
    const auto h = enc.net.Forward(x.x, ctx);
    const auto p = head.Forward(h, ctx);
    nn::Tensor<float> grad;
    const float loss = nn::MaskedMse(p, y.x, cells, &grad);
    enc.net.Backward(head.Backward(grad));
    opt.Step(params);
    result.loss_history.push_back(loss);
  }
  return result;
}

std::vector<double> PredictEncoded(SslHead& head, const std::vector<Matrix>& encoded,
                                   int batch_size) {
  std::vector<double> out;
  out.reserve(encoded.size());
  for (std::size_t b = 0; b < encoded.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(encoded.size(), b + static_cast<std::size_t>(batch_size));
    std::vector<const Matrix*> items;
    for (std::size_t i = b; i < e; ++i) items.push_back(&encoded[i]);
    const PaddedBatch x = PadBatch(items);
    nn::ForwardContext ctx{nn::Mode::kEval, nullptr, &x.validity};
    const auto p = head.net.Forward(x.x, ctx);
    for (float v : p.data) out.push_back(v);
  }
  return out;
}

DownstreamResult TrainDownstream(SslEncoder& encoder, const std::vector<Matrix>& train,
                                 const std::vector<int>& train_labels,
                                 const std::vector<Matrix>& validation,
                                 const std::vector<int>& validation_labels,
                                 const DownstreamConfig& config, std::uint64_t seed) {
  config.Validate();
  if (train.empty()) throw std::invalid_argument("downstream: empty training split");
  if (validation.empty()) throw std::invalid_argument("downstream: empty validation split");
  if (train.size() != train_labels.size() || validation.size() != validation_labels.size())
    throw std::invalid_argument("downstream: label count mismatch");
  {
    bool pos = false, neg = false;
    for (int l : validation_labels) (l == 1 ? pos : neg) = true;
    if (!pos || !neg) throw MetricError("AUC undefined for single class");
  }

  // The encoder is frozen, so its outputs are computed once.
  std::vector<Matrix> enc_train, enc_val;
  for (const auto& s : train) enc_train.push_back(Encode(encoder, s));
  for (const auto& s : validation) enc_val.push_back(Encode(encoder, s));

  DownstreamResult result;
  result.head = BuildHead(encoder.config.hidden, config.head_width, MixSeed(seed, 1));
  nn::Network<float>& net = result.head.net;
  net.set_input_grad(false);

  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int copies = train_labels[i] == 1 ? config.upsample_ratio : 1;
    for (int c = 0; c < copies; ++c) items.push_back(i);
  }
  BatchCursor cursor(items, MixSeed(seed, 2));
  nn::Optimizer<float> opt(nn::OptimizerConfig::AdamW(config.lr, config.warmup_steps,
                                                      config.steps, config.weight_decay));
  auto& hist = result.history;
  std::vector<std::vector<float>> best;
  for (std::int64_t step = 0; step < config.steps; ++step) {
    const auto idx = cursor.Next(config.batch_size);
    std::vector<const Matrix*> batch;
    std::vector<float> y;
    for (std::size_t i : idx) {
      batch.push_back(&enc_train[i]);
      y.push_back(static_cast<float>(train_labels[i]));
    }
    const PaddedBatch x = PadBatch(batch);
    net.ZeroGrad();
    nn::ForwardContext ctx{nn::Mode::kTrain, nullptr, &x.validity};
    const auto p = net.Forward(x.x, ctx);
    nn::Tensor<float> grad;
    hist.losses.push_back(nn::BinaryCrossEntropy(p, y, &grad));
    net.Backward(grad);
    opt.Step(net.Params());

    if ((step + 1) % config.eval_interval == 0) {
      ScoredSet val;
      const auto scores = PredictEncoded(result.head, enc_val);
      for (std::size_t i = 0; i < scores.size(); ++i) val.Add(scores[i], validation_labels[i]);
      const DownstreamEval ev{step + 1, RocAndAuc(val).auc};
      hist.evals.push_back(ev);
      if (hist.best_step < 0 || ev.auc > hist.best_auc) {
        hist.best_step = ev.step;
        hist.best_auc = ev.auc;
        best = net.Snapshot();
      }
    }
  }
  if (!best.empty()) net.Restore(best);
  return result;
}

double PredictSsl(SslEncoder& encoder, SslHead& head, const Matrix& raw) {
  return PredictEncoded(head, {Encode(encoder, raw)}, 1).at(0);
}

double PredictSsl(SslEncoder& encoder, SslHead& head, const AudioBuffer& buffer,
                  const std::vector<CoughSegment>& segments) {
  if (segments.empty()) throw std::invalid_argument("ssl: no cough segments");
  return PredictSsl(encoder, head, SslSpectrogram(buffer, segments, encoder.stft));
}

void SaveEncoder(const SslEncoder& encoder, const std::filesystem::path& path,
                 const nlohmann::json& metadata) {
  nlohmann::json side = metadata.is_object() ? metadata : nlohmann::json::object();
  side["model"] = "ssl_encoder";
  side["encoder"] = encoder.config.ToJson();
  side["stft"] = StftToJson(encoder.stft);
  side["bin_stats"] = {{"mean", encoder.stats.mean}, {"stddev", encoder.stats.stddev}};
  nn::SaveCheckpoint(encoder.net, path, side);
}

SslEncoder LoadEncoder(const std::filesystem::path& path) {
  const auto side = nn::ReadSidecar(path);
  if (side.value("model", "") != "ssl_encoder")
    throw nn::CheckpointError(path.string() + " is not an SSL encoder checkpoint");
  SslEncoder e;
  e.config = EncoderConfig::FromJson(side.at("encoder"));
  e.stft = StftFromJson(side.at("stft"));
  e.stats.mean = side.at("bin_stats").at("mean").get<std::vector<double>>();
  e.stats.stddev = side.at("bin_stats").at("stddev").get<std::vector<double>>();
  e.net = nn::LoadNetwork<float>(path);
  return e;
}

void SaveHead(const SslHead& head, const std::filesystem::path& path,
              const nlohmann::json& metadata) {
  nlohmann::json side = metadata.is_object() ? metadata : nlohmann::json::object();
  side["model"] = "ssl_head";
  side["head_width"] = head.head_width;
  nn::SaveCheckpoint(head.net, path, side);
}

SslHead LoadHead(const std::filesystem::path& path) {
  const auto side = nn::ReadSidecar(path);
  if (side.value("model", "") != "ssl_head")
    throw nn::CheckpointError(path.string() + " is not an SSL head checkpoint");
  SslHead h;
  h.head_width = side.at("head_width").get<int>();
  h.net = nn::LoadNetwork<float>(path);
  return h;
}

nlohmann::json ToJson(const DownstreamHistory& history) {
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& e : history.evals) evals.push_back({{"step", e.step}, {"auc", e.auc}});
  return {{"losses", history.losses}, {"evals", evals}, {"best_step", history.best_step},
          {"best_auc", history.best_auc}};
}

}  // namespace coughgate
