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

#include "coughgate/cnn_model.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "coughgate/dsp_features.h"
#include "coughgate/eval.h"
#include "coughgate/nn/checkpoint.h"
#include "coughgate/nn/loss.h"
#include "coughgate/nn/optimizer.h"

namespace coughgate {

using nn::LayerSpec;

CnnArchitecture CnnArchitecture::Scaled(const std::array<int, 6>& f, int dense, double dropout) {
  CnnArchitecture a;
  auto conv = [&](int filters, int window) {
    a.layers.push_back(LayerSpec::Conv2d(filters, window, 1));
    a.layers.push_back(LayerSpec::Relu());
    a.layers.push_back(LayerSpec::Dropout(dropout));
  };
  auto pool = [&] { a.layers.push_back(LayerSpec::MaxPool2d(2, 2)); };
  conv(f[0], 7);
  conv(f[1], 5);
  pool();
  conv(f[2], 3);
  pool();
  conv(f[3], 3);
  pool();
  conv(f[4], 3);
  pool();
  conv(f[5], 3);
  a.layers.push_back(LayerSpec::GlobalAvgPool());
  a.layers.push_back(LayerSpec::Dense(dense));
  a.layers.push_back(LayerSpec::Relu());
  a.layers.push_back(LayerSpec::Dropout(dropout));
  a.layers.push_back(LayerSpec::Dense(1));
  a.layers.push_back(LayerSpec::Sigmoid());
  return a;
}

// Convolution 5 has 256 filters: that is what its 590,080 parameters and the
// 256-channel input of Convolution 6 require.
CnnArchitecture CnnArchitecture::Full(double dropout) {
  return Scaled({32, 64, 256, 256, 256, 512}, 256, dropout);
}

CnnArchitecture CnnArchitecture::Toy(double dropout) {
  return Scaled({4, 8, 16, 16, 16, 32}, 32, dropout);
}

nlohmann::json CnnArchitecture::ToJson() const {
  return nn::ArchitectureJson(layers, input_shape);
}

CnnArchitecture CnnArchitecture::FromJson(const nlohmann::json& j) {
  CnnArchitecture a;
  a.layers.clear();
  for (const auto& l : j.at("layers")) a.layers.push_back(LayerSpec::FromJson(l));
  a.input_shape = j.at("input_shape").get<nn::Shape>();
  return a;
}

void CnnTrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("cnn: learning rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("cnn: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("cnn: batch size must be >= 1");
  if (upsample_ratio < 1) throw std::invalid_argument("cnn: upsample ratio must be >= 1");
  if (augmented_copies < 0) throw std::invalid_argument("cnn: augmented copies must be >= 0");
  augment.Validate();
}

nlohmann::json CnnTrainConfig::ToJson() const {
  return {{"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"upsample_ratio", upsample_ratio},
          {"augmented_copies", augmented_copies},
          {"augment",
           {{"shift_min_fraction", augment.shift_min_fraction},
            {"shift_max_fraction", augment.shift_max_fraction},
            {"shift_probability", augment.shift_probability},
            {"noise_param_min", augment.noise_param_min},
            {"noise_param_max", augment.noise_param_max},
            {"noise_probability", augment.noise_probability}}}};
}

CnnTrainConfig CnnTrainConfig::Toy() {
  CnnTrainConfig c;
  c.learning_rate = 1e-3;
  c.epochs = 25;
  return c;
}

CnnTrainConfig CnnTrainConfig::FromJson(const nlohmann::json& j) {
  CnnTrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.upsample_ratio = j.at("upsample_ratio").get<int>();
  c.augmented_copies = j.at("augmented_copies").get<int>();
  const auto& a = j.at("augment");
  c.augment.shift_min_fraction = a.at("shift_min_fraction").get<double>();
  c.augment.shift_max_fraction = a.at("shift_max_fraction").get<double>();
  c.augment.shift_probability = a.at("shift_probability").get<double>();
  c.augment.noise_param_min = a.at("noise_param_min").get<double>();
  c.augment.noise_param_max = a.at("noise_param_max").get<double>();
  c.augment.noise_probability = a.at("noise_probability").get<double>();
  c.Validate();
  return c;
}

SonographStats SonographStats::Fit(const std::vector<Matrix>& images) {
  if (images.empty()) throw std::invalid_argument("sonograph stats: no images");
  const std::size_t rows = images[0].rows;
  SonographStats s;
  s.mean.assign(rows, 0.0);
  s.stddev.assign(rows, 0.0);
  std::vector<double> sum2(rows, 0.0);
  double count = 0.0;
  for (const auto& m : images) {
    if (m.rows != rows) throw std::invalid_argument("sonograph stats: row count mismatch");
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) {
        s.mean[r] += m(r, c);
        sum2[r] += m(r, c) * m(r, c);
      }
    count += static_cast<double>(m.cols);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    s.mean[r] /= count;
    const double var = std::max(0.0, sum2[r] / count - s.mean[r] * s.mean[r]);
    s.stddev[r] = std::sqrt(var);
  }
  return s;
}

void SonographStats::Apply(Matrix& image) const {
  if (image.rows != mean.size()) throw std::invalid_argument("sonograph stats: row count mismatch");
  for (std::size_t r = 0; r < image.rows; ++r) {
    const double inv = stddev[r] > 1e-12 ? 1.0 / stddev[r] : 0.0;
    for (std::size_t c = 0; c < image.cols; ++c) image(r, c) = (image(r, c) - mean[r]) * inv;
  }
}

CnnModel BuildCnn(const CnnArchitecture& arch, std::uint64_t seed) {
  CnnModel m;
  m.arch = arch;
  m.net = nn::Network<float>(arch.layers, arch.input_shape, seed);
  return m;
}

SonographSet BuildSonographSet(const std::vector<PreparedRecord>& records) {
  SonographSet set;
  for (const auto& p : records) {
    set.images.push_back(BuildSonograph(p.audio, p.quality.segments, nullptr, nullptr).values);
    set.labels.push_back(BinaryLabel(p.record));
    set.ids.push_back(p.record.id);
  }
  return set;
}

SonographSet BuildCnnTrainingSet(const std::vector<PreparedRecord>& records,
                                 const CnnTrainConfig& config, std::uint64_t seed) {
  config.Validate();
  SonographSet set;
  for (const auto& p : records) {
    const int label = BinaryLabel(p.record);
    const int copies = label == 1 ? config.upsample_ratio : 1;
    const Matrix original = BuildSonograph(p.audio, p.quality.segments, nullptr, nullptr).values;
    for (int c = 0; c < copies; ++c) {
      set.images.push_back(original);
      set.labels.push_back(label);
      set.ids.push_back(p.record.id);
      for (int a = 0; a < config.augmented_copies; ++a) {
        const std::uint64_t tag = HashString(p.record.id) ^
                                  (static_cast<std::uint64_t>(c) << 32) ^ static_cast<std::uint64_t>(a);
        Rng rng(MixSeed(seed, tag));
        set.images.push_back(BuildSonograph(p.audio, p.quality.segments, &config.augment, &rng).values);
        set.labels.push_back(label);
        set.ids.push_back(p.record.id);
      }
    }
  }
  return set;
}

namespace {

nn::Tensor<float> Batch(const std::vector<Matrix>& images, const std::vector<std::size_t>& idx,
                        std::size_t begin, std::size_t end, const SonographStats& stats,
                        const nn::Shape& input_shape) {
  const int n = static_cast<int>(end - begin);
  nn::Tensor<float> x({n, input_shape[0], input_shape[1], 1});
  const std::size_t per = nn::NumElements(input_shape);
  for (std::size_t b = begin; b < end; ++b) {
    Matrix m = images[idx[b]];
    if (static_cast<int>(m.rows) != input_shape[0] || static_cast<int>(m.cols) != input_shape[1])
      throw std::invalid_argument("cnn: sonograph is " + std::to_string(m.rows) + "x" +
                                  std::to_string(m.cols) + ", expected " +
                                  nn::ShapeString(input_shape));
    stats.Apply(m);
    float* dst = x.ptr() + (b - begin) * per;
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) dst[r * m.cols + c] = static_cast<float>(m(r, c));
  }
  return x;
}

std::vector<double> PredictNormalized(nn::Network<float>& net, const std::vector<Matrix>& images,
                                      const SonographStats& stats, const nn::Shape& input_shape,
                                      int batch_size) {
  std::vector<std::size_t> idx(images.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<double> out;
  out.reserve(images.size());
  nn::ForwardContext ctx;
  for (std::size_t b = 0; b < images.size(); b += batch_size) {
    const std::size_t e = std::min(images.size(), b + static_cast<std::size_t>(batch_size));
    const auto y = net.Forward(Batch(images, idx, b, e, stats, input_shape), ctx);
    for (float v : y.data) out.push_back(v);
  }
  return out;
}

}  // namespace

CnnTrainResult TrainCnn(const SonographSet& train, const SonographSet& validation,
                        const CnnArchitecture& arch, const CnnTrainConfig& config,
                        std::uint64_t seed) {
  config.Validate();
  if (train.images.empty()) throw std::invalid_argument("cnn: empty training split");
  if (validation.images.empty()) throw std::invalid_argument("cnn: empty validation split");
  {
    bool pos = false, neg = false;
    for (int l : validation.labels) (l == 1 ? pos : neg) = true;
    if (!pos || !neg) throw MetricError("AUC undefined for single class");
  }

  CnnTrainResult result;
  CnnModel& model = result.model;
  model = BuildCnn(arch, MixSeed(seed, 1));
  model.stats = SonographStats::Fit(train.images);
  model.net.set_input_grad(false);

  nn::Optimizer<float> opt(nn::OptimizerConfig::Adamax(config.learning_rate));
  Rng dropout_rng(MixSeed(seed, 2));
  Rng shuffle_rng(MixSeed(seed, 3));
  std::vector<std::size_t> order(train.images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<float>> best;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.Shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      const std::size_t e = std::min(order.size(), b + bs);
      const auto x = Batch(train.images, order, b, e, model.stats, arch.input_shape);
      std::vector<float> y;
      for (std::size_t k = b; k < e; ++k) y.push_back(static_cast<float>(train.labels[order[k]]));
      model.net.ZeroGrad();
      nn::ForwardContext ctx{nn::Mode::kTrain, &dropout_rng, nullptr};
      const auto p = model.net.Forward(x, ctx);
      nn::Tensor<float> grad;
      loss_sum += nn::BinaryCrossEntropy(p, y, &grad);
      model.net.Backward(grad);
      opt.Step(model.net.Params());
      ++batches;
    }
    ScoredSet val;
    const auto scores =
        PredictNormalized(model.net, validation.images, model.stats, arch.input_shape, config.batch_size);
    for (std::size_t i = 0; i < scores.size(); ++i) val.Add(scores[i], validation.labels[i]);
    CnnEpoch rec{epoch, loss_sum / static_cast<double>(batches), RocAndAuc(val).auc};
    result.history.epochs.push_back(rec);
    if (result.history.best_epoch < 0 || rec.validation_auc > result.history.best_auc) {
      result.history.best_epoch = epoch;
      result.history.best_auc = rec.validation_auc;
      best = model.net.Snapshot();
    }
  }
  model.net.Restore(best);
  return result;
}

std::vector<double> PredictCnn(CnnModel& model, const std::vector<Matrix>& images, int batch_size) {
  return PredictNormalized(model.net, images, model.stats, model.arch.input_shape, batch_size);
}

double PredictCnn(CnnModel& model, const Matrix& image) {
  return PredictCnn(model, std::vector<Matrix>{image}, 1).at(0);
}

void SaveCnn(const CnnModel& model, const std::filesystem::path& path,
             const nlohmann::json& metadata) {
  nlohmann::json side = metadata.is_object() ? metadata : nlohmann::json::object();
  side["model"] = "cnn";
  side["sonograph_stats"] = {{"mean", model.stats.mean}, {"stddev", model.stats.stddev}};
  nn::SaveCheckpoint(model.net, path, side);
}

CnnModel LoadCnn(const std::filesystem::path& path) {
  const auto side = nn::ReadSidecar(path);
  if (side.value("model", "") != "cnn")
    throw nn::CheckpointError(path.string() + " is not a CNN checkpoint");
  CnnModel m;
  m.arch = CnnArchitecture::FromJson(side.at("architecture"));
  m.net = nn::LoadNetwork<float>(path);
  m.stats.mean = side.at("sonograph_stats").at("mean").get<std::vector<double>>();
  m.stats.stddev = side.at("sonograph_stats").at("stddev").get<std::vector<double>>();
  return m;
}

nlohmann::json ToJson(const CnnHistory& history) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : history.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_auc", e.validation_auc}});
  return {{"epochs", epochs}, {"best_epoch", history.best_epoch}, {"best_auc", history.best_auc}};
}

}  // namespace coughgate
