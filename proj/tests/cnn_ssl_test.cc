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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "coughgate/augment.h"
#include "coughgate/cnn_model.h"
#include "coughgate/eval.h"
#include "coughgate/nn/loss.h"
#include "coughgate/nn/optimizer.h"
#include "coughgate/quality_gate.h"
#include "coughgate/ssl_model.h"
#include "coughgate/synth.h"
#include "doctest.h"

namespace coughgate {
namespace {

using nn::LayerKind;
using nn::Shape;

// Independent double-precision forward of the sonograph CNN in eval mode:
// loops only, HWC layout, "same" padding with the extra pixel at the end.
double NaiveCnnForward(const CnnModel& model, const Matrix& image) {
  const auto params = model.net.Params();
  std::size_t p = 0;
  int h = static_cast<int>(image.rows), w = static_cast<int>(image.cols), c = 1;
  std::vector<double> x(image.data.begin(), image.data.end());
  for (const auto& spec : model.arch.layers) {
    switch (spec.kind) {
      case LayerKind::kConv2d: {
        const auto& wt = params[p++]->value;
        const auto& b = params[p++]->value;
        const int k = spec.window_h, f = spec.units, pad = (k - 1) / 2;
        std::vector<double> y(static_cast<std::size_t>(h) * w * f);
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j)
            for (int o = 0; o < f; ++o) {
              double s = b.data[o];
              for (int di = 0; di < k; ++di)
                for (int dj = 0; dj < k; ++dj) {
                  const int ii = i + di - pad, jj = j + dj - pad;
                  if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                  for (int ci = 0; ci < c; ++ci)
                    s += x[(static_cast<std::size_t>(ii) * w + jj) * c + ci] *
                         wt.data[((static_cast<std::size_t>(di) * k + dj) * c + ci) * f + o];
                }
              y[(static_cast<std::size_t>(i) * w + j) * f + o] = s;
            }
        x = std::move(y);
        c = f;
        break;
      }
      case LayerKind::kMaxPool2d: {
        const int oh = (h - spec.window_h) / spec.stride + 1, ow = (w - spec.window_w) / spec.stride + 1;
        std::vector<double> y(static_cast<std::size_t>(oh) * ow * c, -1e300);
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j)
            for (int ch = 0; ch < c; ++ch)
              for (int di = 0; di < spec.window_h; ++di)
                for (int dj = 0; dj < spec.window_w; ++dj) {
                  auto& out = y[(static_cast<std::size_t>(i) * ow + j) * c + ch];
                  out = std::max(out, x[((static_cast<std::size_t>(i) * spec.stride + di) * w +
                                         j * spec.stride + dj) * c + ch]);
                }
        x = std::move(y);
        h = oh, w = ow;
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        std::vector<double> y(c, 0.0);
        for (int i = 0; i < h * w; ++i)
          for (int ch = 0; ch < c; ++ch) y[ch] += x[static_cast<std::size_t>(i) * c + ch] / (h * w);
        x = std::move(y);
        h = w = 1;
        break;
      }
      case LayerKind::kDense: {
        const auto& wt = params[p++]->value;
        const auto& b = params[p++]->value;
        std::vector<double> y(spec.units);
        for (int o = 0; o < spec.units; ++o) {
          y[o] = b.data[o];
          for (std::size_t i = 0; i < x.size(); ++i) y[o] += x[i] * wt.data[i * spec.units + o];
        }
        x = std::move(y);
        c = spec.units;
        break;
      }
      case LayerKind::kRelu:
        for (double& v : x) v = std::max(v, 0.0);
        break;
      case LayerKind::kSigmoid:
        for (double& v : x) v = 1.0 / (1.0 + std::exp(-v));
        break;
      case LayerKind::kDropout:
        break;
      default:
        throw std::logic_error("unexpected layer");
    }
  }
  return x.at(0);
}

nn::Tensor<float> AsBatch(const std::vector<Matrix>& images) {
  nn::Tensor<float> t({static_cast<int>(images.size()), static_cast<int>(images[0].rows),
                       static_cast<int>(images[0].cols), 1});
  std::size_t k = 0;
  for (const auto& m : images)
    for (double v : m.data) t.data[k++] = static_cast<float>(v);
  return t;
}

Matrix RandomImage(Rng& rng, double offset, std::size_t rows = 64, std::size_t cols = 256) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.Normal() + (r < 8 ? offset : 0.0);
  return m;
}

// --- cnn -------------------------------------------------------------------

TEST_CASE("full-width CNN shapes and parameter counts") {
  const CnnModel m = BuildCnn(CnnArchitecture::Full(), 1);
  const auto shapes = m.net.LayerOutputShapes();
  const auto counts = m.net.LayerParameterCounts();
  std::vector<Shape> got;
  std::vector<std::size_t> got_counts;
  for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
    const auto k = m.arch.layers[i].kind;
    if (k == LayerKind::kConv2d || k == LayerKind::kMaxPool2d || k == LayerKind::kGlobalAvgPool ||
        k == LayerKind::kDense) {
      got.push_back(shapes[i]);
      got_counts.push_back(counts[i]);
    }
  }
  const std::vector<Shape> want = {{64, 256, 32},  {64, 256, 64},  {32, 128, 64}, {32, 128, 256},
                                   {16, 64, 256},  {16, 64, 256},  {8, 32, 256},  {8, 32, 256},
                                   {4, 16, 256},   {4, 16, 512},   {512},         {256},
                                   {1}};
  const std::vector<std::size_t> want_counts = {1600,   51264, 0, 147712, 0,      590080, 0,
                                                590080, 0,     1180160, 0, 131328, 257};
  CHECK(got == want);
  CHECK(got_counts == want_counts);
  CHECK(m.net.ParameterCount() == 2692481);
  // Dropout 0.2 directly after every ReLU.
  for (std::size_t i = 0; i < m.arch.layers.size(); ++i)
    if (m.arch.layers[i].kind == LayerKind::kRelu) {
      REQUIRE(i + 1 < m.arch.layers.size());
      CHECK(m.arch.layers[i + 1].kind == LayerKind::kDropout);
      CHECK(m.arch.layers[i + 1].rate == 0.2);
    }
  CHECK(CnnArchitecture::FromJson(m.arch.ToJson()).layers == m.arch.layers);
}

TEST_CASE("augment shift arithmetic") {
  std::vector<double> x(100, 0.0);
  x[10] = 1.0;
  const auto y = ShiftAudio(x, 0.25);
  CHECK(y[35] == 1.0);
  CHECK(std::count(y.begin(), y.end(), 0.0) == 99);
  for (int i = 0; i < 25; ++i) CHECK(y[i] == 0.0);
  CHECK(ShiftAudio(x, 0.0) == x);
  CHECK(ShiftAudio(x, -0.1)[0] == 1.0);

  AugmentSpec off;
  off.shift_probability = 0;
  off.noise_probability = 0;
  Rng rng(4);
  std::vector<double> z(333);
  for (auto& v : z) v = rng.Normal();
  CHECK(AugmentAudio(z, off, rng) == z);

  // Noise level relative to the signal RMS.
  AugmentSpec noise = off;
  noise.noise_probability = 1;
  noise.noise_param_min = noise.noise_param_max = 0.5;
  std::vector<double> ones(200000, 2.0);
  const auto n = AugmentAudio(ones, noise, rng);
  double ss = 0;
  for (std::size_t i = 0; i < n.size(); ++i) ss += (n[i] - 2.0) * (n[i] - 2.0);
  CHECK(std::sqrt(ss / n.size()) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("forward matches the naive oracle") {
  CnnModel m = BuildCnn(CnnArchitecture::Scaled({3, 4, 5, 4, 4, 6}, 5), 7);
  // Non-zero biases make the zero-input case non-trivial (border effects of
  // "same" padding propagate through every layer).
  Rng rng(11);
  for (auto* p : m.net.Params())
    for (auto& v : p->value.data) v = static_cast<float>(rng.Uniform(-0.3, 0.3));
  Matrix zero(64, 256, 0.0);
  const double want = NaiveCnnForward(m, zero);
  const auto got = m.net.Forward(AsBatch({zero}), {});
  CHECK(got.data[0] == doctest::Approx(want).epsilon(1e-5));
  CHECK(want != doctest::Approx(0.5).epsilon(1e-3));
  const Matrix r = RandomImage(rng, 0.0);
  CHECK(m.net.Forward(AsBatch({r}), {}).data[0] == doctest::Approx(NaiveCnnForward(m, r)).epsilon(1e-5));
}

TEST_CASE("sixteen-example memorization") {
  const auto arch = CnnArchitecture::Toy(0.0);
  CnnModel m = BuildCnn(arch, 3);
  Rng rng(21);
  std::vector<Matrix> images;
  std::vector<float> labels;
  for (int i = 0; i < 16; ++i) {
    images.push_back(RandomImage(rng, 0.0));
    labels.push_back(static_cast<float>(i % 2));
  }
  const auto x = AsBatch(images);
  nn::Optimizer<float> opt(nn::OptimizerConfig::Adamax(CnnTrainConfig::Toy().learning_rate));
  m.net.set_input_grad(false);
  double loss = 1.0;
  int step = 0;
  for (; step < 500 && loss >= 0.05; ++step) {
    m.net.ZeroGrad();
    const auto p = m.net.Forward(x, {nn::Mode::kTrain, &rng});
    nn::Tensor<float> g;
    loss = nn::BinaryCrossEntropy(p, labels, &g);
    m.net.Backward(g);
    opt.Step(m.net.Params());
  }
  MESSAGE("memorized after " << step << " steps");
  CHECK(loss < 0.05);
}

SonographSet ToySonographs(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  SonographSet s;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int y = i % 2;
    s.images.push_back(RandomImage(rng, y ? 1.5 : 0.0));
    s.labels.push_back(y);
    s.ids.push_back("s" + std::to_string(i));
  }
  return s;
}

TEST_CASE("cnn training, prediction and checkpoint reload") {
  const auto train = ToySonographs(8, 1), val = ToySonographs(6, 2);
  const auto arch = CnnArchitecture::Scaled({2, 4, 4, 4, 4, 4}, 4);
  CnnTrainConfig cfg = CnnTrainConfig::Toy();
  cfg.epochs = 2;
  cfg.upsample_ratio = 1;
  cfg.augmented_copies = 0;
  const auto a = TrainCnn(train, val, arch, cfg, 5);
  const auto b = TrainCnn(train, val, arch, cfg, 5);
  REQUIRE(a.history.epochs.size() == 2);
  CHECK(a.history.epochs == b.history.epochs);
  double best = 0;
  for (const auto& e : a.history.epochs) best = std::max(best, e.validation_auc);
  CHECK(a.history.best_auc == best);

  CnnModel model = a.model;
  const auto p1 = PredictCnn(model, val.images);
  const auto p2 = PredictCnn(model, val.images);
  CHECK(p1 == p2);
  for (double p : p1) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  ScoredSet s1;
  for (std::size_t i = 0; i < p1.size(); ++i) s1.Add(p1[i], val.labels[i] == 1, val.ids[i]);
  CHECK(RocAndAuc(s1).auc == a.history.best_auc);

  const auto path = std::filesystem::temp_directory_path() / "coughgate_cnn_test.ckpt";
  SaveCnn(model, path, {{"epoch", a.history.best_epoch}});
  CnnModel back = LoadCnn(path);
  CHECK(PredictCnn(back, val.images) == p1);
  CHECK(back.stats.mean == model.stats.mean);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");

  Matrix wrong(32, 256);
  CHECK_THROWS(PredictCnn(model, wrong));
  SonographSet one_class = val;
  std::fill(one_class.labels.begin(), one_class.labels.end(), 0);
  CHECK_THROWS(TrainCnn(train, one_class, arch, cfg, 5));
  CHECK_THROWS(TrainCnn(SonographSet{}, val, arch, cfg, 5));
}

// --- ssl -------------------------------------------------------------------

Matrix RandomSpec(Rng& rng, std::size_t frames, std::size_t bins) {
  Matrix m(frames, bins);
  for (auto& v : m.data) v = rng.Normal(1.0, 1.0);
  return m;
}

TEST_CASE("mask statistics, identity and locality") {
  Rng rng(99);
  const MaskSpec spec;
  const std::size_t bins = 65;
  double frac_sum = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t frames = 20 + draw % 180;
    const Matrix x = RandomSpec(rng, frames, bins);
    MaskSpec quiet = spec;
    quiet.noise_probability = 0.0;
    const auto m = MaskSpectrogram(x, quiet, rng);
    std::set<int> frames_masked;
    for (int s : m.block_starts)
      for (int t = s; t < s + spec.time_block_width; ++t) {
        CHECK(frames_masked.insert(t).second);  // blocks never overlap
        CHECK(t < static_cast<int>(frames));
      }
    frac_sum += static_cast<double>(frames_masked.size()) / static_cast<double>(frames);
    CHECK(m.band_width <= static_cast<int>(0.2 * bins));
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t b = 0; b < bins; ++b) {
        const bool in_block = frames_masked.count(static_cast<int>(t)) > 0;
        const bool in_band = static_cast<int>(b) >= m.band_start && static_cast<int>(b) < m.band_start + m.band_width;
        const bool masked = m.mask[t * bins + b] != 0;
        CHECK(masked == (in_block || in_band));
        if (masked) CHECK(m.values(t, b) == 0.0);
        else if (x(t, b) != m.values(t, b)) FAIL("unmasked cell changed");
      }
  }
  const double mean = frac_sum / 1000.0;
  MESSAGE("mean masked time fraction " << mean);
  CHECK(mean >= 0.13);
  CHECK(mean <= 0.17);

  const Matrix x = RandomSpec(rng, 50, bins);
  const auto id = MaskSpectrogram(x, MaskSpec::None(), rng);
  CHECK(id.values == x);
  CHECK(std::count(id.mask.begin(), id.mask.end(), 1) == 0);
  CHECK_THROWS(MaskSpectrogram(RandomSpec(rng, 6, bins), spec, rng));

  MaskSpec noisy;
  noisy.noise_probability = 1.0;
  const auto n = MaskSpectrogram(x, noisy, rng);
  CHECK(n.noise_added);
}

EncoderConfig TinyEncoder() { return {2, 16, 4, 32, 33}; }
StftConfig TinyStft() {
  StftConfig s;
  s.n_freq = 64;
  s.win_length = 64;
  s.hop_length = 32;
  return s;
}

SslEncoder TinyEncoderModel(std::uint64_t seed) {
  SslEncoder e = BuildEncoder(TinyEncoder(), TinyStft(), seed);
  e.stats.mean.assign(33, 0.0);
  e.stats.stddev.assign(33, 1.0);
  return e;
}

TEST_CASE("encoder shape and padding invariance") {
  SslEncoder e = TinyEncoderModel(3);
  Rng rng(5);
  const Matrix a = RandomSpec(rng, 13, 33), b = RandomSpec(rng, 29, 33);
  const Matrix ea = Encode(e, a);
  CHECK(ea.rows == 13);
  CHECK(ea.cols == 16);
  const auto batch = PadBatch({&a, &b});
  CHECK(batch.x.shape == Shape{2, 29, 33});
  CHECK(std::count(batch.validity.begin(), batch.validity.end(), 1) == 13 + 29);
  const auto h = e.net.Forward(batch.x, {nn::Mode::kEval, nullptr, &batch.validity});
  double worst = 0;
  for (std::size_t t = 0; t < 13; ++t)
    for (std::size_t d = 0; d < 16; ++d) worst = std::max(worst, std::abs(h.data[t * 16 + d] - ea(t, d)));
  CHECK(worst <= 1e-6);
  CHECK(Encode(e, a) == ea);
  CHECK_THROWS(Encode(e, RandomSpec(rng, 10, 32)));
}

TEST_CASE("full-width encoder is constructible") {
  SslEncoder e = BuildEncoder(EncoderConfig::Full(), StftConfig{}, 1);
  e.stats.mean.assign(1025, 0.0);
  e.stats.stddev.assign(1025, 1.0);
  Rng rng(1);
  const Matrix out = Encode(e, RandomSpec(rng, 4, 1025));
  CHECK(out.rows == 4);
  CHECK(out.cols == 768);
  SslHead head = BuildHead(768, 512, 2);
  CHECK(head.net.input_shape().back() == 768);
}

std::vector<Matrix> LabeledSpecs(int n, std::vector<int>& labels, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> v;
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    Matrix m = RandomSpec(rng, 10 + i % 7, 33);
    for (std::size_t t = 0; t < m.rows; ++t) m(t, y ? 5 : 20) += 3.0;
    v.push_back(m);
    labels.push_back(y);
  }
  return v;
}

TEST_CASE("downstream keeps the encoder frozen and evaluates on schedule") {
  SslEncoder e = TinyEncoderModel(8);
  const auto before = e.net.Snapshot();
  std::vector<int> ytr, yva;
  const auto tr = LabeledSpecs(24, ytr, 1), va = LabeledSpecs(12, yva, 2);
  DownstreamConfig cfg = DownstreamConfig::Toy();
  cfg.steps = 60;
  cfg.warmup_steps = 10;
  cfg.eval_interval = 20;
  cfg.head_width = 16;
  const auto r = TrainDownstream(e, tr, ytr, va, yva, cfg, 4);
  CHECK(e.net.Snapshot() == before);
  CHECK(r.history.losses.size() == 60);
  REQUIRE(r.history.evals.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(r.history.evals[i].step == 20 * (i + 1));
  double best = 0;
  for (const auto& ev : r.history.evals) best = std::max(best, ev.auc);
  CHECK(r.history.best_auc == best);

  // The returned head reproduces the best evaluation.
  SslHead head = r.head;
  std::vector<Matrix> enc;
  for (const auto& m : va) enc.push_back(Encode(e, m));
  const auto scores = PredictEncoded(head, enc);
  ScoredSet s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores[i] > 0.0);
    CHECK(scores[i] < 1.0);
    s.Add(scores[i], yva[i] == 1, std::to_string(i));
  }
  CHECK(RocAndAuc(s).auc == r.history.best_auc);
  CHECK(PredictSsl(e, head, va[0]) == PredictSsl(e, head, va[0]));

  const auto again = TrainDownstream(e, tr, ytr, va, yva, cfg, 4);
  CHECK(again.history.losses == r.history.losses);
  std::vector<int> ones(yva.size(), 1);
  CHECK_THROWS(TrainDownstream(e, tr, ytr, va, ones, cfg, 4));
  CHECK_THROWS(TrainDownstream(e, {}, {}, va, yva, cfg, 4));
}

TEST_CASE("upstream determinism and short-input skipping") {
  std::vector<int> y;
  auto specs = LabeledSpecs(10, y, 3);
  Rng rng(1);
  specs.push_back(RandomSpec(rng, 5, 33));
  UpstreamConfig u = UpstreamConfig::Toy();
  u.batch_size = 4;
  u.total_steps = 12;
  u.warmup_steps = 3;
  const auto a = PretrainUpstream(specs, TinyEncoder(), u, MaskSpec{}, TinyStft(), 6);
  const auto b = PretrainUpstream(specs, TinyEncoder(), u, MaskSpec{}, TinyStft(), 6);
  CHECK(a.loss_history.size() == 12);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.skipped_short == 1);
  for (double l : a.loss_history) CHECK(std::isfinite(l));
  CHECK_THROWS(PretrainUpstream({}, TinyEncoder(), u, MaskSpec{}, TinyStft(), 6));
}

TEST_CASE("ssl prediction ignores trailing silence outside the segments") {
  SynthOptions opt;
  Rng rng(17);
  AudioBuffer audio = SynthCough(600.0, opt, rng);
  SslEncoder e = BuildEncoder(TinyEncoder(), TinyStft(), 2);
  e.stats.mean.assign(33, 0.0);
  e.stats.stddev.assign(33, 1.0);
  SslHead head = BuildHead(16, 8, 3);
  const auto q1 = Screen(audio, GateThresholds{});
  REQUIRE(!q1.segments.empty());
  const double p1 = PredictSsl(e, head, audio, q1.segments);
  AudioBuffer longer = audio;
  longer.samples.resize(audio.samples.size() + 16000, 0.0);
  const auto q2 = Screen(longer, GateThresholds{});
  CHECK(q2.segments == q1.segments);
  CHECK(PredictSsl(e, head, longer, q2.segments) == p1);
  CHECK(p1 > 0.0);
  CHECK(p1 < 1.0);
  CHECK_THROWS(PredictSsl(e, head, audio, {}));
}

}  // namespace
}  // namespace coughgate
