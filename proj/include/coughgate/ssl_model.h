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

#ifndef COUGHGATE_SSL_MODEL_H_
#define COUGHGATE_SSL_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coughgate/dsp_features.h"
#include "coughgate/nn/layers.h"
#include "coughgate/random.h"
#include "coughgate/types.h"
#include "json.hpp"

namespace coughgate {

// --- Masking ----------------------------------------------------------------

struct MaskSpec {
  double time_mask_fraction = 0.15;
  double max_freq_band_fraction = 0.20;
  double noise_probability = 0.10;
  double noise_mean = 0.0;
  double noise_variance = 0.2;
  int time_block_width = 7;

  /// Everything off: masking is the identity.
  static MaskSpec None();
  void Validate() const;
  nlohmann::json ToJson() const;
  static MaskSpec FromJson(const nlohmann::json& j);
};

struct MaskedSpectrogram {
  Matrix values;
  std::vector<std::uint8_t> mask;  // rows x cols, 1 where a cell was zeroed
  std::vector<int> block_starts;   // sorted first frames of the time blocks
  int band_start = 0;
  int band_width = 0;
  bool noise_added = false;
};

/// Zeroes non-overlapping time blocks and one frequency band, then maybe adds
/// Gaussian noise to the whole image. The block count is
/// fraction * frames / width rounded stochastically, so the expected masked
/// fraction equals time_mask_fraction; placements are uniform over all
/// non-overlapping arrangements. Throws if a block does not fit.
MaskedSpectrogram MaskSpectrogram(const Matrix& spec, const MaskSpec& mspec, Rng& rng);

// --- Configs ------------------------------------------------------------------

struct EncoderConfig {
  int layers = 3;
  int hidden = 768;
  int heads = 12;
  int ffn = 3072;
  int n_bins = 1025;

  static EncoderConfig Full() { return {}; }
  static EncoderConfig Toy() { return {2, 64, 4, 128, 1025}; }
  void Validate() const;
  /// Input projection, positional encoding, `layers` x (attention, FFN),
  /// final layer norm.
  std::vector<nn::LayerSpec> Specs() const;
  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

struct UpstreamConfig {
  int batch_size = 64;
  double max_lr = 1e-4;
  std::int64_t total_steps = 400000;
  std::int64_t warmup_steps = 28000;
  double weight_decay = 0.01;
  /// Loss over masked cells only; false uses every valid cell.
  bool masked_only = true;

  static UpstreamConfig Full() { return {}; }
  static UpstreamConfig Toy();
  void Validate() const;
  nlohmann::json ToJson() const;
  static UpstreamConfig FromJson(const nlohmann::json& j);
};

struct DownstreamConfig {
  int batch_size = 8;
  double lr = 1e-4;
  std::int64_t steps = 6000;
  std::int64_t warmup_steps = 1000;
  int eval_interval = 300;
  int upsample_ratio = 5;
  int head_width = 512;
  double weight_decay = 0.01;

  static DownstreamConfig Full() { return {}; }
  static DownstreamConfig Toy();
  void Validate() const;
  nlohmann::json ToJson() const;
  static DownstreamConfig FromJson(const nlohmann::json& j);
};

// --- Models -------------------------------------------------------------------

/// Per-bin standardization of log spectrograms, fitted over training frames.
struct BinStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static BinStats Fit(const std::vector<Matrix>& spectrograms);
  void Apply(Matrix& spec) const;
};

struct SslEncoder {
  EncoderConfig config;
  StftConfig stft;
  BinStats stats;
  nn::Network<float> net;  // input [T, n_bins], output [T, hidden]
};

struct SslHead {
  nn::Network<float> net;  // input [T, hidden], output [1]
  int head_width = 0;
};

SslEncoder BuildEncoder(const EncoderConfig& config, const StftConfig& stft, std::uint64_t seed);
/// Three (dense, layer norm, ReLU) blocks, masked mean over frames, dense 1,
/// sigmoid.
SslHead BuildHead(int hidden, int head_width, std::uint64_t seed);

/// Log spectrogram of the cough-only audio (raw, not standardized).
Matrix SslSpectrogram(const AudioBuffer& buffer, const std::vector<CoughSegment>& segments,
                      const StftConfig& stft);

/// Zero-padded batch [N, T_max, D] with 1/0 frame validity.
struct PaddedBatch {
  nn::Tensor<float> x;
  std::vector<std::uint8_t> validity;
};
PaddedBatch PadBatch(const std::vector<const Matrix*>& items);

/// Encoder output [T x hidden] for one raw spectrogram (eval mode).
Matrix Encode(SslEncoder& encoder, const Matrix& raw);

// --- Training -----------------------------------------------------------------

struct UpstreamResult {
  SslEncoder encoder;  // prediction head discarded
  std::vector<double> loss_history;  // one entry per step
  std::size_t skipped_short = 0;     // inputs shorter than one time block
};

/// Masked reconstruction with a two-layer prediction head; AdamW with warmup
/// and linear decay. Batches cycle through seeded reshuffles of the inputs.
UpstreamResult PretrainUpstream(const std::vector<Matrix>& spectrograms,
                                const EncoderConfig& econfig, const UpstreamConfig& uconfig,
                                const MaskSpec& mspec, const StftConfig& stft,
                                std::uint64_t seed);

struct DownstreamEval {
  std::int64_t step = 0;  // evaluated after this many updates
  double auc = 0.0;
  bool operator==(const DownstreamEval&) const = default;
};

struct DownstreamHistory {
  std::vector<double> losses;  // one per step
  std::vector<DownstreamEval> evals;
  std::int64_t best_step = -1;
  double best_auc = 0.0;
};

struct DownstreamResult {
  SslHead head;  // parameters of the best evaluation
  DownstreamHistory history;
};

/// Trains a head on frozen encoder representations (computed once, unmasked).
/// Positives are upsampled by config.upsample_ratio.
DownstreamResult TrainDownstream(SslEncoder& encoder, const std::vector<Matrix>& train,
                                 const std::vector<int>& train_labels,
                                 const std::vector<Matrix>& validation,
                                 const std::vector<int>& validation_labels,
                                 const DownstreamConfig& config, std::uint64_t seed);

double PredictSsl(SslEncoder& encoder, SslHead& head, const Matrix& raw);
double PredictSsl(SslEncoder& encoder, SslHead& head, const AudioBuffer& buffer,
                  const std::vector<CoughSegment>& segments);
/// Scores of already-encoded inputs, in batches.
std::vector<double> PredictEncoded(SslHead& head, const std::vector<Matrix>& encoded,
                                   int batch_size = 32);

void SaveEncoder(const SslEncoder& encoder, const std::filesystem::path& path,
                 const nlohmann::json& metadata = nlohmann::json::object());
SslEncoder LoadEncoder(const std::filesystem::path& path);
void SaveHead(const SslHead& head, const std::filesystem::path& path,
              const nlohmann::json& metadata = nlohmann::json::object());
SslHead LoadHead(const std::filesystem::path& path);

nlohmann::json ToJson(const DownstreamHistory& history);

}  // namespace coughgate

#endif  // COUGHGATE_SSL_MODEL_H_
