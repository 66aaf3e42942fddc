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

#ifndef COUGHGATE_CNN_MODEL_H_
#define COUGHGATE_CNN_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coughgate/augment.h"
#include "coughgate/nn/layers.h"
#include "coughgate/pipeline.h"
#include "coughgate/types.h"
#include "json.hpp"

namespace coughgate {

/// Layer list of the sonograph CNN: six "same" convolutions with pooling
/// after the 2nd through 5th, global average pooling, a ReLU dense layer and
/// a sigmoid output. Dropout follows every ReLU.
struct CnnArchitecture {
  std::vector<nn::LayerSpec> layers;
  nn::Shape input_shape = {kSonographRows, kSonographCols, 1};

  static constexpr int kSonographRows = 64;
  static constexpr int kSonographCols = 256;

  /// Full-size network: filters 32, 64, 256, 256, 256, 512 and dense 256.
  static CnnArchitecture Full(double dropout = 0.2);
  /// Same topology and kernel sizes with other widths.
  static CnnArchitecture Scaled(const std::array<int, 6>& filters, int dense, double dropout = 0.2);
  /// Width-reduced default for desk-scale runs.
  static CnnArchitecture Toy(double dropout = 0.2);

  nlohmann::json ToJson() const;
  static CnnArchitecture FromJson(const nlohmann::json& j);
};

struct CnnTrainConfig {
  double learning_rate = 1e-4;
  int epochs = 100;
  int batch_size = 16;
  int upsample_ratio = 4;
  /// Augmented copies per (upsampled) record, added next to the original.
  int augmented_copies = 1;
  AugmentSpec augment;

  /// Desk-scale preset: 25 epochs at lr 1e-3 (1e-4 barely moves the toy
  /// network in that budget).
  static CnnTrainConfig Toy();

  void Validate() const;
  nlohmann::json ToJson() const;
  static CnnTrainConfig FromJson(const nlohmann::json& j);
};

/// Per-row (MFCC coefficient) standardization fitted on the training images.
struct SonographStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static SonographStats Fit(const std::vector<Matrix>& images);
  void Apply(Matrix& image) const;
};

struct SonographSet {
  std::vector<Matrix> images;
  std::vector<int> labels;  // 1 positive, 0 negative
  std::vector<std::string> ids;
};

struct CnnModel {
  CnnArchitecture arch;
  nn::Network<float> net;
  SonographStats stats;
};

struct CnnEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_auc = 0.0;
  bool operator==(const CnnEpoch&) const = default;
};

struct CnnHistory {
  std::vector<CnnEpoch> epochs;
  int best_epoch = -1;
  double best_auc = 0.0;
};

struct CnnTrainResult {
  CnnModel model;  // weights of the best-AUC epoch
  CnnHistory history;
};

CnnModel BuildCnn(const CnnArchitecture& arch, std::uint64_t seed);

/// Original sonographs of every record (validation/test use).
SonographSet BuildSonographSet(const std::vector<PreparedRecord>& records);

/// Training images: positives upsampled by config.upsample_ratio, and every
/// copy contributes its original plus config.augmented_copies augmented
/// sonographs. Augmentation draws are seeded per (record, copy).
SonographSet BuildCnnTrainingSet(const std::vector<PreparedRecord>& records,
                                 const CnnTrainConfig& config, std::uint64_t seed);

/// Seeded init, per-epoch shuffles and dropout masks; Adamax on BCE. The
/// validation AUC is measured after each epoch and the best epoch's weights
/// are returned. Images are raw; the stats are fitted on `train`.
CnnTrainResult TrainCnn(const SonographSet& train, const SonographSet& validation,
                        const CnnArchitecture& arch, const CnnTrainConfig& config,
                        std::uint64_t seed);

/// Eval-mode probabilities for raw sonographs.
std::vector<double> PredictCnn(CnnModel& model, const std::vector<Matrix>& images,
                               int batch_size = 16);
double PredictCnn(CnnModel& model, const Matrix& image);

void SaveCnn(const CnnModel& model, const std::filesystem::path& path,
             const nlohmann::json& metadata = nlohmann::json::object());
CnnModel LoadCnn(const std::filesystem::path& path);

nlohmann::json ToJson(const CnnHistory& history);

}  // namespace coughgate

#endif  // COUGHGATE_CNN_MODEL_H_
