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

#ifndef COUGHGATE_WORKFLOW_H_
#define COUGHGATE_WORKFLOW_H_

#include <cstdint>
#include <vector>

#include "coughgate/cnn_model.h"
#include "coughgate/eval.h"
#include "coughgate/pipeline.h"
#include "coughgate/ssl_model.h"
#include "coughgate/svm.h"

namespace coughgate {

// Glue between prepared records and the three models, shared by the CLI and
// the acceptance harness.

struct SvmFit {
  SvmModel model;  // stats and Platt parameters filled in
  int passes = 0;
  bool converged = false;
};

/// Features, z-scoring, SMO, then Platt scaling on the training decision
/// values.
SvmFit FitSvm(const std::vector<PreparedRecord>& train, const SvmParams& params,
              std::uint64_t seed);

ScoredSet ScoreSvm(const SvmModel& model, const std::vector<PreparedRecord>& records);

CnnTrainResult FitCnn(const std::vector<PreparedRecord>& train,
                      const std::vector<PreparedRecord>& validation, const CnnArchitecture& arch,
                      const CnnTrainConfig& config, std::uint64_t seed);

ScoredSet ScoreCnn(CnnModel& model, const std::vector<PreparedRecord>& records);

std::vector<Matrix> SslSpectrograms(const std::vector<PreparedRecord>& records,
                                    const StftConfig& stft);

UpstreamResult FitUpstream(const std::vector<PreparedRecord>& records,
                           const EncoderConfig& econfig, const UpstreamConfig& uconfig,
                           const MaskSpec& mspec, const StftConfig& stft, std::uint64_t seed);

DownstreamResult FitDownstream(SslEncoder& encoder, const std::vector<PreparedRecord>& train,
                               const std::vector<PreparedRecord>& validation,
                               const DownstreamConfig& config, std::uint64_t seed);

ScoredSet ScoreSsl(SslEncoder& encoder, SslHead& head, const std::vector<PreparedRecord>& records);

/// Labels of labeled records (1 positive, 0 negative).
std::vector<int> Labels(const std::vector<PreparedRecord>& records);

/// Looks prepared records up by id for the ablation trainers.
class PreparedIndex {
 public:
  explicit PreparedIndex(const std::vector<PreparedRecord>& records);
  std::vector<PreparedRecord> Resolve(const std::vector<DatasetRecord>& records) const;

 private:
  std::vector<PreparedRecord> records_;
  std::vector<std::pair<std::string, std::size_t>> by_id_;  // sorted
};

AblationTrainer SvmAblationTrainer(const PreparedIndex& index, const SvmParams& params);
AblationTrainer CnnAblationTrainer(const PreparedIndex& index, const CnnArchitecture& arch,
                                   const CnnTrainConfig& config);

}  // namespace coughgate

#endif  // COUGHGATE_WORKFLOW_H_
