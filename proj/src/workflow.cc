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

#include "coughgate/workflow.h"

#include <algorithm>
#include <stdexcept>

namespace coughgate {

std::vector<int> Labels(const std::vector<PreparedRecord>& records) {
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& p : records) y.push_back(BinaryLabel(p.record));
  return y;
}

SvmFit FitSvm(const std::vector<PreparedRecord>& train, const SvmParams& params,
              std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("svm: empty training split");
  std::vector<SvmFeatureVector> raw;
  std::vector<int> y;
  for (const auto& p : train) {
    raw.push_back(ComputeSvmFeatures(p.audio, p.quality.segments));
    y.push_back(BinaryLabel(p.record) == 1 ? 1 : -1);
  }
  FeatureStats stats;
  const auto z = NormalizeFeatures(raw, std::nullopt, &stats);
  std::vector<std::vector<double>> x;
  x.reserve(z.size());
  for (const auto& v : z) x.push_back(v.values);
  auto trained = TrainSvm(x, y, params, seed);
  std::vector<double> dv;
  dv.reserve(x.size());
  for (const auto& v : x) dv.push_back(DecisionValue(trained.model, v));
  SvmFit fit;
  fit.model = std::move(trained.model);
  fit.model.platt = FitPlatt(dv, y);
  fit.model.stats = stats;
  fit.passes = trained.passes;
  fit.converged = trained.converged;
  return fit;
}

ScoredSet ScoreSvm(const SvmModel& model, const std::vector<PreparedRecord>& records) {
  ScoredSet s;
  for (const auto& p : records)
    s.Add(PredictProbaRaw(model, ComputeSvmFeatures(p.audio, p.quality.segments).values),
          BinaryLabel(p.record), p.record.id);
  return s;
}

CnnTrainResult FitCnn(const std::vector<PreparedRecord>& train,
                      const std::vector<PreparedRecord>& validation, const CnnArchitecture& arch,
                      const CnnTrainConfig& config, std::uint64_t seed) {
  const SonographSet tr = BuildCnnTrainingSet(train, config, MixSeed(seed, 10));
  const SonographSet va = BuildSonographSet(validation);
  return TrainCnn(tr, va, arch, config, seed);
}

ScoredSet ScoreCnn(CnnModel& model, const std::vector<PreparedRecord>& records) {
  const SonographSet set = BuildSonographSet(records);
  const auto p = PredictCnn(model, set.images);
  ScoredSet s;
  for (std::size_t i = 0; i < p.size(); ++i) s.Add(p[i], set.labels[i], set.ids[i]);
  return s;
}

std::vector<Matrix> SslSpectrograms(const std::vector<PreparedRecord>& records,
                                    const StftConfig& stft) {
  std::vector<Matrix> out;
  out.reserve(records.size());
  for (const auto& p : records) out.push_back(SslSpectrogram(p.audio, p.quality.segments, stft));
  return out;
}

UpstreamResult FitUpstream(const std::vector<PreparedRecord>& records,
                           const EncoderConfig& econfig, const UpstreamConfig& uconfig,
                           const MaskSpec& mspec, const StftConfig& stft, std::uint64_t seed) {
  return PretrainUpstream(SslSpectrograms(records, stft), econfig, uconfig, mspec, stft, seed);
}

DownstreamResult FitDownstream(SslEncoder& encoder, const std::vector<PreparedRecord>& train,
                               const std::vector<PreparedRecord>& validation,
                               const DownstreamConfig& config, std::uint64_t seed) {
  return TrainDownstream(encoder, SslSpectrograms(train, encoder.stft), Labels(train),
                         SslSpectrograms(validation, encoder.stft), Labels(validation), config,
                         seed);
}

ScoredSet ScoreSsl(SslEncoder& encoder, SslHead& head, const std::vector<PreparedRecord>& records) {
  std::vector<Matrix> enc;
  for (const auto& m : SslSpectrograms(records, encoder.stft)) enc.push_back(Encode(encoder, m));
  const auto p = PredictEncoded(head, enc);
  ScoredSet s;
  for (std::size_t i = 0; i < p.size(); ++i)
    s.Add(p[i], BinaryLabel(records[i].record), records[i].record.id);
  return s;
}

PreparedIndex::PreparedIndex(const std::vector<PreparedRecord>& records) : records_(records) {
  for (std::size_t i = 0; i < records_.size(); ++i) by_id_.emplace_back(records_[i].record.id, i);
  std::sort(by_id_.begin(), by_id_.end());
}

std::vector<PreparedRecord> PreparedIndex::Resolve(const std::vector<DatasetRecord>& records) const {
  std::vector<PreparedRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto it = std::lower_bound(by_id_.begin(), by_id_.end(), std::make_pair(r.id, std::size_t{0}));
    if (it == by_id_.end() || it->first != r.id)
      throw std::invalid_argument("no prepared audio for record '" + r.id + "'");
    out.push_back(records_[it->second]);
  }
  return out;
}

AblationTrainer SvmAblationTrainer(const PreparedIndex& index, const SvmParams& params) {
  return [&index, params](const std::vector<DatasetRecord>& train,
                          const std::vector<DatasetRecord>& validation, std::uint64_t seed) {
    const SvmFit fit = FitSvm(index.Resolve(train), params, seed);
    return ScoreSvm(fit.model, index.Resolve(validation));
  };
}

AblationTrainer CnnAblationTrainer(const PreparedIndex& index, const CnnArchitecture& arch,
                                   const CnnTrainConfig& config) {
  return [&index, arch, config](const std::vector<DatasetRecord>& train,
                                const std::vector<DatasetRecord>& validation, std::uint64_t seed) {
    const auto va = index.Resolve(validation);
    auto result = FitCnn(index.Resolve(train), va, arch, config, seed);
    return ScoreCnn(result.model, va);
  };
}

}  // namespace coughgate
