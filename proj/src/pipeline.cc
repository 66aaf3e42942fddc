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

#include "coughgate/pipeline.h"

#include <stdexcept>

#include "coughgate/parallel.h"

namespace coughgate {

std::vector<PreparedRecord> PrepareRecords(const DatasetManifest& manifest,
                                           const std::vector<DatasetRecord>& records,
                                           const PrepareOptions& options) {
  options.thresholds.Validate();
  return ParallelMap<PreparedRecord>(records.size(), options.workers, [&](std::size_t i) {
    PreparedRecord p;
    p.record = records[i];
    try {
      p.audio = LoadStandardized(ResolveAudioPath(manifest, records[i]));
    } catch (const AudioError& e) {
      throw AudioError("record " + records[i].id + ": " + e.what());
    }
    p.quality = Screen(p.audio, options.thresholds, options.screen);
    return p;
  });
}

std::vector<PreparedRecord> PassingOnly(std::vector<PreparedRecord> records) {
  std::vector<PreparedRecord> out;
  for (auto& r : records)
    if (r.quality.pass) out.push_back(std::move(r));
  return out;
}

std::vector<DatasetRecord> RecordsOf(const std::vector<PreparedRecord>& prepared) {
  std::vector<DatasetRecord> out;
  out.reserve(prepared.size());
  for (const auto& p : prepared) out.push_back(p.record);
  return out;
}

int BinaryLabel(const DatasetRecord& record) {
  switch (record.label) {
    case Label::kPositive: return 1;
    case Label::kNegative: return 0;
    default: throw std::invalid_argument("record " + record.id + " is unlabeled");
  }
}

nlohmann::json QualityReportToJson(const QualityReport& report) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : report.segments) segs.push_back({s.start, s.end});
  return {{"pass", report.pass},
          {"failed_checks", report.failed_checks},
          {"max_amplitude", report.max_amplitude},
          {"clipping_ratio", report.clipping_ratio},
          {"cough_probability", report.cough_probability},
          {"background_power_ratio", report.background_power_ratio},
          {"background_measured", report.background_measured},
          {"segments", segs},
          {"sample_rate", report.sample_rate},
          {"notes", report.notes}};
}

}  // namespace coughgate
