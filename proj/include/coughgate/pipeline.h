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

#ifndef COUGHGATE_PIPELINE_H_
#define COUGHGATE_PIPELINE_H_

#include <string>
#include <vector>

#include "coughgate/audio_io.h"
#include "coughgate/dataset.h"
#include "coughgate/quality_gate.h"
#include "json.hpp"

namespace coughgate {

/// A manifest record with its 16 kHz audio and quality report.
struct PreparedRecord {
  DatasetRecord record;
  AudioBuffer audio;
  QualityReport quality;
};

struct PrepareOptions {
  GateThresholds thresholds;
  ScreenOptions screen;
  int workers = 1;
};

/// Loads, standardizes and screens every record; output follows input order.
/// Unreadable audio raises AudioError naming the record.
std::vector<PreparedRecord> PrepareRecords(const DatasetManifest& manifest,
                                           const std::vector<DatasetRecord>& records,
                                           const PrepareOptions& options);

/// Records whose quality report passed.
std::vector<PreparedRecord> PassingOnly(std::vector<PreparedRecord> records);

std::vector<DatasetRecord> RecordsOf(const std::vector<PreparedRecord>& prepared);

/// 1 for positive, 0 otherwise; throws for unlabeled records.
int BinaryLabel(const DatasetRecord& record);

nlohmann::json QualityReportToJson(const QualityReport& report);

}  // namespace coughgate

#endif  // COUGHGATE_PIPELINE_H_
