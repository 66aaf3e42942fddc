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

#ifndef COUGHGATE_EVAL_H_
#define COUGHGATE_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughgate/dataset.h"
#include "json.hpp"

namespace coughgate {

/// Scores in [0, 1] with binary labels (1 = positive).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;

  void Add(double score, int label, std::string id = {}) {
    scores.push_back(score);
    labels.push_back(label);
    ids.push_back(std::move(id));
  }
  std::size_t size() const { return scores.size(); }
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold are called positive
  bool operator==(const RocPoint&) const = default;
};

struct EvalReport {
  double auc = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.5;
  std::vector<RocPoint> roc;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool operator==(const EvalReport&) const = default;
};

/// Raised when AUC or a rate is undefined for the given labels.
class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RocResult {
  std::vector<RocPoint> roc;
  double auc = 0.0;
};

/// Descending-score sweep with tied scores grouped into one step; the AUC is
/// the exact trapezoid area, equal to P(s+ > s-) + P(s+ = s-)/2.
RocResult RocAndAuc(const ScoredSet& set);

/// Positive iff score >= threshold. Sensitivity (specificity) is NaN when the
/// set has no positives (negatives).
EvalReport MetricsAtThreshold(const ScoredSet& set, double threshold = 0.5);

/// ROC, AUC and threshold metrics together.
EvalReport Evaluate(const ScoredSet& set, double threshold = 0.5);

// --- Sample-size ablation ----------------------------------------------------

/// Trains on `train` with `seed` and returns scores on `validation`.
using AblationTrainer = std::function<ScoredSet(
    const std::vector<DatasetRecord>& train,
    const std::vector<DatasetRecord>& validation, std::uint64_t seed)>;

struct AblationRow {
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::size_t train_positives = 0;
  bool skipped = false;
  std::string note;
  EvalReport report;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // sorted by fraction, then seed
};

inline const std::vector<double> kAblationFractions = {0.2, 0.4, 0.6, 0.8, 1.0};

/// Per label, keeps round(fraction * count) records chosen by a seeded
/// shuffle; output preserves the input order.
std::vector<DatasetRecord> StratifiedSubsample(const std::vector<DatasetRecord>& records,
                                               double fraction, std::uint64_t seed);

/// Runs `trainer` for every (fraction, seed) pair, `workers` rows at a time.
AblationTable Ablate(const AblationTrainer& trainer,
                     const std::vector<DatasetRecord>& train,
                     const std::vector<DatasetRecord>& validation,
                     std::vector<double> fractions,
                     const std::vector<std::uint64_t>& seeds, int workers = 1);

// --- Report emission ----------------------------------------------------------

nlohmann::json ToJson(const EvalReport& report);
EvalReport EvalReportFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const AblationTable& table);

std::string RocCsv(const EvalReport& report);
std::string AblationCsv(const AblationTable& table);
/// One polyline of the ROC points in a unit-square plot.
std::string RocSvg(const EvalReport& report);

/// Writes <stem>.json, <stem>.csv and <stem>.svg.
void EmitReport(const EvalReport& report, const std::filesystem::path& stem);
/// Writes <stem>.json and <stem>.csv.
void EmitReport(const AblationTable& table, const std::filesystem::path& stem);

/// Serializes JSON with doubles at 17 significant digits.
std::string DumpJson(const nlohmann::json& j);

}  // namespace coughgate

#endif  // COUGHGATE_EVAL_H_
