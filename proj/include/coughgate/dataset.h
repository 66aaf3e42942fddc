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

#ifndef COUGHGATE_DATASET_H_
#define COUGHGATE_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coughgate {

enum class Label { kPositive, kNegative, kUnlabeled };
enum class Split { kTrain, kValidation, kTest };

std::string_view ToString(Label label);
std::string_view ToString(Split split);
Label ParseLabel(std::string_view s);  // throws std::invalid_argument
Split ParseSplit(std::string_view s);  // throws std::invalid_argument

struct DatasetRecord {
  std::string id;
  std::string audio_path;
  Label label = Label::kUnlabeled;
  Split split = Split::kTrain;
  std::string source;
  std::map<std::string, std::string> metadata;

  bool IsLabeled() const { return label != Label::kUnlabeled; }
  bool operator==(const DatasetRecord&) const = default;
};

struct DatasetManifest {
  std::vector<DatasetRecord> records;
  int schema_version = 1;
  /// Directory relative audio paths are resolved against. Not compared.
  std::filesystem::path base_dir;

  bool operator==(const DatasetManifest& other) const {
    return records == other.records && schema_version == other.schema_version;
  }
};

/// A manifest problem tied to a 1-based CSV row (the header is row 1).
class ManifestError : public std::runtime_error {
 public:
  ManifestError(const std::string& what, std::vector<int> rows)
      : std::runtime_error(what), rows_(std::move(rows)) {}
  const std::vector<int>& rows() const { return rows_; }

 private:
  std::vector<int> rows_;
};

/// Reads a CSV manifest with columns id,audio_path,label,split,source plus any
/// number of metadata columns. An optional first line "#schema_version=N"
/// sets the schema version.
DatasetManifest ParseManifest(const std::filesystem::path& path);
DatasetManifest ParseManifestText(std::string_view text);

std::string SerializeManifest(const DatasetManifest& manifest);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

/// Absolute (or base-relative) location of a record's audio.
std::filesystem::path ResolveAudioPath(const DatasetManifest& manifest,
                                       const DatasetRecord& record);

std::vector<DatasetRecord> SelectSplit(const DatasetManifest& manifest,
                                       Split split, bool labeled_only);

/// A reference to a record plus which duplicate of it this is. Copy index 0
/// is the original; upsampled positives get 0..ratio-1.
struct RecordCopy {
  DatasetRecord record;
  int copy_index = 0;
};

/// Repeats every positive `ratio` times, keeps negatives once, and returns a
/// seeded shuffle of the result.
std::vector<RecordCopy> BalanceUpsample(const std::vector<DatasetRecord>& records,
                                        int ratio, std::uint64_t rng_seed);

/// Splits one CSV line into fields (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> SplitCsvLine(std::string_view line);

}  // namespace coughgate

#endif  // COUGHGATE_DATASET_H_
