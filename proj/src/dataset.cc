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

#include "coughgate/dataset.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "coughgate/random.h"

namespace coughgate {

namespace {

const char* const kRequiredColumns[] = {"id", "audio_path", "label", "split",
                                        "source"};

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return std::string(s.substr(b, e - b));
}

std::string QuoteCsv(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string_view ToString(Label label) {
  switch (label) {
    case Label::kPositive: return "positive";
    case Label::kNegative: return "negative";
    case Label::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view ToString(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

Label ParseLabel(std::string_view s) {
  if (s == "positive") return Label::kPositive;
  if (s == "negative") return Label::kNegative;
  if (s == "unlabeled") return Label::kUnlabeled;
  throw std::invalid_argument("unknown label \"" + std::string(s) + "\"");
}

Split ParseSplit(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split \"" + std::string(s) + "\"");
}

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(Trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted field");
  fields.push_back(Trim(cur));
  return fields;
}

DatasetManifest ParseManifestText(std::string_view text) {
  DatasetManifest manifest;
  std::vector<std::string> lines;
  {
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) lines.push_back(line);
  }
  std::size_t pos = 0;
  if (!lines.empty() && lines[0].rfind("#schema_version=", 0) == 0) {
    manifest.schema_version = std::stoi(lines[0].substr(16));
    ++pos;
  }
  if (pos >= lines.size()) throw ManifestError("manifest has no header row", {1});

  // Row numbers count the header as row 1, excluding the version comment.
  const std::size_t header_line = pos;
  std::vector<std::string> header = SplitCsvLine(lines[pos++]);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* required : kRequiredColumns) {
    if (!column.count(required))
      throw ManifestError(std::string("missing required column \"") +
                              required + "\" (row 1)",
                          {1});
  }

  std::unordered_map<std::string, int> first_row_of_id;
  for (; pos < lines.size(); ++pos) {
    const int row = static_cast<int>(pos - header_line) + 1;
    if (Trim(lines[pos]).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = SplitCsvLine(lines[pos]);
    } catch (const std::invalid_argument& e) {
      throw ManifestError(std::string(e.what()) + " at row " +
                              std::to_string(row),
                          {row});
    }
    if (fields.size() != header.size())
      throw ManifestError("row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) +
                              " fields, header has " +
                              std::to_string(header.size()),
                          {row});
    DatasetRecord rec;
    rec.id = fields[column["id"]];
    rec.audio_path = fields[column["audio_path"]];
    rec.source = fields[column["source"]];
    try {
      rec.label = ParseLabel(fields[column["label"]]);
      rec.split = ParseSplit(fields[column["split"]]);
    } catch (const std::invalid_argument& e) {
      throw ManifestError(std::string(e.what()) + " at row " +
                              std::to_string(row),
                          {row});
    }
    if (rec.id.empty())
      throw ManifestError("empty id at row " + std::to_string(row), {row});
    if (rec.audio_path.empty())
      throw ManifestError("empty audio_path at row " + std::to_string(row),
                          {row});
    if (rec.label == Label::kUnlabeled && rec.split != Split::kTrain)
      throw ManifestError("unlabeled record outside the train split at row " +
                              std::to_string(row),
                          {row});
    auto [it, inserted] = first_row_of_id.emplace(rec.id, row);
    if (!inserted)
      throw ManifestError("duplicate id \"" + rec.id + "\" at rows " +
                              std::to_string(it->second) + " and " +
                              std::to_string(row),
                          {it->second, row});
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string& name = header[i];
      if (std::find(std::begin(kRequiredColumns), std::end(kRequiredColumns),
                    name) != std::end(kRequiredColumns))
        continue;
      if (!fields[i].empty()) rec.metadata[name] = fields[i];
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

DatasetManifest ParseManifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest " + path.string(), {});
  std::ostringstream ss;
  ss << in.rdbuf();
  DatasetManifest manifest = ParseManifestText(ss.str());
  manifest.base_dir = path.parent_path();
  return manifest;
}

std::string SerializeManifest(const DatasetManifest& manifest) {
  std::set<std::string> meta_keys;
  for (const auto& r : manifest.records)
    for (const auto& [k, v] : r.metadata) meta_keys.insert(k);

  std::ostringstream out;
  out << "#schema_version=" << manifest.schema_version << "\n";
  out << "id,audio_path,label,split,source";
  for (const auto& k : meta_keys) out << ',' << QuoteCsv(k);
  out << "\n";
  for (const auto& r : manifest.records) {
    out << QuoteCsv(r.id) << ',' << QuoteCsv(r.audio_path) << ','
        << ToString(r.label) << ',' << ToString(r.split) << ','
        << QuoteCsv(r.source);
    for (const auto& k : meta_keys) {
      auto it = r.metadata.find(k);
      out << ',' << (it == r.metadata.end() ? "" : QuoteCsv(it->second));
    }
    out << "\n";
  }
  return out.str();
}

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << SerializeManifest(manifest);
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

std::filesystem::path ResolveAudioPath(const DatasetManifest& manifest,
                                       const DatasetRecord& record) {
  std::filesystem::path p(record.audio_path);
  if (p.is_absolute() || manifest.base_dir.empty()) return p;
  return manifest.base_dir / p;
}

std::vector<DatasetRecord> SelectSplit(const DatasetManifest& manifest,
                                       Split split, bool labeled_only) {
  std::vector<DatasetRecord> out;
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    if (labeled_only && !r.IsLabeled()) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<RecordCopy> BalanceUpsample(const std::vector<DatasetRecord>& records,
                                        int ratio, std::uint64_t rng_seed) {
  if (ratio <= 0) throw std::invalid_argument("upsample ratio must be >= 1");
  std::vector<RecordCopy> out;
  for (const auto& r : records) {
    if (!r.IsLabeled())
      throw std::invalid_argument("cannot balance unlabeled record \"" + r.id +
                                  "\"");
    const int copies = r.label == Label::kPositive ? ratio : 1;
    for (int c = 0; c < copies; ++c) out.push_back({r, c});
  }
  Rng rng(rng_seed);
  rng.Shuffle(out);
  return out;
}

}  // namespace coughgate
