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

#ifndef COUGHGATE_CONFIG_H_
#define COUGHGATE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coughgate/cnn_model.h"
#include "coughgate/pipeline.h"
#include "coughgate/ssl_model.h"
#include "coughgate/svm.h"
#include "coughgate/synth.h"
#include "json.hpp"

namespace coughgate {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ConfigType { kInt, kUint, kDouble, kBool, kString, kDoubleList, kUintList };

struct ConfigKey {
  std::string name;  // "section.key"
  ConfigType type;
  std::string default_value;
  std::string help;
};

/// Every accepted key with its type and toy-scale default.
const std::vector<ConfigKey>& ConfigSchema();

/// Flat "section.key" -> value map, validated against the schema on every
/// write. Sources in increasing precedence: schema defaults, a config file,
/// COUGHGATE_<SECTION>_<KEY> environment variables, explicit overrides.
class RunConfig {
 public:
  RunConfig();

  /// INI-style text: "[section]" headers, "key = value" lines, '#' or ';'
  /// comments. `origin` names the source in error messages.
  void LoadText(std::string_view text, const std::string& origin = "<text>");
  void LoadFile(const std::filesystem::path& path);
  /// `lookup` maps a variable name to its value or nullptr (getenv by default).
  void LoadEnvironment(const std::function<const char*(const char*)>& lookup = nullptr);
  /// "section.key=value".
  void ApplyOverride(std::string_view assignment);
  void Set(const std::string& key, const std::string& value);

  const std::string& Raw(const std::string& key) const;
  std::int64_t GetInt(const std::string& key) const;
  std::uint64_t GetUint(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  bool GetBool(const std::string& key) const;
  std::string GetString(const std::string& key) const { return Raw(key); }
  std::vector<double> GetDoubleList(const std::string& key) const;
  std::vector<std::uint64_t> GetUintList(const std::string& key) const;

  /// Builds every module config so range errors surface before any work.
  void Validate() const;
  nlohmann::json ToJson() const;
  /// Canonical "key = value" text that LoadText reads back.
  std::string ToText() const;

  std::uint64_t seed() const { return GetUint("run.seed"); }
  int workers() const { return static_cast<int>(GetInt("run.workers")); }

  PrepareOptions Prepare() const;
  SvmParams Svm() const;
  CnnArchitecture CnnArch() const;
  CnnTrainConfig CnnTrain() const;
  MaskSpec Mask() const;
  EncoderConfig Encoder() const;
  UpstreamConfig Upstream() const;
  DownstreamConfig Downstream() const;
  StftConfig Stft() const;
  SynthOptions Synth() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Environment variable name of a key: COUGHGATE_ + upper case, '.' -> '_'.
std::string EnvName(const std::string& key);

}  // namespace coughgate

#endif  // COUGHGATE_CONFIG_H_
