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

#include "coughgate/config.h"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace coughgate {

namespace {

std::string Trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool ParseInt(const std::string& s, std::int64_t& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool ParseUint(const std::string& s, std::uint64_t& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool ParseDouble(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  v = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(v);
}

bool ParseBool(const std::string& s, bool& v) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return v = true, true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return v = false, true;
  return false;
}

const char* TypeName(ConfigType t) {
  switch (t) {
    case ConfigType::kInt: return "integer";
    case ConfigType::kUint: return "non-negative integer";
    case ConfigType::kDouble: return "number";
    case ConfigType::kBool: return "boolean";
    case ConfigType::kString: return "string";
    case ConfigType::kDoubleList: return "comma-separated numbers";
    case ConfigType::kUintList: return "comma-separated non-negative integers";
  }
  return "?";
}

bool TypeCheck(ConfigType t, const std::string& v) {
  std::int64_t i;
  std::uint64_t u;
  double d;
  bool b;
  switch (t) {
    case ConfigType::kInt: return ParseInt(v, i);
    case ConfigType::kUint: return ParseUint(v, u);
    case ConfigType::kDouble: return ParseDouble(v, d);
    case ConfigType::kBool: return ParseBool(v, b);
    case ConfigType::kString: return true;
    case ConfigType::kDoubleList: {
      const auto items = SplitList(v);
      return !items.empty() && std::all_of(items.begin(), items.end(),
                                           [&](const std::string& s) { return ParseDouble(s, d); });
    }
    case ConfigType::kUintList: {
      const auto items = SplitList(v);
      return !items.empty() && std::all_of(items.begin(), items.end(),
                                           [&](const std::string& s) { return ParseUint(s, u); });
    }
  }
  return false;
}

const ConfigKey* FindKey(const std::string& name) {
  for (const auto& k : ConfigSchema())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& ConfigSchema() {
  using T = ConfigType;
  static const std::vector<ConfigKey> schema = {
      {"run.seed", T::kUint, "42", "base seed of every stochastic step"},
      {"run.workers", T::kInt, "1", "worker threads for screening and featurizing"},

      {"gate.min_max_amplitude", T::kDouble, "0.01", "volume: minimum peak amplitude"},
      {"gate.max_clipping_ratio", T::kDouble, "0.30", "clipping: maximum clipped fraction"},
      {"gate.min_cough_probability", T::kDouble, "0.5", "cough detector threshold"},
      {"gate.min_background_power_ratio", T::kDouble, "3.16", "cough-to-background power ratio"},

      {"svm.c", T::kDouble, "1.0", "box constraint"},
      {"svm.gamma", T::kDouble, "0", "RBF gamma; 0 means 1/(d*var)"},
      {"svm.tolerance", T::kDouble, "1e-3", "KKT tolerance"},
      {"svm.max_passes", T::kInt, "1000", "maximum SMO sweeps"},
      {"svm.positive_weight", T::kDouble, "1.0", "C multiplier for positives"},
      {"svm.negative_weight", T::kDouble, "1.0", "C multiplier for negatives"},

      {"cnn.arch", T::kString, "toy", "toy or full"},
      {"cnn.dropout", T::kDouble, "0.2", "dropout after every ReLU"},
      {"cnn.learning_rate", T::kDouble, "1e-3", "Adamax learning rate"},
      {"cnn.epochs", T::kInt, "25", "training epochs"},
      {"cnn.batch_size", T::kInt, "16", "minibatch size"},
      {"cnn.upsample_ratio", T::kInt, "4", "copies of every positive"},
      {"cnn.augmented_copies", T::kInt, "1", "augmented sonographs per copy"},

      {"augment.shift_min_fraction", T::kDouble, "-0.5", "time shift lower bound"},
      {"augment.shift_max_fraction", T::kDouble, "0.5", "time shift upper bound"},
      {"augment.shift_probability", T::kDouble, "1.0", "probability of shifting"},
      {"augment.noise_param_min", T::kDouble, "0.25", "noise RMS / signal RMS lower bound"},
      {"augment.noise_param_max", T::kDouble, "0.9", "noise RMS / signal RMS upper bound"},
      {"augment.noise_probability", T::kDouble, "0.5", "probability of adding noise"},

      {"stft.n_freq", T::kInt, "2048", "FFT size of the SSL spectrogram"},
      {"stft.win_length", T::kInt, "640", "window length in samples"},
      {"stft.hop_length", T::kInt, "320", "hop in samples"},

      {"mask.time_mask_fraction", T::kDouble, "0.15", "expected masked frame fraction"},
      {"mask.max_freq_band_fraction", T::kDouble, "0.20", "maximum masked band width / bins"},
      {"mask.noise_probability", T::kDouble, "0.10", "probability of whole-image noise"},
      {"mask.noise_mean", T::kDouble, "0", "noise mean"},
      {"mask.noise_variance", T::kDouble, "0.2", "noise variance"},
      {"mask.time_block_width", T::kInt, "7", "frames per time block"},

      {"encoder.layers", T::kInt, "2", "transformer blocks"},
      {"encoder.hidden", T::kInt, "64", "model width"},
      {"encoder.heads", T::kInt, "4", "attention heads"},
      {"encoder.ffn", T::kInt, "128", "feed-forward width"},

      {"upstream.batch_size", T::kInt, "8", "pretraining batch size"},
      {"upstream.max_lr", T::kDouble, "1e-4", "peak AdamW learning rate"},
      {"upstream.total_steps", T::kInt, "3000", "pretraining steps"},
      {"upstream.warmup_steps", T::kInt, "300", "linear warmup steps"},
      {"upstream.weight_decay", T::kDouble, "0.01", "AdamW decoupled decay"},
      {"upstream.masked_only", T::kBool, "true", "loss over masked cells only"},

      {"downstream.batch_size", T::kInt, "8", "head batch size"},
      {"downstream.lr", T::kDouble, "1e-4", "peak AdamW learning rate"},
      {"downstream.steps", T::kInt, "2000", "head training steps"},
      {"downstream.warmup_steps", T::kInt, "300", "linear warmup steps"},
      {"downstream.eval_interval", T::kInt, "300", "steps between validation AUC checks"},
      {"downstream.upsample_ratio", T::kInt, "5", "copies of every positive"},
      {"downstream.head_width", T::kInt, "512", "width of the three head layers"},
      {"downstream.weight_decay", T::kDouble, "0.01", "AdamW decoupled decay"},

      {"ablate.model", T::kString, "cnn", "cnn or svm"},
      {"ablate.fractions", T::kDoubleList, "0.2,0.4,0.6,0.8,1.0", "training-set fractions"},
      {"ablate.seeds", T::kUintList, "1", "subsample/training seeds"},
      {"ablate.cnn_epochs", T::kInt, "6", "CNN epochs per ablation row"},

      {"synth.n_per_class", T::kInt, "100", "records per class"},
      {"synth.validation_fraction", T::kDouble, "0.15", "validation share of each class"},
      {"synth.test_fraction", T::kDouble, "0.15", "test share of each class"},
      {"synth.n_unlabeled", T::kInt, "0", "extra unlabeled training records"},
  };
  return schema;
}

std::string EnvName(const std::string& key) {
  std::string s = "COUGHGATE_";
  for (char c : key) s += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

RunConfig::RunConfig() {
  for (const auto& k : ConfigSchema()) values_[k.name] = k.default_value;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  const ConfigKey* k = FindKey(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  const std::string v = Trim(value);
  if (!TypeCheck(k->type, v))
    throw ConfigError("config key '" + key + "' expects " + TypeName(k->type) + ", got '" + v + "'");
  values_[key] = v;
}

void RunConfig::LoadText(std::string_view text, const std::string& origin) {
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = Trim(line);
    if (t.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "unterminated section header");
      section = Trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = Trim(std::string_view(t).substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      Set(full, t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::LoadFile(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  LoadText(ss.str(), path.string());
}

void RunConfig::LoadEnvironment(const std::function<const char*(const char*)>& lookup) {
  for (const auto& k : ConfigSchema()) {
    const std::string name = EnvName(k.name);
    const char* v = lookup ? lookup(name.c_str()) : std::getenv(name.c_str());
    if (!v) continue;
    try {
      Set(k.name, v);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
  }
}

void RunConfig::ApplyOverride(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  Set(Trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

const std::string& RunConfig::Raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::GetInt(const std::string& key) const {
  std::int64_t v = 0;
  if (!ParseInt(Raw(key), v)) throw ConfigError("config key '" + key + "' is not an integer");
  return v;
}

std::uint64_t RunConfig::GetUint(const std::string& key) const {
  std::uint64_t v = 0;
  if (!ParseUint(Raw(key), v)) throw ConfigError("config key '" + key + "' is not a non-negative integer");
  return v;
}

double RunConfig::GetDouble(const std::string& key) const {
  double v = 0;
  if (!ParseDouble(Raw(key), v)) throw ConfigError("config key '" + key + "' is not a number");
  return v;
}

bool RunConfig::GetBool(const std::string& key) const {
  bool v = false;
  if (!ParseBool(Raw(key), v)) throw ConfigError("config key '" + key + "' is not a boolean");
  return v;
}

std::vector<double> RunConfig::GetDoubleList(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : SplitList(Raw(key))) {
    double v;
    if (!ParseDouble(s, v)) throw ConfigError("config key '" + key + "' has a bad number '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::uint64_t> RunConfig::GetUintList(const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const auto& s : SplitList(Raw(key))) {
    std::uint64_t v;
    if (!ParseUint(s, v)) throw ConfigError("config key '" + key + "' has a bad integer '" + s + "'");
    out.push_back(v);
  }
  return out;
}

PrepareOptions RunConfig::Prepare() const {
  PrepareOptions o;
  o.thresholds.min_max_amplitude = GetDouble("gate.min_max_amplitude");
  o.thresholds.max_clipping_ratio = GetDouble("gate.max_clipping_ratio");
  o.thresholds.min_cough_probability = GetDouble("gate.min_cough_probability");
  o.thresholds.min_background_power_ratio = GetDouble("gate.min_background_power_ratio");
  o.thresholds.Validate();
  o.workers = workers();
  return o;
}

SvmParams RunConfig::Svm() const {
  SvmParams p;
  p.C = GetDouble("svm.c");
  p.gamma = GetDouble("svm.gamma");
  p.tolerance = GetDouble("svm.tolerance");
  p.max_passes = static_cast<int>(GetInt("svm.max_passes"));
  p.positive_weight = GetDouble("svm.positive_weight");
  p.negative_weight = GetDouble("svm.negative_weight");
  p.Validate();
  return p;
}

CnnArchitecture RunConfig::CnnArch() const {
  const std::string a = GetString("cnn.arch");
  const double dropout = GetDouble("cnn.dropout");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("cnn.dropout must be in [0, 1)");
  if (a == "toy") return CnnArchitecture::Toy(dropout);
  if (a == "full") return CnnArchitecture::Full(dropout);
  throw ConfigError("cnn.arch must be 'toy' or 'full', got '" + a + "'");
}

CnnTrainConfig RunConfig::CnnTrain() const {
  CnnTrainConfig c;
  c.learning_rate = GetDouble("cnn.learning_rate");
  c.epochs = static_cast<int>(GetInt("cnn.epochs"));
  c.batch_size = static_cast<int>(GetInt("cnn.batch_size"));
  c.upsample_ratio = static_cast<int>(GetInt("cnn.upsample_ratio"));
  c.augmented_copies = static_cast<int>(GetInt("cnn.augmented_copies"));
  c.augment.shift_min_fraction = GetDouble("augment.shift_min_fraction");
  c.augment.shift_max_fraction = GetDouble("augment.shift_max_fraction");
  c.augment.shift_probability = GetDouble("augment.shift_probability");
  c.augment.noise_param_min = GetDouble("augment.noise_param_min");
  c.augment.noise_param_max = GetDouble("augment.noise_param_max");
  c.augment.noise_probability = GetDouble("augment.noise_probability");
  c.Validate();
  return c;
}

MaskSpec RunConfig::Mask() const {
  MaskSpec m;
  m.time_mask_fraction = GetDouble("mask.time_mask_fraction");
  m.max_freq_band_fraction = GetDouble("mask.max_freq_band_fraction");
  m.noise_probability = GetDouble("mask.noise_probability");
  m.noise_mean = GetDouble("mask.noise_mean");
  m.noise_variance = GetDouble("mask.noise_variance");
  m.time_block_width = static_cast<int>(GetInt("mask.time_block_width"));
  m.Validate();
  return m;
}

StftConfig RunConfig::Stft() const {
  StftConfig s;
  s.n_freq = static_cast<int>(GetInt("stft.n_freq"));
  s.win_length = static_cast<int>(GetInt("stft.win_length"));
  s.hop_length = static_cast<int>(GetInt("stft.hop_length"));
  s.Validate();
  return s;
}

EncoderConfig RunConfig::Encoder() const {
  EncoderConfig e;
  e.layers = static_cast<int>(GetInt("encoder.layers"));
  e.hidden = static_cast<int>(GetInt("encoder.hidden"));
  e.heads = static_cast<int>(GetInt("encoder.heads"));
  e.ffn = static_cast<int>(GetInt("encoder.ffn"));
  e.n_bins = Stft().n_bins();
  e.Validate();
  return e;
}

UpstreamConfig RunConfig::Upstream() const {
  UpstreamConfig u;
  u.batch_size = static_cast<int>(GetInt("upstream.batch_size"));
  u.max_lr = GetDouble("upstream.max_lr");
  u.total_steps = GetInt("upstream.total_steps");
  u.warmup_steps = GetInt("upstream.warmup_steps");
  u.weight_decay = GetDouble("upstream.weight_decay");
  u.masked_only = GetBool("upstream.masked_only");
  u.Validate();
  return u;
}

DownstreamConfig RunConfig::Downstream() const {
  DownstreamConfig d;
  d.batch_size = static_cast<int>(GetInt("downstream.batch_size"));
  d.lr = GetDouble("downstream.lr");
  d.steps = GetInt("downstream.steps");
  d.warmup_steps = GetInt("downstream.warmup_steps");
  d.eval_interval = static_cast<int>(GetInt("downstream.eval_interval"));
  d.upsample_ratio = static_cast<int>(GetInt("downstream.upsample_ratio"));
  d.head_width = static_cast<int>(GetInt("downstream.head_width"));
  d.weight_decay = GetDouble("downstream.weight_decay");
  d.Validate();
  return d;
}

SynthOptions RunConfig::Synth() const {
  SynthOptions s;
  s.n_per_class = static_cast<int>(GetInt("synth.n_per_class"));
  s.validation_fraction = GetDouble("synth.validation_fraction");
  s.test_fraction = GetDouble("synth.test_fraction");
  s.n_unlabeled = static_cast<int>(GetInt("synth.n_unlabeled"));
  s.Validate();
  return s;
}

void RunConfig::Validate() const {
  if (workers() < 1) throw ConfigError("run.workers must be >= 1");
  try {
    (void)Prepare();
    (void)Svm();
    (void)CnnArch();
    (void)CnnTrain();
    (void)Mask();
    (void)Encoder();
    (void)Upstream();
    (void)Downstream();
    (void)Synth();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  const std::string m = GetString("ablate.model");
  if (m != "cnn" && m != "svm") throw ConfigError("ablate.model must be 'cnn' or 'svm', got '" + m + "'");
  for (double f : GetDoubleList("ablate.fractions"))
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("ablate.fractions must lie in (0, 1]");
  if (GetInt("ablate.cnn_epochs") < 1) throw ConfigError("ablate.cnn_epochs must be >= 1");
}

nlohmann::json RunConfig::ToJson() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

std::string RunConfig::ToText() const {
  std::string out, section;
  for (const auto& k : ConfigSchema()) {
    const auto dot = k.name.find('.');
    const std::string s = k.name.substr(0, dot);
    if (s != section) {
      out += (out.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += k.name.substr(dot + 1) + " = " + values_.at(k.name) + "\n";
  }
  return out;
}

}  // namespace coughgate
