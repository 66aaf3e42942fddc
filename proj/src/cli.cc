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

#include "coughgate/cli.h"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "coughgate/config.h"
#include "coughgate/eval.h"
#include "coughgate/feature_cache.h"
#include "coughgate/nn/checkpoint.h"
#include "coughgate/parallel.h"
#include "coughgate/version.h"
#include "coughgate/workflow.h"

namespace coughgate {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

const std::vector<std::string> kCommands = {"screen",       "featurize",      "train-svm",
                                            "train-cnn",    "pretrain-ssl",   "train-ssl-head",
                                            "eval",         "ablate",         "synth"};

std::string UtcNow() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

void WriteJson(const fs::path& path, const nlohmann::json& j) { WriteFile(path, DumpJson(j) + "\n"); }

// State shared by every subcommand handler.
struct Session {
  RunConfig config;
  fs::path out_dir;
  std::ostream& out;
  std::vector<std::string> artifacts;

  std::string ConfigHash() const { return Hex(HashString(config.ToText())); }

  fs::path Artifact(const fs::path& rel) {
    const fs::path p = out_dir / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    artifacts.push_back(rel.generic_string());
    return p;
  }

  DatasetManifest Manifest(const std::string& path) const {
    if (!fs::exists(path)) throw std::runtime_error("manifest not found: " + path);
    return ParseManifest(path);
  }

  /// Screens the records and keeps passing ones; labeled_only drops
  /// unlabeled records first.
  std::vector<PreparedRecord> Load(const DatasetManifest& manifest, Split split, bool labeled_only,
                                   const std::string& what) {
    const auto records = SelectSplit(manifest, split, labeled_only);
    if (records.empty())
      throw std::runtime_error("no " + std::string(ToString(split)) + " records for " + what);
    auto prepared = PrepareRecords(manifest, records, config.Prepare());
    const std::size_t total = prepared.size();
    prepared = PassingOnly(std::move(prepared));
    out << what << ": " << prepared.size() << "/" << total << " " << ToString(split)
        << " records passed the quality gate\n";
    if (prepared.empty())
      throw std::runtime_error("no " + std::string(ToString(split)) + " record passed the quality gate");
    return prepared;
  }
};

// --- Subcommands -----------------------------------------------------------

void CmdScreen(Session& s, const std::string& manifest_path) {
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto prepared = PrepareRecords(manifest, manifest.records, s.config.Prepare());
  std::string lines;
  DatasetManifest filtered;
  filtered.schema_version = manifest.schema_version;
  for (const auto& p : prepared) {
    nlohmann::json j = QualityReportToJson(p.quality);
    j["id"] = p.record.id;
    lines += j.dump() + "\n";
    if (!p.quality.pass) continue;
    DatasetRecord r = p.record;
    r.audio_path = fs::absolute(ResolveAudioPath(manifest, p.record)).lexically_normal().string();
    filtered.records.push_back(std::move(r));
  }
  WriteFile(s.Artifact("screen/reports.jsonl"), lines);
  WriteManifest(filtered, s.Artifact("screen/manifest.csv"));
  s.out << "screened " << prepared.size() << " records: " << filtered.records.size()
        << " passed, " << prepared.size() - filtered.records.size() << " failed\n";
}

void CmdFeaturize(Session& s, const std::string& manifest_path, const std::string& kind) {
  if (kind != "svm" && kind != "sonograph" && kind != "spectrogram")
    throw UsageError("--kind must be svm, sonograph or spectrogram, got '" + kind + "'");
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto prepared =
      PassingOnly(PrepareRecords(manifest, manifest.records, s.config.Prepare()));
  const StftConfig stft = s.config.Stft();
  const auto features = ParallelMap<Matrix>(prepared.size(), s.config.workers(), [&](std::size_t i) {
    const PreparedRecord& p = prepared[i];
    if (kind == "svm") {
      const auto v = ComputeSvmFeatures(p.audio, p.quality.segments).values;
      Matrix m(1, v.size());
      m.data = v;
      return m;
    }
    if (kind == "sonograph") return BuildSonograph(p.audio, p.quality.segments, nullptr, nullptr).values;
    return SslSpectrogram(p.audio, p.quality.segments, stft);
  });
  std::string index = "id,label,split,file,rows,cols\n";
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto& r = prepared[i].record;
    const std::string file = r.id + ".cgf";
    WriteFeatureMatrix(s.Artifact(fs::path("features") / kind / file), features[i]);
    index += r.id + "," + std::string(ToString(r.label)) + "," + std::string(ToString(r.split)) +
             "," + file + "," + std::to_string(features[i].rows) + "," +
             std::to_string(features[i].cols) + "\n";
  }
  WriteFile(s.Artifact(fs::path("features") / kind / "index.csv"), index);
  s.out << "wrote " << prepared.size() << " " << kind << " feature files\n";
}

void CmdTrainSvm(Session& s, const std::string& manifest_path) {
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto train = s.Load(manifest, Split::kTrain, true, "train-svm");
  const auto val = s.Load(manifest, Split::kValidation, true, "train-svm");
  const SvmFit fit = FitSvm(train, s.config.Svm(), s.config.seed());
  const EvalReport report = Evaluate(ScoreSvm(fit.model, val));
  WriteJson(s.Artifact("svm/model.json"), SvmModelToJson(fit.model));
  WriteJson(s.Artifact("svm/history.json"),
            {{"passes", fit.passes},
             {"converged", fit.converged},
             {"support_vectors", fit.model.alphas.size()},
             {"platt", {{"A", fit.model.platt.A}, {"B", fit.model.platt.B}}},
             {"validation_auc", report.auc},
             {"config_hash", s.ConfigHash()}});
  s.out << "svm: " << fit.model.alphas.size() << " support vectors, validation AUC " << report.auc
        << "\n";
}

void CmdTrainCnn(Session& s, const std::string& manifest_path) {
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto train = s.Load(manifest, Split::kTrain, true, "train-cnn");
  const auto val = s.Load(manifest, Split::kValidation, true, "train-cnn");
  const CnnTrainConfig config = s.config.CnnTrain();
  auto result = FitCnn(train, val, s.config.CnnArch(), config, s.config.seed());
  SaveCnn(result.model, s.Artifact("cnn/model.ckpt"),
          {{"epoch", result.history.best_epoch},
           {"validation_auc", result.history.best_auc},
           {"config_hash", s.ConfigHash()},
           {"train_config", config.ToJson()}});
  s.artifacts.push_back("cnn/model.ckpt.json");
  WriteJson(s.Artifact("cnn/history.json"), ToJson(result.history));
  s.out << "cnn: best validation AUC " << result.history.best_auc << " at epoch "
        << result.history.best_epoch << "\n";
}

void CmdPretrainSsl(Session& s, const std::string& manifest_path) {
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto train = s.Load(manifest, Split::kTrain, false, "pretrain-ssl");
  const UpstreamConfig uconfig = s.config.Upstream();
  const auto result = FitUpstream(train, s.config.Encoder(), uconfig, s.config.Mask(),
                                  s.config.Stft(), s.config.seed());
  SaveEncoder(result.encoder, s.Artifact("ssl/encoder.ckpt"),
              {{"config_hash", s.ConfigHash()},
               {"upstream", uconfig.ToJson()},
               {"mask", s.config.Mask().ToJson()}});
  s.artifacts.push_back("ssl/encoder.ckpt.json");
  WriteJson(s.Artifact("ssl/upstream_history.json"),
            {{"loss", result.loss_history}, {"skipped_short", result.skipped_short}});
  s.out << "pretrain-ssl: " << result.loss_history.size() << " steps, final loss "
        << result.loss_history.back() << "\n";
}

void CmdTrainSslHead(Session& s, const std::string& manifest_path, std::string encoder_path) {
  if (encoder_path.empty()) encoder_path = (s.out_dir / "ssl/encoder.ckpt").string();
  if (!fs::exists(encoder_path)) throw std::runtime_error("encoder checkpoint not found: " + encoder_path);
  SslEncoder encoder = LoadEncoder(encoder_path);
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto train = s.Load(manifest, Split::kTrain, true, "train-ssl-head");
  const auto val = s.Load(manifest, Split::kValidation, true, "train-ssl-head");
  const DownstreamConfig config = s.config.Downstream();
  const auto result = FitDownstream(encoder, train, val, config, s.config.seed());
  SaveHead(result.head, s.Artifact("ssl/head.ckpt"),
           {{"encoder_checkpoint", fs::absolute(encoder_path).lexically_normal().string()},
            {"step", result.history.best_step},
            {"validation_auc", result.history.best_auc},
            {"config_hash", s.ConfigHash()},
            {"downstream", config.ToJson()}});
  s.artifacts.push_back("ssl/head.ckpt.json");
  WriteJson(s.Artifact("ssl/downstream_history.json"), ToJson(result.history));
  s.out << "train-ssl-head: best validation AUC " << result.history.best_auc << " at step "
        << result.history.best_step << "\n";
}

void CmdEval(Session& s, const std::string& model_path, const std::string& manifest_path,
             const std::string& split_name, std::string encoder_path) {
  if (!fs::exists(model_path)) throw std::runtime_error("model not found: " + model_path);
  const Split split = ParseSplit(split_name);
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto records = s.Load(manifest, split, true, "eval");
  ScoredSet scores;
  std::string kind;
  std::ifstream probe(model_path, std::ios::binary);
  if (probe.peek() == '{') {
    std::stringstream ss;
    ss << probe.rdbuf();
    const auto j = nlohmann::json::parse(ss.str());
    if (j.value("model", "") != "svm") throw std::runtime_error(model_path + " is not a model file");
    kind = "svm";
    scores = ScoreSvm(SvmModelFromJson(j), records);
  } else {
    const auto side = nn::ReadSidecar(model_path);
    kind = side.value("model", "");
    if (kind == "cnn") {
      CnnModel m = LoadCnn(model_path);
      scores = ScoreCnn(m, records);
    } else if (kind == "ssl_head") {
      if (encoder_path.empty()) encoder_path = side.value("encoder_checkpoint", "");
      if (encoder_path.empty()) throw UsageError("ssl head evaluation needs --encoder");
      SslEncoder enc = LoadEncoder(encoder_path);
      SslHead head = LoadHead(model_path);
      scores = ScoreSsl(enc, head, records);
    } else if (kind == "ssl_encoder") {
      throw UsageError("an encoder alone cannot score records; evaluate the head checkpoint");
    } else {
      throw std::runtime_error(model_path + " has an unknown model kind '" + kind + "'");
    }
  }
  const EvalReport report = Evaluate(scores);
  EmitReport(report, s.Artifact("eval/report"));
  s.artifacts.push_back("eval/report.csv");
  s.artifacts.push_back("eval/report.svg");
  std::string csv = "id,label,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::ostringstream line;
    line.precision(17);
    line << scores.ids[i] << "," << scores.labels[i] << "," << scores.scores[i] << "\n";
    csv += line.str();
  }
  WriteFile(s.Artifact("eval/scores.csv"), csv);
  s.out << "eval (" << kind << ", " << split_name << "): AUC " << report.auc << ", accuracy "
        << report.accuracy << "\n";
}

void CmdAblate(Session& s, const std::string& manifest_path) {
  const DatasetManifest manifest = s.Manifest(manifest_path);
  const auto train = s.Load(manifest, Split::kTrain, true, "ablate");
  const auto val = s.Load(manifest, Split::kValidation, true, "ablate");
  std::vector<PreparedRecord> all = train;
  all.insert(all.end(), val.begin(), val.end());
  const PreparedIndex index(all);
  const std::string model = s.config.GetString("ablate.model");
  AblationTrainer trainer;
  if (model == "svm") {
    trainer = SvmAblationTrainer(index, s.config.Svm());
  } else {
    CnnTrainConfig c = s.config.CnnTrain();
    c.epochs = static_cast<int>(s.config.GetInt("ablate.cnn_epochs"));
    trainer = CnnAblationTrainer(index, s.config.CnnArch(), c);
  }
  const AblationTable table =
      Ablate(trainer, RecordsOf(train), RecordsOf(val), s.config.GetDoubleList("ablate.fractions"),
             s.config.GetUintList("ablate.seeds"), 1);
  EmitReport(table, s.Artifact("ablate/table"));
  s.artifacts.push_back("ablate/table.csv");
  for (const auto& r : table.rows)
    s.out << "fraction " << r.fraction << " seed " << r.seed << ": "
          << (r.skipped ? "skipped (" + r.note + ")" : "AUC " + std::to_string(r.report.auc)) << "\n";
}

void CmdSynth(Session& s, const std::string& dir) {
  const auto manifest = SynthCorpus(dir, s.config.Synth(), s.config.seed());
  s.out << "wrote " << manifest.records.size() << " records to " << dir << "\n";
}

// Finds the subcommand word, skipping global options and their values.
std::string FindCommand(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" || a == "--set" || a == "--out") {
      ++i;
      continue;
    }
    if (!a.empty() && a[0] == '-') continue;
    return a;
  }
  return {};
}

std::string ErrorLine(const std::string& command, const std::string& type, const std::string& message) {
  return nlohmann::json{{"status", "error"}, {"command", command}, {"type", type}, {"message", message}}
      .dump();
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::string command = FindCommand(args);
  const bool wants_help =
      std::find(args.begin(), args.end(), "--help") != args.end() ||
      std::find(args.begin(), args.end(), "-h") != args.end();
  if (!wants_help) {
    if (command.empty()) {
      err << ErrorLine("", "usage", "missing subcommand") << "\n";
      return 2;
    }
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
      err << ErrorLine(command, "usage", "unknown subcommand '" + command + "'") << "\n";
      return 2;
    }
  }

  CLI::App app{"coughgate: cough-audio screening and classification pipeline"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "coughgate_run";
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--set", overrides, "section.key=value override (repeatable)")->take_all();
  app.add_option("--out", out_dir, "run directory for all artifacts");

  std::string manifest, kind, model, split = "test", encoder, dir;
  auto* screen = app.add_subcommand("screen", "quality-gate every record");
  screen->add_option("manifest", manifest)->required();
  auto* featurize = app.add_subcommand("featurize", "write feature caches");
  featurize->add_option("manifest", manifest)->required();
  featurize->add_option("--kind", kind, "svm, sonograph or spectrogram")->required();
  auto* train_svm = app.add_subcommand("train-svm", "train the SVM");
  train_svm->add_option("manifest", manifest)->required();
  auto* train_cnn = app.add_subcommand("train-cnn", "train the CNN");
  train_cnn->add_option("manifest", manifest)->required();
  auto* pretrain = app.add_subcommand("pretrain-ssl", "masked-spectrogram pretraining");
  pretrain->add_option("manifest", manifest)->required();
  auto* head = app.add_subcommand("train-ssl-head", "train the classifier on a frozen encoder");
  head->add_option("manifest", manifest)->required();
  head->add_option("--encoder", encoder, "encoder checkpoint (default <out>/ssl/encoder.ckpt)");
  auto* eval = app.add_subcommand("eval", "evaluate a model on a manifest split");
  eval->add_option("model", model)->required();
  eval->add_option("manifest", manifest)->required();
  eval->add_option("--split", split, "train, validation or test");
  eval->add_option("--encoder", encoder, "encoder checkpoint for an SSL head");
  auto* ablate = app.add_subcommand("ablate", "training-set size ablation");
  ablate->add_option("manifest", manifest)->required();
  auto* synth = app.add_subcommand("synth", "write a synthetic two-class corpus");
  synth->add_option("dir", dir)->required();
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << ErrorLine(command, "usage", e.what()) << "\n";
    return 2;
  }

  Session session{RunConfig(), fs::path(out_dir), out, {}};
  nlohmann::json meta;
  try {
    if (!config_path.empty()) session.config.LoadFile(config_path);
    session.config.LoadEnvironment();
    for (const auto& o : overrides) session.config.ApplyOverride(o);
    session.config.Validate();
  } catch (const std::exception& e) {
    err << ErrorLine(command, "config", e.what()) << "\n";
    return 2;
  }

  const std::string started = UtcNow();
  try {
    fs::create_directories(session.out_dir);
    if (command == "screen") CmdScreen(session, manifest);
    else if (command == "featurize") CmdFeaturize(session, manifest, kind);
    else if (command == "train-svm") CmdTrainSvm(session, manifest);
    else if (command == "train-cnn") CmdTrainCnn(session, manifest);
    else if (command == "pretrain-ssl") CmdPretrainSsl(session, manifest);
    else if (command == "train-ssl-head") CmdTrainSslHead(session, manifest, encoder);
    else if (command == "eval") CmdEval(session, model, manifest, split, encoder);
    else if (command == "ablate") CmdAblate(session, manifest);
    else if (command == "synth") CmdSynth(session, dir);
  } catch (const UsageError& e) {
    err << ErrorLine(command, "usage", e.what()) << "\n";
    return 2;
  } catch (const MetricError& e) {
    err << ErrorLine(command, "metric", e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << ErrorLine(command, "runtime", e.what()) << "\n";
    return 1;
  }

  if (command != "synth") {
    meta = {{"command", command},
            {"args", args},
            {"version", kVersion},
            {"seed", session.config.seed()},
            {"config", session.config.ToJson()},
            {"config_hash", session.ConfigHash()},
            {"artifacts", session.artifacts},
            {"started_utc", started},
            {"finished_utc", UtcNow()}};
    try {
      WriteJson(session.out_dir / ("run_metadata_" + command + ".json"), meta);
    } catch (const std::exception& e) {
      err << ErrorLine(command, "runtime", e.what()) << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace coughgate
