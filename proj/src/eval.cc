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

#include "coughgate/eval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "coughgate/random.h"

namespace coughgate {

namespace {

void CheckSet(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size())
    throw std::invalid_argument("scored set: scores and labels differ in length");
  for (int y : set.labels)
    if (y != 0 && y != 1) throw std::invalid_argument("scored set: labels must be 0 or 1");
}

double NaN() { return std::numeric_limits<double>::quiet_NaN(); }

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void DumpTo(const nlohmann::json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(it.key()).dump() + ": ";
        DumpTo(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ", ";
        first = false;
        DumpTo(v, out, indent, depth + 1);
      }
      out += "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? FormatDouble(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

double JsonDouble(const nlohmann::json& j) {
  return j.is_null() ? NaN() : j.get<double>();
}

}  // namespace

RocResult RocAndAuc(const ScoredSet& set) {
  CheckSet(set);
  std::int64_t pos = 0, neg = 0;
  for (int y : set.labels) (y == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw MetricError("AUC undefined for single class");

  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] > set.scores[b];
  });

  RocResult r;
  r.roc.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Twice the pairwise win count, kept integral so the area is exact.
  std::int64_t twice_wins = 0;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = set.scores[order[i]];
    std::int64_t gp = 0, gn = 0;
    for (; i < order.size() && set.scores[order[i]] == s; ++i)
      (set.labels[order[i]] == 1 ? gp : gn)++;
    twice_wins += gn * (2 * tp + gp);
    tp += gp;
    fp += gn;
    r.roc.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, s});
  }
  r.auc = static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) *
                                             static_cast<double>(neg));
  return r;
}

EvalReport MetricsAtThreshold(const ScoredSet& set, double threshold) {
  CheckSet(set);
  if (set.size() == 0) throw MetricError("metrics undefined for an empty set");
  EvalReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const bool called = set.scores[i] >= threshold;
    if (set.labels[i] == 1)
      (called ? r.tp : r.fn)++;
    else
      (called ? r.fp : r.tn)++;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(set.size());
  r.sensitivity = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : NaN();
  r.specificity = r.tn + r.fp > 0 ? static_cast<double>(r.tn) / (r.tn + r.fp) : NaN();
  return r;
}

EvalReport Evaluate(const ScoredSet& set, double threshold) {
  EvalReport r = MetricsAtThreshold(set, threshold);
  RocResult roc = RocAndAuc(set);
  r.auc = roc.auc;
  r.roc = std::move(roc.roc);
  return r;
}

std::vector<DatasetRecord> StratifiedSubsample(const std::vector<DatasetRecord>& records,
                                               double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("subsample fraction must lie in (0, 1]");
  std::vector<bool> keep(records.size(), false);
  Rng rng(seed);
  for (Label label : {Label::kPositive, Label::kNegative, Label::kUnlabeled}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].label == label) idx.push_back(i);
    rng.Shuffle(idx);
    const auto n = static_cast<std::size_t>(std::llround(fraction * idx.size()));
    for (std::size_t k = 0; k < n; ++k) keep[idx[k]] = true;
  }
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

AblationTable Ablate(const AblationTrainer& trainer,
                     const std::vector<DatasetRecord>& train,
                     const std::vector<DatasetRecord>& validation,
                     std::vector<double> fractions,
                     const std::vector<std::uint64_t>& seeds, int workers) {
  std::sort(fractions.begin(), fractions.end());
  AblationTable table;
  for (double f : fractions)
    for (std::uint64_t s : seeds) {
      AblationRow row;
      row.fraction = f;
      row.seed = s;
      table.rows.push_back(row);
    }

  auto run_row = [&](AblationRow& row) {
    const auto subset = StratifiedSubsample(train, row.fraction, MixSeed(row.seed, 0xAB1A));
    row.train_size = subset.size();
    for (const auto& r : subset)
      if (r.label == Label::kPositive) ++row.train_positives;
    if (row.train_positives == 0 || row.train_positives == subset.size()) {
      row.skipped = true;
      row.note = "subsample has a single class";
      return;
    }
    try {
      row.report = Evaluate(trainer(subset, validation, row.seed));
    } catch (const std::exception& e) {
      row.skipped = true;
      row.note = e.what();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < table.rows.size();) run_row(table.rows[i]);
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(table.rows.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return table;
}

nlohmann::json ToJson(const EvalReport& report) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : report.roc)
    roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr},
                   {"threshold", std::isinf(p.threshold) ? nlohmann::json("inf")
                                                         : nlohmann::json(p.threshold)}});
  return {{"auc", report.auc},
          {"accuracy", report.accuracy},
          {"sensitivity", report.sensitivity},
          {"specificity", report.specificity},
          {"threshold", report.threshold},
          {"counts", {{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}}},
          {"roc", roc}};
}

EvalReport EvalReportFromJson(const nlohmann::json& j) {
  EvalReport r;
  r.auc = JsonDouble(j.at("auc"));
  r.accuracy = JsonDouble(j.at("accuracy"));
  r.sensitivity = JsonDouble(j.at("sensitivity"));
  r.specificity = JsonDouble(j.at("specificity"));
  r.threshold = JsonDouble(j.at("threshold"));
  const auto& c = j.at("counts");
  r.tp = c.at("tp");
  r.fp = c.at("fp");
  r.tn = c.at("tn");
  r.fn = c.at("fn");
  for (const auto& p : j.at("roc")) {
    RocPoint pt;
    pt.fpr = p.at("fpr");
    pt.tpr = p.at("tpr");
    const auto& t = p.at("threshold");
    pt.threshold = t.is_string() ? std::numeric_limits<double>::infinity() : t.get<double>();
    r.roc.push_back(pt);
  }
  return r;
}

nlohmann::json ToJson(const AblationTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json j = {{"fraction", row.fraction},
                        {"seed", row.seed},
                        {"train_size", row.train_size},
                        {"train_positives", row.train_positives},
                        {"skipped", row.skipped}};
    if (!row.note.empty()) j["note"] = row.note;
    if (!row.skipped) j["report"] = ToJson(row.report);
    rows.push_back(j);
  }
  return {{"rows", rows}};
}

std::string RocCsv(const EvalReport& report) {
  std::ostringstream out;
  out << "fpr,tpr,threshold\n";
  for (const auto& p : report.roc)
    out << FormatDouble(p.fpr) << ',' << FormatDouble(p.tpr) << ','
        << (std::isinf(p.threshold) ? std::string("inf") : FormatDouble(p.threshold)) << "\n";
  return out.str();
}

std::string AblationCsv(const AblationTable& table) {
  std::ostringstream out;
  out << "fraction,seed,train_size,train_positives,skipped,auc,accuracy,sensitivity,specificity\n";
  for (const auto& r : table.rows) {
    out << FormatDouble(r.fraction) << ',' << r.seed << ',' << r.train_size << ','
        << r.train_positives << ',' << (r.skipped ? 1 : 0);
    if (r.skipped) {
      out << ",,,,\n";
      continue;
    }
    out << ',' << FormatDouble(r.report.auc) << ',' << FormatDouble(r.report.accuracy) << ','
        << FormatDouble(r.report.sensitivity) << ',' << FormatDouble(r.report.specificity)
        << "\n";
  }
  return out.str();
}

std::string RocSvg(const EvalReport& report) {
  constexpr double kSize = 400.0, kMargin = 40.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kMargin
      << "\" height=\"" << kSize + 2 * kMargin << "\">\n";
  out << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "  <line x1=\"" << kMargin << "\" y1=\"" << kMargin + kSize << "\" x2=\""
      << kMargin + kSize << "\" y2=\"" << kMargin
      << "\" stroke=\"#ccc\" stroke-dasharray=\"4\"/>\n";
  out << "  <polyline fill=\"none\" stroke=\"#c03\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < report.roc.size(); ++i) {
    const auto& p = report.roc[i];
    out << (i ? " " : "") << kMargin + p.fpr * kSize << ',' << kMargin + (1.0 - p.tpr) * kSize;
  }
  out << "\"/>\n";
  char auc[64];
  std::snprintf(auc, sizeof(auc), "AUC = %.4f", report.auc);
  out << "  <text x=\"" << kMargin + kSize - 110 << "\" y=\"" << kMargin + kSize - 12
      << "\" font-family=\"sans-serif\" font-size=\"14\">" << auc << "</text>\n";
  out << "  <text x=\"" << kMargin + kSize / 2 - 60 << "\" y=\"" << kSize + 2 * kMargin - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\">false positive rate</text>\n";
  out << "</svg>\n";
  return out.str();
}

void EmitReport(const EvalReport& report, const std::filesystem::path& stem) {
  WriteText(std::filesystem::path(stem.string() + ".json"), DumpJson(ToJson(report)) + "\n");
  WriteText(std::filesystem::path(stem.string() + ".csv"), RocCsv(report));
  WriteText(std::filesystem::path(stem.string() + ".svg"), RocSvg(report));
}

void EmitReport(const AblationTable& table, const std::filesystem::path& stem) {
  WriteText(std::filesystem::path(stem.string() + ".json"), DumpJson(ToJson(table)) + "\n");
  WriteText(std::filesystem::path(stem.string() + ".csv"), AblationCsv(table));
}

std::string DumpJson(const nlohmann::json& j) {
  std::string out;
  DumpTo(j, out, 2, 0);
  return out;
}

}  // namespace coughgate
