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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coughgate/eval.h"
#include "coughgate/svm.h"
#include "doctest.h"
#include "oracles.h"

namespace coughgate {
namespace {

struct Toy {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

Toy Clusters(int per_class, double distance, double spread, std::uint64_t seed, int dim = 2) {
  Rng rng(seed);
  Toy t;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> v(dim);
      for (int d = 0; d < dim; ++d) v[d] = rng.Normal(0, spread) + (d == 0 ? (c ? 0.5 : -0.5) * distance : 0);
      t.x.push_back(v);
      t.y.push_back(c ? 1 : -1);
    }
  return t;
}

TEST_CASE("separable clusters train to full accuracy and pass the KKT audit") {
  const auto t = Clusters(20, 10.0, 0.5, 3);
  SvmParams p;
  p.gamma = 0.5;
  const auto r = TrainSvm(t.x, t.y, p, 1);
  CHECK(r.converged);
  int correct = 0;
  for (std::size_t i = 0; i < t.x.size(); ++i) correct += (DecisionValue(r.model, t.x[i]) > 0) == (t.y[i] > 0);
  CHECK(correct == 40);
  const auto audit = oracle::AuditKkt(t.x, t.y, r.duals, r.model.bias, p.gamma, p.C, p.C, p.tolerance);
  CHECK(audit.box_ok);
  CHECK(audit.max_violation <= 1e-9);
  CHECK(audit.equality_residual < 1e-8);

  // Margin support vectors sit on |f| = 1 within the tolerance.
  for (std::size_t i = 0; i < t.x.size(); ++i)
    if (r.duals[i] > 0 && r.duals[i] < p.C) CHECK(std::abs(DecisionValue(r.model, t.x[i])) >= 1 - p.tolerance);
  for (double a : r.model.alphas) CHECK(std::abs(a) <= p.C);
  for (double a : r.model.alphas) CHECK(a != 0.0);
}

TEST_CASE("KKT audit on overlapping classes and class weights") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = Clusters(30, 1.5, 1.0, 10 + seed, 3);
    SvmParams p;
    p.C = 2.0;
    p.positive_weight = 1.0 + seed;
    const auto r = TrainSvm(t.x, t.y, p, seed);
    REQUIRE(r.converged);
    const auto audit = oracle::AuditKkt(t.x, t.y, r.duals, r.model.bias, r.model.params.gamma,
                                        p.C * p.positive_weight, p.C, p.tolerance);
    CHECK(audit.box_ok);
    CHECK(audit.max_violation <= 1e-9);
    CHECK(audit.equality_residual < 1e-8);
  }
}

TEST_CASE("two-point symmetry") {
  SvmParams p;
  p.gamma = 0.3;
  const auto r = TrainSvm({{1.0, 2.0}, {-1.0, -2.0}}, {1, -1}, p, 0);
  CHECK(std::abs(DecisionValue(r.model, {0.0, 0.0})) < 1e-9);
  CHECK(std::abs(r.model.bias) < 1e-9);
  SUBCASE("far query decays to the bias") {
    SvmParams q;
    q.gamma = 50.0;
    const auto m = TrainSvm({{1.0, 2.0}, {-1.0, -2.0}, {1.2, 2.0}}, {1, -1, 1}, q, 0).model;
    CHECK(DecisionValue(m, {40.0, 40.0}) == doctest::Approx(m.bias).epsilon(1e-12));
  }
  SUBCASE("midpoint probability is one half") {
    SvmModel m = r.model;
    m.platt = FitPlatt({-1.0, 1.0}, {-1, 1});
    CHECK(std::abs(m.platt.B) < 1e-6);
    CHECK(PredictProba(m, {0.0, 0.0}) == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("svm input errors and determinism") {
  CHECK_THROWS(TrainSvm({{1.0}, {2.0}}, {1, 1}, SvmParams{}, 0));
  CHECK_THROWS(TrainSvm({{1.0}, {2.0, 3.0}}, {1, -1}, SvmParams{}, 0));
  SvmParams bad;
  bad.C = 0;
  CHECK_THROWS(bad.Validate());
  const auto t = Clusters(25, 2.0, 1.0, 5);
  const auto a = TrainSvm(t.x, t.y, SvmParams{}, 9), b = TrainSvm(t.x, t.y, SvmParams{}, 9);
  CHECK(a.duals == b.duals);
  CHECK(a.model.bias == b.model.bias);
  CHECK(a.model.params.gamma > 0);
  CHECK_THROWS(DecisionValue(a.model, {1.0, 2.0, 3.0}));
}

TEST_CASE("platt fit matches a grid search") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed);
    std::vector<double> f;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
      const int label = i % 3 ? -1 : 1;
      f.push_back(rng.Normal(label > 0 ? 0.8 : -0.6, 1.0));
      y.push_back(label);
    }
    const auto p = FitPlatt(f, y);
    CHECK(p.converged);
    const auto [a, b] = oracle::PlattGridSearch(f, y);
    CHECK(std::abs(p.A - a) < 1e-3);
    CHECK(std::abs(p.B - b) < 1e-3);
    CHECK(p.A <= 0.0);
    // Range and monotonicity.
    double prev = 0.0;
    for (double z = -30; z <= 30; z += 0.5) {
      const double q = PlattProbability(p, z);
      CHECK(q > 0.0);
      CHECK(q < 1.0);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("probability ranking equals decision ranking") {
  const auto t = Clusters(30, 1.0, 1.0, 17);
  SvmModel m = TrainSvm(t.x, t.y, SvmParams{}, 2).model;
  std::vector<double> f;
  for (const auto& v : t.x) f.push_back(DecisionValue(m, v));
  m.platt = FitPlatt(f, t.y);
  ScoredSet by_f, by_p;
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    by_f.Add(f[i], t.y[i] > 0, std::to_string(i));
    by_p.Add(PredictProba(m, t.x[i]), t.y[i] > 0, std::to_string(i));
  }
  CHECK(RocAndAuc(by_f).auc == RocAndAuc(by_p).auc);
  const auto cluster = Clusters(20, 10.0, 0.3, 4);
  SvmModel sep = TrainSvm(cluster.x, cluster.y, SvmParams{}, 0).model;
  std::vector<double> fs;
  for (const auto& v : cluster.x) fs.push_back(DecisionValue(sep, v));
  sep.platt = FitPlatt(fs, cluster.y);
  CHECK(PredictProba(sep, {5.0, 0.0}) > 0.9);
}

TEST_CASE("svm json round trip") {
  const auto t = Clusters(10, 3.0, 1.0, 2);
  SvmModel m = TrainSvm(t.x, t.y, SvmParams{}, 0).model;
  m.platt = {-1.5, 0.2, true, 3};
  FeatureStats s{{1, 2}, {3, 4}};
  m.stats = s;
  const auto back = SvmModelFromJson(nlohmann::json::parse(SvmModelToJson(m).dump()));
  CHECK(back.alphas == m.alphas);
  CHECK(back.support_vectors == m.support_vectors);
  CHECK(back.bias == m.bias);
  CHECK(back.platt.A == m.platt.A);
  CHECK(back.stats->stddev == s.stddev);
  for (const auto& v : t.x) CHECK(DecisionValue(back, v) == DecisionValue(m, v));
}

// --- eval ------------------------------------------------------------------

ScoredSet Set(std::vector<double> s, std::vector<int> y) {
  ScoredSet set;
  for (std::size_t i = 0; i < s.size(); ++i) set.Add(s[i], y[i], "r" + std::to_string(i));
  return set;
}

TEST_CASE("auc examples") {
  CHECK(RocAndAuc(Set({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})).auc == 0.75);
  const auto sep = RocAndAuc(Set({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}));
  CHECK(sep.auc == 1.0);
  CHECK(std::find(sep.roc.begin(), sep.roc.end(), RocPoint{0.0, 1.0, 0.8}) != sep.roc.end());
  CHECK(RocAndAuc(Set({0.3, 0.3, 0.3, 0.3, 0.3}, {0, 1, 0, 1, 1})).auc == 0.5);
  try {
    RocAndAuc(Set({0.1, 0.2}, {1, 1}));
    FAIL("no error");
  } catch (const MetricError& e) {
    CHECK(std::string(e.what()) == "AUC undefined for single class");
  }
}

TEST_CASE("trapezoidal auc equals the pairwise count on random sets") {
  Rng rng(123);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.UniformInt(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid forces plenty of ties.
      s[i] = t % 2 ? std::round(rng.Uniform() * 20) / 20 : rng.Uniform();
      y[i] = static_cast<int>(rng.UniformInt(2));
    }
    y[0] = 0, y[1] = 1;
    const auto r = RocAndAuc(Set(s, y));
    CHECK(std::abs(r.auc - oracle::BruteForceAuc(s, y)) <= 1e-12);
    // ROC stays in the unit square, monotone, from (0,0) to (1,1).
    CHECK(r.roc.front().fpr == 0.0);
    CHECK(r.roc.front().tpr == 0.0);
    CHECK(r.roc.back().fpr == 1.0);
    CHECK(r.roc.back().tpr == 1.0);
    for (std::size_t i = 1; i < r.roc.size(); ++i) {
      CHECK(r.roc[i].fpr >= r.roc[i - 1].fpr);
      CHECK(r.roc[i].tpr >= r.roc[i - 1].tpr);
    }
    // Strictly increasing transforms keep the AUC.
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(3 * s[i]) - 7;
    CHECK(RocAndAuc(Set(g, y)).auc == r.auc);
  }
}

TEST_CASE("metrics at threshold") {
  auto m = MetricsAtThreshold(Set({0.6, 0.4}, {1, 0}));
  CHECK(m.sensitivity == 1.0);
  CHECK(m.specificity == 1.0);
  CHECK(m.accuracy == 1.0);
  m = MetricsAtThreshold(Set({0.4, 0.6}, {1, 0}));
  CHECK(m.sensitivity == 0.0);
  CHECK(m.specificity == 0.0);
  CHECK(m.accuracy == 0.0);
  m = MetricsAtThreshold(Set({0.5, 0.1}, {1, 0}));
  CHECK(m.tp == 1);
  Rng rng(5);
  std::vector<double> s(37);
  std::vector<int> y(37);
  for (int i = 0; i < 37; ++i) s[i] = rng.Uniform(), y[i] = i % 3 == 0;
  m = MetricsAtThreshold(Set(s, y), 0.3);
  CHECK(m.tp + m.fp + m.tn + m.fn == 37);
  CHECK_THROWS(MetricsAtThreshold(ScoredSet{}));
}

std::vector<DatasetRecord> Records(int pos, int neg) {
  std::vector<DatasetRecord> v;
  for (int i = 0; i < pos + neg; ++i) {
    DatasetRecord r;
    r.id = "r" + std::to_string(i);
    r.audio_path = r.id;
    r.label = i % (pos + neg) < pos ? Label::kPositive : Label::kNegative;
    v.push_back(r);
  }
  return v;
}

TEST_CASE("stratified subsample and ablation") {
  const auto train = Records(20, 80);
  const auto sub = StratifiedSubsample(train, 0.2, 4);
  CHECK(sub.size() == 20);
  CHECK(std::count_if(sub.begin(), sub.end(), [](auto& r) { return r.label == Label::kPositive; }) == 4);
  CHECK(StratifiedSubsample(train, 1.0, 4) == train);
  CHECK(StratifiedSubsample(train, 0.4, 9) == StratifiedSubsample(train, 0.4, 9));

  // The toy trainer scores by the positive share of its training subset,
  // so rows are easy to predict.
  const auto val = Records(5, 5);
  AblationTrainer trainer = [](const std::vector<DatasetRecord>& tr, const std::vector<DatasetRecord>& va,
                               std::uint64_t) {
    ScoredSet s;
    for (std::size_t i = 0; i < va.size(); ++i)
      s.Add(va[i].label == Label::kPositive ? 0.5 + 0.001 * tr.size() : 0.2, va[i].label == Label::kPositive, va[i].id);
    return s;
  };
  const auto table = Ablate(trainer, Records(2, 30), val, {1.0, 0.2, 0.6}, {1, 2});
  REQUIRE(table.rows.size() == 6);
  CHECK(table.rows[0].fraction == 0.2);
  CHECK(table.rows[0].skipped);  // round(0.4) = 0 positives
  CHECK(!table.rows[0].note.empty());
  CHECK(table.rows[5].fraction == 1.0);
  CHECK(table.rows[5].train_size == 32);
  CHECK(table.rows[5].report.auc == 1.0);
}

TEST_CASE("report emission") {
  Rng rng(2);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) s[i] = std::round(rng.Uniform() * 10) / 10, y[i] = i % 2;
  const auto report = Evaluate(Set(s, y));
  CHECK(EvalReportFromJson(nlohmann::json::parse(DumpJson(ToJson(report)))) == report);

  const auto dir = std::filesystem::temp_directory_path() / "coughgate_report_test";
  std::filesystem::create_directories(dir);
  EmitReport(report, dir / "r");
  std::ifstream csv(dir / "r.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == report.roc.size() + 1);
  std::stringstream svg;
  svg << std::ifstream(dir / "r.svg").rdbuf();
  const std::string text = svg.str();
  std::size_t polylines = 0;
  for (auto p = text.find("<polyline"); p != std::string::npos; p = text.find("<polyline", p + 1)) ++polylines;
  CHECK(polylines == 1);
  const auto a = text.find("points=\"") + 8;
  const std::string pts = text.substr(a, text.find('"', a) - a);
  CHECK(static_cast<std::size_t>(std::count(pts.begin(), pts.end(), ',')) == report.roc.size());
  std::filesystem::remove_all(dir);
  CHECK(DumpJson(0.1).find("0.10000000000000001") != std::string::npos);
}

}  // namespace
}  // namespace coughgate
