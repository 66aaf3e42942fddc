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

#include "coughgate/svm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coughgate/random.h"

namespace coughgate {

void SvmParams::Validate() const {
  if (!(C > 0.0)) throw std::invalid_argument("svm: C must be > 0");
  if (gamma < 0.0 || !std::isfinite(gamma)) throw std::invalid_argument("svm: gamma must be > 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("svm: tolerance must be > 0");
  if (max_passes < 1) throw std::invalid_argument("svm: max_passes must be >= 1");
  if (!(positive_weight > 0.0) || !(negative_weight > 0.0))
    throw std::invalid_argument("svm: class weights must be > 0");
}

nlohmann::json SvmParams::ToJson() const {
  return {{"C", C},
          {"gamma", gamma},
          {"tolerance", tolerance},
          {"max_passes", max_passes},
          {"positive_weight", positive_weight},
          {"negative_weight", negative_weight}};
}

SvmParams SvmParams::FromJson(const nlohmann::json& j) {
  SvmParams p;
  p.C = j.at("C");
  p.gamma = j.at("gamma");
  p.tolerance = j.at("tolerance");
  p.max_passes = j.at("max_passes");
  p.positive_weight = j.value("positive_weight", 1.0);
  p.negative_weight = j.value("negative_weight", 1.0);
  p.Validate();
  return p;
}

double RbfKernel(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace {

class Smo {
 public:
  Smo(const std::vector<std::vector<double>>& x, const std::vector<int>& y, const SvmParams& p)
      : n_(x.size()), y_(y), alpha_(n_, 0.0), err_(n_), c_(n_), k_(n_ * n_), tol_(p.tolerance) {
    for (std::size_t i = 0; i < n_; ++i) {
      c_[i] = p.C * (y_[i] > 0 ? p.positive_weight : p.negative_weight);
      for (std::size_t j = 0; j <= i; ++j) k_[i * n_ + j] = k_[j * n_ + i] = RbfKernel(x[i], x[j], p.gamma);
      err_[i] = -y_[i];  // f = 0 at the start
    }
  }

  bool Violates(std::size_t i) const {
    const double r = y_[i] * err_[i];
    return (r < -tol_ && alpha_[i] < c_[i]) || (r > tol_ && alpha_[i] > 0.0);
  }

  // One sweep; returns the number of successful pair updates and whether any
  // KKT violation was seen.
  std::pair<int, bool> Sweep(Rng& rng) {
    std::vector<std::size_t> order(n_);
    for (std::size_t i = 0; i < n_; ++i) order[i] = i;
    rng.Shuffle(order);
    int changed = 0;
    bool violated = false;
    for (std::size_t i : order) {
      if (!Violates(i)) continue;
      violated = true;
      if (Examine(i, order)) ++changed;
    }
    return {changed, violated};
  }

  double K(std::size_t i, std::size_t j) const { return k_[i * n_ + j]; }
  const std::vector<double>& alpha() const { return alpha_; }
  double bias() const { return b_; }

 private:
  bool Examine(std::size_t i, const std::vector<std::size_t>& order) {
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const double gap = std::abs(err_[i] - err_[j]);
      if (gap > best_gap) best_gap = gap, best = j;
    }
    if (best < n_ && TakeStep(i, best)) return true;
    // Free vectors first, then the rest, in the sweep's shuffled order.
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j : order) {
        if (j == i || j == best) continue;
        const bool free = alpha_[j] > 0.0 && alpha_[j] < c_[j];
        if ((pass == 0) != free) continue;
        if (TakeStep(i, j)) return true;
      }
    return false;
  }

  bool TakeStep(std::size_t i1, std::size_t i2) {
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = err_[i1], e2 = err_[i2];
    const double c1 = c_[i1], c2 = c_[i2];
    const double s = y1 * y2;
    double lo, hi;
    if (s < 0) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c2, c1 + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c1);
      hi = std::min(c2, a1 + a2);
    }
    if (hi - lo < 1e-15) return false;
    const double k11 = K(i1, i1), k12 = K(i1, i2), k22 = K(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    // Identical inputs give eta == 0; the objective is then flat along the pair.
    if (eta <= 1e-12) return false;
    double a2n = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    if (std::abs(a2n - a2) < 1e-12 * (a2n + a2 + 1e-12)) return false;
    double a1n = a1 + s * (a2 - a2n);
    // Roundoff can push a1 a hair outside its box; fold it back into a2.
    if (a1n < 0.0) {
      a2n += s * a1n;
      a1n = 0.0;
    } else if (a1n > c1) {
      a2n += s * (a1n - c1);
      a1n = c1;
    }
    // Snap roundoff residue onto the box so bound vectors are exactly bound.
    auto snap = [](double a, double c) { return a < 1e-12 * c ? 0.0 : a > c * (1.0 - 1e-12) ? c : a; };
    a1n = snap(a1n, c1);
    a2n = snap(a2n, c2);
    const double d1 = y1 * (a1n - a1), d2 = y2 * (a2n - a2);
    const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
    double bn;
    if (a1n > 0.0 && a1n < c1)
      bn = b1;
    else if (a2n > 0.0 && a2n < c2)
      bn = b2;
    else
      bn = 0.5 * (b1 + b2);
    const double db = bn - b_;
    for (std::size_t k = 0; k < n_; ++k) err_[k] += d1 * K(i1, k) + d2 * K(i2, k) + db;
    alpha_[i1] = a1n;
    alpha_[i2] = a2n;
    b_ = bn;
    return true;
  }

  std::size_t n_;
  const std::vector<int>& y_;
  std::vector<double> alpha_, err_, c_, k_;
  double tol_;
  double b_ = 0.0;
};

}  // namespace

SvmTrainResult TrainSvm(const std::vector<std::vector<double>>& vectors,
                        const std::vector<int>& labels, SvmParams params, std::uint64_t seed) {
  params.Validate();
  if (vectors.size() != labels.size())
    throw std::invalid_argument("svm: " + std::to_string(vectors.size()) + " vectors vs " +
                                std::to_string(labels.size()) + " labels");
  if (vectors.empty()) throw std::invalid_argument("svm: empty training set");
  const std::size_t d = vectors[0].size();
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) throw std::invalid_argument("svm: dimension mismatch at vector " + std::to_string(i));
    if (labels[i] == 1)
      has_pos = true;
    else if (labels[i] == -1)
      has_neg = true;
    else
      throw std::invalid_argument("svm: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("svm: training set has a single class");

  if (params.gamma == 0.0) {
    double sum = 0.0, sum2 = 0.0;
    for (const auto& v : vectors)
      for (double x : v) sum += x, sum2 += x * x;
    const double m = static_cast<double>(vectors.size() * d);
    const double var = sum2 / m - (sum / m) * (sum / m);
    params.gamma = var > 1e-12 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }

  Smo smo(vectors, labels, params);
  Rng rng(seed);
  SvmTrainResult result;
  for (int pass = 0; pass < params.max_passes; ++pass) {
    ++result.passes;
    const auto [changed, violated] = smo.Sweep(rng);
    if (!violated) {
      result.converged = true;
      break;
    }
    if (changed == 0) break;  // violators left that no pair can improve
  }

  result.duals = smo.alpha();
  SvmModel& m = result.model;
  m.params = params;
  m.dimension = d;
  m.bias = smo.bias();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (result.duals[i] == 0.0) continue;
    m.support_vectors.push_back(vectors[i]);
    m.alphas.push_back(result.duals[i] * labels[i]);
  }
  return result;
}

double DecisionValue(const SvmModel& model, const std::vector<double>& x) {
  if (x.size() != model.dimension)
    throw std::invalid_argument("svm: query has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.dimension));
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    f += model.alphas[i] * RbfKernel(model.support_vectors[i], x, model.params.gamma);
  return f;
}

namespace {

// log(1 + exp(z)) without overflow.
double Softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

PlattParams FitPlatt(const std::vector<double>& scores, const std::vector<int>& labels,
                     int max_iter, double tol) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("platt: scores and labels must be non-empty and equal length");
  double prior1 = 0, prior0 = 0;
  for (int y : labels) (y > 0 ? prior1 : prior0) += 1;
  if (prior1 == 0 || prior0 == 0) throw std::invalid_argument("platt: need both classes");
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(scores.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = labels[i] > 0 ? hi : lo;

  // Cross-entropy of p = 1 / (1 + exp(A f + B)):
  //   sum_i t_i (A f_i + B) + log(1 + exp(-(A f_i + B)))
  auto objective = [&](double a, double b) {
    double v = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double z = a * scores[i] + b;
      v += t[i] * z + Softplus(-z);
    }
    return v;
  };

  PlattParams out;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  const double sigma = 1e-12;
  out.converged = false;
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double z = a * scores[i] + b;
      // p = P(y = 1) = 1 / (1 + exp(z)), q = 1 - p, both computed stably.
      double p, q;
      if (z >= 0) {
        const double e = std::exp(-z);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) {
      out.converged = true;
      break;
    }
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool accepted = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        const double change = std::abs(fval - nf);
        a = na, b = nb, fval = nf;
        accepted = true;
        if (change < tol * std::max(1.0, std::abs(fval))) out.converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || out.converged) break;
  }
  out.A = a;
  out.B = b;
  return out;
}

double PlattProbability(const PlattParams& platt, double f) {
  const double z = platt.A * f + platt.B;
  double p;
  if (z >= 0) {
    const double e = std::exp(-z);
    p = e / (1.0 + e);
  } else {
    p = 1.0 / (1.0 + std::exp(z));
  }
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double PredictProba(const SvmModel& model, const std::vector<double>& x) {
  return PlattProbability(model.platt, DecisionValue(model, x));
}

namespace {

std::vector<double> ApplyStats(const SvmModel& model, const std::vector<double>& raw) {
  if (!model.stats) return raw;
  const auto& s = *model.stats;
  if (raw.size() != s.mean.size())
    throw std::invalid_argument("svm: raw vector has dimension " + std::to_string(raw.size()) +
                                ", normalization expects " + std::to_string(s.mean.size()));
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k)
    out[k] = s.stddev[k] < 1e-12 ? 0.0 : (raw[k] - s.mean[k]) / s.stddev[k];
  return out;
}

}  // namespace

double DecisionValueRaw(const SvmModel& model, const std::vector<double>& raw) {
  return DecisionValue(model, ApplyStats(model, raw));
}

double PredictProbaRaw(const SvmModel& model, const std::vector<double>& raw) {
  return PredictProba(model, ApplyStats(model, raw));
}

nlohmann::json SvmModelToJson(const SvmModel& model) {
  nlohmann::json j;
  j["model"] = "svm";
  j["version"] = kSvmModelVersion;
  j["kernel"] = "rbf";
  j["params"] = model.params.ToJson();
  j["dimension"] = model.dimension;
  j["bias"] = model.bias;
  j["alphas"] = model.alphas;
  j["support_vectors"] = model.support_vectors;
  j["platt"] = {{"A", model.platt.A},
                {"B", model.platt.B},
                {"converged", model.platt.converged},
                {"iterations", model.platt.iterations}};
  if (model.stats) j["normalization"] = {{"mean", model.stats->mean}, {"stddev", model.stats->stddev}};
  return j;
}

SvmModel SvmModelFromJson(const nlohmann::json& j) {
  try {
    const int version = j.at("version");
    if (version != kSvmModelVersion)
      throw std::invalid_argument("svm: unsupported model version " + std::to_string(version));
    SvmModel m;
    m.params = SvmParams::FromJson(j.at("params"));
    m.dimension = j.at("dimension");
    m.bias = j.at("bias");
    m.alphas = j.at("alphas").get<std::vector<double>>();
    m.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
    if (m.alphas.size() != m.support_vectors.size())
      throw std::invalid_argument("svm: alpha and support vector counts differ");
    const auto& p = j.at("platt");
    m.platt = {p.at("A"), p.at("B"), p.value("converged", true), p.value("iterations", 0)};
    if (j.contains("normalization"))
      m.stats = FeatureStats{j["normalization"].at("mean").get<std::vector<double>>(),
                             j["normalization"].at("stddev").get<std::vector<double>>()};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("svm: malformed model JSON: ") + e.what());
  }
}

}  // namespace coughgate
