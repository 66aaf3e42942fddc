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

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace coughgate::oracle {

namespace {

double Mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double InvMel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

std::string Join(const std::vector<std::string>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s + "}";
}

}  // namespace

std::vector<double> NaiveDftMagnitudes(const std::vector<double>& x, int n) {
  std::vector<double> mags(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    long double re = 0, im = 0;
    for (int t = 0; t < n && t < static_cast<int>(x.size()); ++t) {
      // Reduce k*t mod n first so the angle stays small and exact.
      const long double ang = -2.0L * M_PIl * static_cast<long double>((static_cast<long long>(k) * t) % n) / n;
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    mags[k] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return mags;
}

std::vector<double> NaiveMfccFrame(const std::vector<double>& frame, int win, int n_fft,
                                   int sample_rate, int n_mels, int n_mfcc, double fmin,
                                   double fmax, double log_floor) {
  std::vector<double> w(win, 0.0);
  for (int i = 0; i < win && i < static_cast<int>(frame.size()); ++i)
    w[i] = frame[i] * (0.5 - 0.5 * std::cos(2.0 * M_PI * i / win));
  const auto mag = NaiveDftMagnitudes(w, n_fft);

  // Triangle m spans mel points m, m+1, m+2 of n_mels + 2 equally spaced points.
  std::vector<double> hz(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    hz[i] = InvMel(Mel(fmin) + i * (Mel(fmax) - Mel(fmin)) / (n_mels + 1));
  std::vector<double> logmel(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    double e = 0.0;
    for (int k = 0; k <= n_fft / 2; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double tri = 0.0;
      if (f > hz[m] && f <= hz[m + 1]) tri = (f - hz[m]) / (hz[m + 1] - hz[m]);
      if (f > hz[m + 1] && f < hz[m + 2]) tri = (hz[m + 2] - f) / (hz[m + 2] - hz[m + 1]);
      e += tri * mag[k] * mag[k];
    }
    logmel[m] = std::log(e + log_floor);
  }
  std::vector<double> c(n_mfcc);
  for (int k = 0; k < n_mfcc; ++k) {
    double s = 0.0;
    for (int m = 0; m < n_mels; ++m) s += logmel[m] * std::cos(M_PI / n_mels * (m + 0.5) * k);
    c[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / n_mels);
  }
  return c;
}

double BruteForceAuc(const std::vector<double>& scores, const std::vector<int>& labels) {
  long long wins2 = 0, pairs = 0;  // ties count one, wins two
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins2 += 2;
      else if (scores[i] == scores[j]) wins2 += 1;
    }
  }
  return static_cast<double>(wins2) / (2.0 * static_cast<double>(pairs));
}

KktAudit AuditKkt(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                  const std::vector<double>& duals, double bias, double gamma,
                  double c_positive, double c_negative, double tolerance) {
  KktAudit a;
  const std::size_t n = x.size();
  double eq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = y[i] > 0 ? c_positive : c_negative;
    if (duals[i] < 0.0 || duals[i] > c) a.box_ok = false;
    eq += duals[i] * y[i];
    double f = bias;
    for (std::size_t j = 0; j < n; ++j) {
      if (duals[j] == 0.0) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) d2 += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
      f += duals[j] * y[j] * std::exp(-gamma * d2);
    }
    const double margin = y[i] * f;  // = y_i E_i + 1
    double v = 0.0;
    if (duals[i] == 0.0) v = (1.0 - tolerance) - margin;        // need margin >= 1 - tol
    else if (duals[i] == c) v = margin - (1.0 + tolerance);     // need margin <= 1 + tol
    else v = std::abs(margin - 1.0) - tolerance;                // need |margin - 1| <= tol
    a.max_violation = std::max(a.max_violation, v);
  }
  a.equality_residual = std::abs(eq);
  return a;
}

double PlattObjective(const std::vector<double>& f, const std::vector<int>& y, double a, double b) {
  double np = 0, nn = 0;
  for (int v : y) (v > 0 ? np : nn) += 1;
  const double tp = (np + 1) / (np + 2), tn = 1 / (nn + 2);
  double loss = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = y[i] > 0 ? tp : tn;
    const double z = a * f[i] + b;
    // -t log p - (1-t) log(1-p) with p = 1/(1+e^z), written stably.
    const double log1pez = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += t * log1pez + (1 - t) * (log1pez - z);
  }
  return loss;
}

std::pair<double, double> PlattGridSearch(const std::vector<double>& f, const std::vector<int>& y) {
  double ca = 0.0, cb = 0.0, span = 32.0;
  for (int round = 0; round < 40; ++round) {
    double best = INFINITY, ba = ca, bb = cb;
    for (int i = -20; i <= 20; ++i)
      for (int j = -20; j <= 20; ++j) {
        const double a = ca + span * i / 20.0, b = cb + span * j / 20.0;
        const double v = PlattObjective(f, y, a, b);
        if (v < best) best = v, ba = a, bb = b;
      }
    ca = ba, cb = bb;
    span *= 0.5;
  }
  return {ca, cb};
}

double ClippingRatio(const std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  if (peak == 0.0) return 0.0;
  std::size_t count = 0, i = 0;
  while (i < x.size()) {
    if (std::fabs(x[i]) < 0.99 * peak) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < x.size() && std::fabs(x[j]) >= 0.99 * peak && std::fabs(x[j] - x[j - 1]) <= 1e-4 &&
           (x[j] < 0) == (x[j - 1] < 0))
      ++j;
    if (j - i >= 3) count += j - i;
    i = j;
  }
  return static_cast<double>(count) / static_cast<double>(x.size());
}

double BackgroundRatio(const std::vector<double>& x, const std::vector<CoughSegment>& segments) {
  auto max_power = [&](std::size_t b, std::size_t e) {
    if (e - b < 400) {
      double s = 0;
      for (std::size_t i = b; i < e; ++i) s += x[i] * x[i];
      return s / static_cast<double>(e - b);
    }
    double best = 0;
    for (std::size_t s = b; s + 400 <= e; s += 400) {
      double p = 0;
      for (std::size_t i = s; i < s + 400; ++i) p += x[i] * x[i];
      best = std::max(best, p / 400.0);
    }
    return best;
  };
  double in = 0, out = 0;
  bool gap = false;
  std::size_t prev = 0;
  std::vector<std::pair<std::size_t, std::size_t>> gaps;
  for (const auto& s : segments) {
    gaps.emplace_back(prev, s.start);
    in = std::max(in, max_power(s.start, s.end));
    prev = s.end;
  }
  gaps.emplace_back(prev, x.size());
  for (auto [b, e] : gaps)
    if (e > b && e - b >= 800) out = std::max(out, max_power(b, e)), gap = true;
  if (!gap) return -1.0;
  if (out <= 0) return 1e6;
  return std::min(in / out, 1e6);
}

AudioBuffer NoiseBursts(std::size_t n, double floor_rms, double burst_rms,
                        const std::vector<CoughSegment>& bursts, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  AudioBuffer a;
  a.sample_rate = kFeatureRate;
  a.samples.resize(n);
  for (auto& v : a.samples) v = floor_rms * normal(gen);
  for (const auto& b : bursts)
    for (std::size_t i = b.start; i < b.end && i < n; ++i) a.samples[i] += burst_rms * normal(gen);
  for (auto& v : a.samples) v = std::clamp(v, -1.0, 1.0);
  return a;
}

std::vector<GateCase> BuildGateSuite() {
  std::vector<GateCase> suite;
  std::mt19937_64 gen(20260101);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto sec = [](double s) { return static_cast<std::size_t>(s * kFeatureRate); };

  // Two partials plus some noise under a 10 ms attack, a sustained body
  // and a 10 ms release, over a quiet floor. Sharp edges keep the true
  // extent well defined.
  auto cough = [&](double peak, std::size_t n, std::size_t start, std::size_t len) {
    AudioBuffer a;
    a.samples.resize(n);
    for (auto& v : a.samples) v = 1e-4 * normal(gen);
    const double f0 = 500 + 700 * uni(gen);
    const double ph1 = 6.28 * uni(gen), ph2 = 6.28 * uni(gen);
    std::vector<double> burst(len);
    double top = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / kFeatureRate;
      const double rest = static_cast<double>(len - i) / kFeatureRate;
      const double env = std::min({1.0, t / 0.01, rest / 0.01}) * (1.0 - 0.4 * t / (len / double(kFeatureRate)));
      burst[i] = env * (std::sin(6.2831853 * f0 * t + ph1) + 0.5 * std::sin(6.2831853 * 1.7 * f0 * t + ph2) +
                        0.3 * normal(gen));
      top = std::max(top, std::fabs(burst[i]));
    }
    for (std::size_t i = 0; i < len; ++i) a.samples[start + i] += burst[i] * peak / top;
    return a;
  };

  for (int i = 0; i < 10; ++i) {
    const std::size_t n = sec(1.5 + 0.1 * i), start = sec(0.3 + 0.03 * i), len = sec(0.35);
    suite.push_back({"clean_" + std::to_string(i), cough(0.5 + 0.04 * i, n, start, len), {},
                     {{start, start + len}}});
  }
  for (int i = 0; i < 10; ++i) {
    AudioBuffer a;
    a.samples.assign(sec(0.5 + 0.2 * i), 0.0);
    suite.push_back({"silence_" + std::to_string(i), a, {kCheckVolume, kCheckCough}, {}});
  }
  for (int i = 0; i < 10; ++i) {
    const std::size_t n = sec(1.4 + 0.05 * i), start = sec(0.4), len = sec(0.3 + 0.02 * i);
    suite.push_back({"quiet_" + std::to_string(i), cough(0.002 + 0.0007 * i, n, start, len),
                     {kCheckVolume}, {{start, start + len}}});
  }
  for (int i = 0; i < 10; ++i) {
    // Square wave at 16000 / (2 p) Hz: every sample sits on a +-1 plateau.
    const int p = 6 + i;
    const std::size_t n = sec(1.6), start = sec(0.3), len = sec(0.8 + 0.02 * i);
    AudioBuffer a;
    a.samples.resize(n);
    for (auto& v : a.samples) v = 1e-3 * normal(gen);
    for (std::size_t k = 0; k < len; ++k) a.samples[start + k] = (k / p) % 2 ? -1.0 : 1.0;
    suite.push_back({"clipped_" + std::to_string(i), a, {kCheckClipping}, {{start, start + len}}});
  }
  for (int i = 0; i < 10; ++i) {
    // 1 kHz tone burst barely above a loud white background.
    const std::size_t n = sec(1.5), start = sec(0.5), len = sec(0.4);
    const double noise = 0.2, tone = 0.15 + 0.008 * i;
    AudioBuffer a;
    a.samples.resize(n);
    for (auto& v : a.samples) v = noise * normal(gen);
    for (std::size_t k = 0; k < len; ++k)
      a.samples[start + k] += tone * std::sqrt(2.0) * std::sin(6.2831853 * 1000.0 * k / kFeatureRate);
    for (auto& v : a.samples) v = std::clamp(v, -1.0, 1.0);
    suite.push_back({"noisy_" + std::to_string(i), a, {kCheckCough, kCheckBackground}, {{start, start + len}}});
  }
  return suite;
}

std::string CheckGateCase(const GateCase& c, const QualityReport& r, const GateThresholds& th) {
  std::ostringstream why;
  const auto& x = c.audio.samples;
  double peak = 0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  if (r.max_amplitude != peak) why << "volume " << r.max_amplitude << " vs oracle " << peak << "; ";
  if ((peak < th.min_max_amplitude) != r.Failed(kCheckVolume)) why << "volume verdict; ";

  const double clip = ClippingRatio(x);
  if (std::fabs(r.clipping_ratio - clip) > 1e-15) why << "clipping " << r.clipping_ratio << " vs oracle " << clip << "; ";
  if ((clip > th.max_clipping_ratio) != r.Failed(kCheckClipping)) why << "clipping verdict; ";

  // Segmentation: sorted, disjoint, >= 100 ms, and covering each true
  // burst within 30 ms at both edges.
  const std::size_t tol = kFeatureRate * 30 / 1000;
  for (std::size_t i = 0; i < r.segments.size(); ++i) {
    const auto& s = r.segments[i];
    if (!(s.start < s.end && s.end <= x.size()) || (i && s.start < r.segments[i - 1].end) ||
        s.length() < kFeatureRate / 10)
      why << "segment " << i << " malformed; ";
  }
  if (r.segments.size() != c.bursts.size()) {
    why << r.segments.size() << " segments for " << c.bursts.size() << " bursts; ";
  } else {
    for (std::size_t i = 0; i < c.bursts.size(); ++i) {
      const auto& s = r.segments[i];
      const auto& b = c.bursts[i];
      if (s.start + tol < b.start || b.start + tol < s.start || s.end + tol < b.end || b.end + tol < s.end)
        why << "segment [" << s.start << "," << s.end << ") vs burst [" << b.start << "," << b.end << "); ";
    }
  }

  double ratio = -1.0;
  if (!r.segments.empty()) {
    ratio = BackgroundRatio(x, r.segments);
    if (ratio < 0) {
      if (!r.Failed(kCheckBackground)) why << "background should fail for lack of a gap; ";
    } else {
      if (std::fabs(r.background_power_ratio - ratio) > 1e-9 * ratio)
        why << "background " << r.background_power_ratio << " vs oracle " << ratio << "; ";
      if ((ratio < th.min_background_power_ratio) != r.Failed(kCheckBackground)) why << "background verdict; ";
    }
  }
  const double prob = ratio > 0 ? 1.0 / (1.0 + std::exp(-(10.0 * std::log10(ratio) - 6.0) / 3.0)) : 0.0;
  if (std::fabs(r.cough_probability - prob) > 1e-12) why << "cough " << r.cough_probability << " vs oracle " << prob << "; ";
  if ((prob < th.min_cough_probability) != r.Failed(kCheckCough)) why << "cough verdict; ";

  if (r.failed_checks != c.expected_failures)
    why << "failed " << Join(r.failed_checks) << ", expected " << Join(c.expected_failures) << "; ";
  if (r.pass != r.failed_checks.empty()) why << "pass flag inconsistent; ";
  return why.str();
}

}  // namespace coughgate::oracle
