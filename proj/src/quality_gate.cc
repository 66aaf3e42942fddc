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

#include "coughgate/quality_gate.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coughgate {

void GateThresholds::Validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(min_max_amplitude) || !unit(max_clipping_ratio) ||
      !unit(min_cough_probability))
    throw std::invalid_argument("gate thresholds: amplitude, clipping and "
                                "probability thresholds must lie in [0, 1]");
  if (!(min_background_power_ratio >= 0.0))
    throw std::invalid_argument("gate thresholds: background ratio must be >= 0");
}

bool QualityReport::Failed(const std::string& check) const {
  return std::find(failed_checks.begin(), failed_checks.end(), check) !=
         failed_checks.end();
}

double MeasureVolume(const AudioBuffer& buffer) {
  if (buffer.empty()) throw std::invalid_argument("volume: empty buffer");
  double peak = 0.0;
  for (double x : buffer.samples) peak = std::max(peak, std::abs(x));
  return peak;
}

double MeasureClipping(const AudioBuffer& buffer, const ClippingOptions& opts) {
  const double peak = MeasureVolume(buffer);
  if (peak == 0.0) return 0.0;
  const double level = opts.level * peak;
  const auto& x = buffer.samples;
  std::size_t clipped = 0;
  std::size_t run = 0;
  auto close_run = [&] {
    if (run >= static_cast<std::size_t>(opts.min_run)) clipped += run;
    run = 0;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool high = std::abs(x[i]) >= level;
    if (!high) {
      close_run();
      continue;
    }
    const bool continues = run > 0 && std::abs(x[i] - x[i - 1]) <= opts.flat_tolerance &&
                           std::signbit(x[i]) == std::signbit(x[i - 1]);
    if (!continues) close_run();
    ++run;
  }
  close_run();
  return static_cast<double>(clipped) / static_cast<double>(x.size());
}

ButterworthFilter::ButterworthFilter(Kind kind, double cutoff_hz, int sample_rate) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0)
    throw std::invalid_argument("butterworth: cutoff must lie in (0, Nyquist)");
  const double w0 = 2.0 * M_PI * cutoff_hz / sample_rate;
  const double c = std::cos(w0), s = std::sin(w0);
  for (double q : {0.54119610014619698, 1.3065629648763766}) {
    const double alpha = s / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad b;
    if (kind == Kind::kLowpass) {
      b.b0 = (1.0 - c) / 2.0 / a0;
      b.b1 = (1.0 - c) / a0;
      b.b2 = b.b0;
    } else {
      b.b0 = (1.0 + c) / 2.0 / a0;
      b.b1 = -(1.0 + c) / a0;
      b.b2 = b.b0;
    }
    b.a1 = -2.0 * c / a0;
    b.a2 = (1.0 - alpha) / a0;
    sections_.push_back(b);
  }
}

std::vector<double> ButterworthFilter::Apply(const std::vector<double>& x) const {
  std::vector<double> y = x;
  for (const auto& b : sections_) {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (double& v : y) {
      const double in = v;
      const double out = b.b0 * in + z1;
      z1 = b.b1 * in - b.a1 * out + z2;
      z2 = b.b2 * in - b.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> RmsEnvelope(const std::vector<double>& x, int window, int hop) {
  if (window <= 0 || hop <= 0) throw std::invalid_argument("envelope: bad window or hop");
  const auto w = static_cast<std::size_t>(window);
  const auto h = static_cast<std::size_t>(hop);
  std::vector<double> env;
  if (x.empty()) return env;
  if (x.size() < w) {
    double e = 0.0;
    for (double v : x) e += v * v;
    env.push_back(std::sqrt(e / x.size()));
    return env;
  }
  const std::size_t frames = 1 + (x.size() - w) / h;
  env.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double e = 0.0;
    for (std::size_t i = f * h; i < f * h + w; ++i) e += x[i] * x[i];
    env[f] = std::sqrt(e / w);
  }
  return env;
}

std::vector<CoughSegment> SegmentCoughs(const AudioBuffer& buffer_44k,
                                        std::size_t timeline_length,
                                        const SegmenterOptions& opts) {
  if (buffer_44k.sample_rate != kSegmentationRate)
    throw std::invalid_argument("segmentation: expects 44.1 kHz input, got " +
                                std::to_string(buffer_44k.sample_rate) + " Hz");
  if (buffer_44k.size() < static_cast<std::size_t>(kSegmentationRate / 20))
    throw std::invalid_argument("segmentation: buffer shorter than 50 ms");
  if (timeline_length == 0)
    timeline_length = Resampler::OutputLength(buffer_44k.size(), kSegmentationRate,
                                              kFeatureRate);

  using Kind = ButterworthFilter::Kind;
  AudioBuffer filtered;
  filtered.sample_rate = kSegmentationRate;
  filtered.samples =
      ButterworthFilter(Kind::kLowpass, opts.lowpass_hz, kSegmentationRate)
          .Apply(ButterworthFilter(Kind::kHighpass, opts.highpass_hz, kSegmentationRate)
                     .Apply(buffer_44k.samples));
  const AudioBuffer low = Resample(filtered, kEnvelopeRate);

  const std::vector<double> env =
      RmsEnvelope(low.samples, opts.envelope_window, opts.envelope_hop);
  std::vector<double> sorted = env;
  std::sort(sorted.begin(), sorted.end());
  const double floor = sorted[static_cast<std::size_t>(
      opts.floor_percentile * static_cast<double>(sorted.size() - 1))];
  const double peak = sorted.back();
  std::vector<CoughSegment> segments;
  if (!(peak > floor) || peak < 1e-9) return segments;
  const double on = floor + opts.on_fraction * (peak - floor);
  const double off = floor + opts.off_fraction * (peak - floor);

  // Frame runs [first, last] from the hysteresis pass.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  bool active = false;
  std::size_t first = 0;
  for (std::size_t k = 0; k < env.size(); ++k) {
    if (!active && env[k] >= on) {
      active = true;
      first = k;
    } else if (active && env[k] < off) {
      runs.emplace_back(first, k - 1);
      active = false;
    }
  }
  if (active) runs.emplace_back(first, env.size() - 1);

  // A run starts where the leading edge of its first window crossed into the
  // burst and ends where the trailing edge of the next window leaves it.
  const auto hop = static_cast<std::size_t>(opts.envelope_hop);
  const auto win = std::min(static_cast<std::size_t>(opts.envelope_window), low.size());
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // 4.41 kHz samples
  for (auto [a, b] : runs) {
    std::size_t start = a == 0 ? 0 : a * hop + win - hop;
    std::size_t end = b + 1 == env.size() ? low.size() : std::min((b + 1) * hop, low.size());
    if (start < end) spans.emplace_back(start, end);
  }

  const double merge_gap = opts.merge_gap_seconds * kEnvelopeRate;
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() &&
        static_cast<double>(s.first) - static_cast<double>(merged.back().second) < merge_gap)
      merged.back().second = std::max(merged.back().second, s.second);
    else
      merged.push_back(s);
  }

  const double scale = static_cast<double>(kFeatureRate) / kEnvelopeRate;
  const double min_len = opts.min_segment_seconds * kFeatureRate;
  for (const auto& [s, e] : merged) {
    CoughSegment seg;
    seg.start = std::min(static_cast<std::size_t>(std::llround(s * scale)), timeline_length);
    seg.end = std::min(static_cast<std::size_t>(std::llround(e * scale)), timeline_length);
    if (seg.end <= seg.start) continue;
    if (static_cast<double>(seg.length()) + 0.5 < min_len) continue;
    segments.push_back(seg);
  }
  return segments;
}

namespace {

double MaxFramePower(const std::vector<double>& x, std::size_t begin, std::size_t end,
                     std::size_t frame) {
  double best = 0.0;
  if (end - begin < frame) {
    double e = 0.0;
    for (std::size_t i = begin; i < end; ++i) e += x[i] * x[i];
    return e / static_cast<double>(end - begin);
  }
  for (std::size_t s = begin; s + frame <= end; s += frame) {
    double e = 0.0;
    for (std::size_t i = s; i < s + frame; ++i) e += x[i] * x[i];
    best = std::max(best, e / static_cast<double>(frame));
  }
  return best;
}

}  // namespace

double MeasureBackground(const AudioBuffer& buffer,
                         const std::vector<CoughSegment>& segments,
                         const BackgroundOptions& opts) {
  if (segments.empty()) throw std::invalid_argument("background: no cough segments");
  const auto frame = static_cast<std::size_t>(opts.frame_length);
  const auto min_region = static_cast<std::size_t>(opts.min_region);
  double inside = 0.0, outside = 0.0;
  bool have_outside = false;
  std::size_t cursor = 0;
  auto visit_gap = [&](std::size_t begin, std::size_t end) {
    if (end > begin && end - begin >= min_region) {
      outside = std::max(outside, MaxFramePower(buffer.samples, begin, end, frame));
      have_outside = true;
    }
  };
  for (const auto& s : segments) {
    if (s.start >= s.end || s.end > buffer.size() || s.start < cursor)
      throw std::invalid_argument("background: segments must be sorted, disjoint, in range");
    visit_gap(cursor, s.start);
    inside = std::max(inside, MaxFramePower(buffer.samples, s.start, s.end, frame));
    cursor = s.end;
  }
  visit_gap(cursor, buffer.size());
  if (!have_outside)
    throw std::invalid_argument("background: no non-cough region of at least 50 ms");
  if (outside <= 0.0) {
    if (opts.error_on_zero_background)
      throw std::invalid_argument("background: non-cough regions are exactly silent");
    return opts.zero_background_cap;
  }
  return std::min(inside / outside, opts.zero_background_cap);
}

double HeuristicCoughDetector::FromSnrDb(double snr_db) {
  return 1.0 / (1.0 + std::exp(-(snr_db - 6.0) / 3.0));
}

double HeuristicCoughDetector::Probability(
    const AudioBuffer& buffer, const std::vector<CoughSegment>& segments) const {
  if (segments.empty()) return 0.0;
  double ratio;
  try {
    ratio = MeasureBackground(buffer, segments, opts_);
  } catch (const std::invalid_argument&) {
    return 0.0;
  }
  if (ratio <= 0.0) return 0.0;
  return FromSnrDb(10.0 * std::log10(ratio));
}

double DetectCough(const AudioBuffer& buffer, const std::vector<CoughSegment>& segments) {
  return HeuristicCoughDetector().Probability(buffer, segments);
}

QualityReport Screen(const AudioBuffer& buffer_16k, const GateThresholds& thresholds,
                     const ScreenOptions& opts) {
  thresholds.Validate();
  QualityReport r;
  r.sample_rate = buffer_16k.sample_rate;
  auto fail = [&](const char* check, const std::string& why) {
    if (!r.Failed(check)) r.failed_checks.push_back(check);
    if (!why.empty()) r.notes.push_back(std::string(check) + ": " + why);
  };
  if (buffer_16k.sample_rate != kFeatureRate) {
    fail(kCheckVolume, "buffer is not at 16 kHz");
    return r;
  }

  try {
    r.max_amplitude = MeasureVolume(buffer_16k);
    if (r.max_amplitude < thresholds.min_max_amplitude) fail(kCheckVolume, "");
  } catch (const std::exception& e) {
    fail(kCheckVolume, e.what());
  }

  try {
    r.clipping_ratio = MeasureClipping(buffer_16k, opts.clipping);
    if (r.clipping_ratio > thresholds.max_clipping_ratio) fail(kCheckClipping, "");
  } catch (const std::exception& e) {
    fail(kCheckClipping, e.what());
  }

  bool segmented = false;
  try {
    const AudioBuffer up = Resample(buffer_16k, kSegmentationRate);
    r.segments = SegmentCoughs(up, buffer_16k.size(), opts.segmenter);
    segmented = true;
  } catch (const std::exception& e) {
    fail(kCheckSegmentation, e.what());
  }

  const HeuristicCoughDetector heuristic(opts.background);
  const CoughDetector& detector = opts.detector ? *opts.detector : heuristic;
  r.cough_probability = segmented ? detector.Probability(buffer_16k, r.segments) : 0.0;
  if (r.cough_probability < thresholds.min_cough_probability)
    fail(kCheckCough, r.segments.empty() ? "no cough segments found" : "");

  if (segmented && !r.segments.empty()) {
    try {
      r.background_power_ratio = MeasureBackground(buffer_16k, r.segments, opts.background);
      r.background_measured = true;
      if (r.background_power_ratio < thresholds.min_background_power_ratio)
        fail(kCheckBackground, "");
    } catch (const std::exception& e) {
      fail(kCheckBackground, e.what());
    }
  } else if (segmented) {
    r.notes.push_back("background: skipped, no cough segments");
  }

  // Report failures in check order.
  static const char* const kOrder[] = {kCheckVolume, kCheckClipping, kCheckCough,
                                       kCheckSegmentation, kCheckBackground};
  std::vector<std::string> ordered;
  for (const char* c : kOrder)
    if (r.Failed(c)) ordered.push_back(c);
  r.failed_checks = std::move(ordered);
  r.pass = r.failed_checks.empty();
  return r;
}

}  // namespace coughgate
