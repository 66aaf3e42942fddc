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

#include <cmath>

#include "coughgate/quality_gate.h"
#include "coughgate/synth.h"
#include "doctest.h"
#include "oracles.h"

namespace coughgate {
namespace {

AudioBuffer Buf(std::vector<double> s, int rate = kFeatureRate) {
  AudioBuffer b;
  b.samples = std::move(s);
  b.sample_rate = rate;
  return b;
}

std::vector<double> Sine(std::size_t n, double hz, double amp, int rate = kFeatureRate) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * M_PI * hz * i / rate);
  return x;
}

TEST_CASE("volume") {
  CHECK(MeasureVolume(Buf({0.1, -0.5, 0.3})) == 0.5);
  CHECK(MeasureVolume(Buf(std::vector<double>(100, 0.0))) == 0.0);
  // 1 kHz at 16 kHz hits the peak exactly at sample 4.
  CHECK(MeasureVolume(Buf(Sine(1600, 1000, 1.0))) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS(MeasureVolume(Buf({})));
}

TEST_CASE("clipping") {
  CHECK(MeasureClipping(Buf(Sine(16000, 440, 0.5))) == 0.0);
  std::vector<double> square(1000);
  for (std::size_t i = 0; i < square.size(); ++i) square[i] = (i / 10) % 2 ? -1.0 : 1.0;
  CHECK(MeasureClipping(Buf(square)) >= 0.9);
  CHECK(MeasureClipping(Buf(square)) == oracle::ClippingRatio(square));

  std::vector<double> plateau(100);
  for (std::size_t i = 0; i < 100; ++i) plateau[i] = 0.5 * std::sin(0.37 * i);
  for (std::size_t i = 40; i < 45; ++i) plateau[i] = 0.9;
  CHECK(MeasureClipping(Buf(plateau)) == doctest::Approx(0.05));
  CHECK_THROWS(MeasureClipping(Buf({})));

  SUBCASE("scaling keeps the ratio and scales the volume") {
    auto half = square;
    for (auto& v : half) v *= 0.5;
    CHECK(MeasureClipping(Buf(half)) == MeasureClipping(Buf(square)));
    CHECK(MeasureVolume(Buf(half)) == 0.5 * MeasureVolume(Buf(square)));
  }
}

TEST_CASE("segmentation on constructed bursts") {
  const std::size_t sr = kFeatureRate;
  SUBCASE("silence") {
    const auto up = Resample(Buf(std::vector<double>(sr * 2, 0.0)), kSegmentationRate);
    CHECK(SegmentCoughs(up, sr * 2).empty());
  }
  SUBCASE("two bursts one second apart") {
    const std::vector<CoughSegment> bursts = {{sr / 2, sr / 2 + sr * 3 / 10},
                                              {sr * 18 / 10, sr * 21 / 10}};
    const auto a = oracle::NoiseBursts(sr * 3, 0.01, 0.5, bursts, 7);
    const auto segs = SegmentCoughs(Resample(a, kSegmentationRate), a.size());
    REQUIRE(segs.size() == 2);
    const std::size_t tol = sr * 30 / 1000;
    for (int i = 0; i < 2; ++i) {
      CHECK(segs[i].start + tol >= bursts[i].start);
      CHECK(segs[i].start <= bursts[i].start + tol);
      CHECK(segs[i].end + tol >= bursts[i].end);
      CHECK(segs[i].end <= bursts[i].end + tol);
    }
  }
  SUBCASE("one long burst") {
    const auto a = oracle::NoiseBursts(sr * 3, 0.01, 0.5, {{sr / 2, sr * 5 / 2}}, 8);
    CHECK(SegmentCoughs(Resample(a, kSegmentationRate), a.size()).size() == 1);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS(SegmentCoughs(Buf(std::vector<double>(100, 0.0), kSegmentationRate)));
    CHECK_THROWS(SegmentCoughs(Buf(std::vector<double>(sr, 0.0), kFeatureRate)));
  }
}

TEST_CASE("segments are sorted, disjoint, long enough and in range") {
  const std::size_t sr = kFeatureRate;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::vector<CoughSegment> bursts;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t s = sr / 4 + k * sr * 6 / 10 + seed * 300;
      bursts.push_back({s, s + sr / 20 + seed * sr / 50});
    }
    const auto a = oracle::NoiseBursts(sr * 3, 0.003, 0.3, bursts, seed);
    const auto segs = SegmentCoughs(Resample(a, kSegmentationRate), a.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
      CHECK(segs[i].start < segs[i].end);
      CHECK(segs[i].end <= a.size());
      CHECK(segs[i].length() >= sr / 10);
      if (i) CHECK(segs[i].start >= segs[i - 1].end);
    }
  }
}

TEST_CASE("cough detector heuristic") {
  CHECK(DetectCough(Buf(std::vector<double>(16000, 0.1)), {}) == 0.0);
  CHECK(HeuristicCoughDetector::FromSnrDb(6.0) == 0.5);
  CHECK(HeuristicCoughDetector::FromSnrDb(18.0) == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))));
  CHECK(HeuristicCoughDetector::FromSnrDb(18.0) == doctest::Approx(0.982).epsilon(1e-3));
}

TEST_CASE("background ratio") {
  SUBCASE("equal power everywhere") {
    std::vector<double> x(16000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 0.3 : -0.3;
    CHECK(MeasureBackground(Buf(x), {{4000, 8000}}) == doctest::Approx(1.0));
  }
  SUBCASE("0.04 against 0.0004") {
    std::vector<double> x(16000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 ? 1 : -1) * (i >= 4000 && i < 8000 ? 0.2 : 0.02);
    CHECK(MeasureBackground(Buf(x), {{4000, 8000}}) == doctest::Approx(100.0));
  }
  SUBCASE("silent background") {
    std::vector<double> x(16000, 0.0);
    for (std::size_t i = 4000; i < 8000; ++i) x[i] = 0.3;
    CHECK(MeasureBackground(Buf(x), {{4000, 8000}}) == 1e6);
    BackgroundOptions strict;
    strict.error_on_zero_background = true;
    CHECK_THROWS(MeasureBackground(Buf(x), {{4000, 8000}}, strict));
  }
  SUBCASE("errors") {
    std::vector<double> x(16000, 0.1);
    CHECK_THROWS(MeasureBackground(Buf(x), {}));
    CHECK_THROWS(MeasureBackground(Buf(x), {{0, 16000}}));
  }
  SUBCASE("invariant to global scaling") {
    const auto a = oracle::NoiseBursts(16000, 0.02, 0.4, {{5000, 9000}}, 3);
    auto b = a;
    for (auto& v : b.samples) v *= 0.25;
    CHECK(MeasureBackground(a, {{5000, 9000}}) == doctest::Approx(MeasureBackground(b, {{5000, 9000}})).epsilon(1e-12));
  }
}

TEST_CASE("screen verdicts") {
  const GateThresholds th;
  SUBCASE("silence fails volume and cough") {
    const auto r = Screen(Buf(std::vector<double>(32000, 0.0)), th);
    CHECK_FALSE(r.pass);
    CHECK(r.failed_checks == std::vector<std::string>{kCheckVolume, kCheckCough});
  }
  SUBCASE("synthetic cough passes with one segment") {
    SynthOptions o;
    Rng rng(5);
    const auto a = SynthCough(600, o, rng);
    auto r = Screen(a, th);
    CHECK(r.pass);
    CHECK(r.failed_checks.empty());
    CHECK(!r.segments.empty());
  }
  SUBCASE("wrong rate fails without throwing") {
    const auto r = Screen(Buf(std::vector<double>(8000, 0.1), 8000), th);
    CHECK_FALSE(r.pass);
  }
  SUBCASE("deterministic") {
    const auto a = oracle::NoiseBursts(24000, 0.01, 0.5, {{8000, 13000}}, 11);
    const auto r1 = Screen(a, th), r2 = Screen(a, th);
    CHECK(r1.segments == r2.segments);
    CHECK(r1.background_power_ratio == r2.background_power_ratio);
    CHECK(r1.failed_checks == r2.failed_checks);
  }
}

TEST_CASE("constructed gate suite agrees with the per-check oracles") {
  const GateThresholds th;
  const auto suite = oracle::BuildGateSuite();
  REQUIRE(suite.size() == 50);
  for (const auto& c : suite) {
    const auto r = Screen(c.audio, th);
    INFO(c.name);
    CHECK(oracle::CheckGateCase(c, r, th) == "");
  }
}

TEST_CASE("threshold validation") {
  GateThresholds th;
  th.max_clipping_ratio = 1.5;
  CHECK_THROWS(th.Validate());
}

}  // namespace
}  // namespace coughgate
