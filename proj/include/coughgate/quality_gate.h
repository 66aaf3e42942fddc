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

#ifndef COUGHGATE_QUALITY_GATE_H_
#define COUGHGATE_QUALITY_GATE_H_

#include <string>
#include <vector>

#include "coughgate/audio_io.h"
#include "coughgate/types.h"

namespace coughgate {

struct GateThresholds {
  double min_max_amplitude = 0.01;
  double max_clipping_ratio = 0.30;
  double min_cough_probability = 0.5;
  double min_background_power_ratio = 3.16;  // 5 dB

  void Validate() const;
};

struct ClippingOptions {
  int min_run = 3;
  double level = 0.99;       // fraction of the buffer's max amplitude
  double flat_tolerance = 1e-4;
};

struct SegmenterOptions {
  double highpass_hz = 100.0;
  double lowpass_hz = 2000.0;
  int envelope_window = 220;  // 50 ms at 4.41 kHz
  int envelope_hop = 44;      // 10 ms at 4.41 kHz
  double floor_percentile = 0.10;
  double on_fraction = 0.25;
  double off_fraction = 0.10;
  double merge_gap_seconds = 0.050;
  double min_segment_seconds = 0.100;
};

struct BackgroundOptions {
  int frame_length = 400;          // 25 ms at 16 kHz
  int min_region = 800;            // 50 ms at 16 kHz
  double zero_background_cap = 1e6;
  bool error_on_zero_background = false;
};

/// Named checks as they appear in QualityReport::failed_checks.
inline constexpr const char* kCheckVolume = "volume";
inline constexpr const char* kCheckClipping = "clipping";
inline constexpr const char* kCheckCough = "cough_probability";
inline constexpr const char* kCheckSegmentation = "segmentation";
inline constexpr const char* kCheckBackground = "background";

struct QualityReport {
  double max_amplitude = 0.0;
  double clipping_ratio = 0.0;
  double cough_probability = 0.0;
  std::vector<CoughSegment> segments;
  double background_power_ratio = 0.0;
  bool background_measured = false;
  bool pass = false;
  std::vector<std::string> failed_checks;
  /// Reasons for failed or skipped checks.
  std::vector<std::string> notes;
  int sample_rate = kFeatureRate;

  bool Failed(const std::string& check) const;
};

/// Max |sample|.
double MeasureVolume(const AudioBuffer& buffer);

/// Fraction of samples inside flat runs (successive samples within
/// `flat_tolerance`, same sign, |x| >= level * max) of at least `min_run`.
double MeasureClipping(const AudioBuffer& buffer, const ClippingOptions& opts = {});

/// Cascaded RBJ biquads forming 4th-order Butterworth high/low-pass sections.
class ButterworthFilter {
 public:
  enum class Kind { kLowpass, kHighpass };
  ButterworthFilter(Kind kind, double cutoff_hz, int sample_rate);
  std::vector<double> Apply(const std::vector<double>& x) const;

 private:
  struct Biquad {
    double b0, b1, b2, a1, a2;
  };
  std::vector<Biquad> sections_;
};

/// RMS envelope with the given window and hop; a short input yields one frame.
std::vector<double> RmsEnvelope(const std::vector<double>& x, int window, int hop);

/// Segments a 44.1 kHz buffer. Band-pass, resample to 4.41 kHz, RMS
/// envelope, then hysteresis against the envelope's noise floor. Returned
/// indices are on the 16 kHz timeline of length `timeline_length` (0 means
/// derive it from the input length).
std::vector<CoughSegment> SegmentCoughs(const AudioBuffer& buffer_44k,
                                        std::size_t timeline_length = 0,
                                        const SegmenterOptions& opts = {});

/// Max 25 ms frame power inside segments over max frame power outside them.
double MeasureBackground(const AudioBuffer& buffer,
                         const std::vector<CoughSegment>& segments,
                         const BackgroundOptions& opts = {});

/// Cough-presence scorer. Implementations must return a value in [0, 1].
class CoughDetector {
 public:
  virtual ~CoughDetector() = default;
  virtual double Probability(const AudioBuffer& buffer,
                             const std::vector<CoughSegment>& segments) const = 0;
};

/// logistic((S - 6) / 3) with S the strongest segment's power ratio in dB
/// over the loudest non-cough frame; 0 without segments or background.
class HeuristicCoughDetector : public CoughDetector {
 public:
  explicit HeuristicCoughDetector(BackgroundOptions opts = {}) : opts_(opts) {}
  double Probability(const AudioBuffer& buffer,
                     const std::vector<CoughSegment>& segments) const override;
  static double FromSnrDb(double snr_db);

 private:
  BackgroundOptions opts_;
};

double DetectCough(const AudioBuffer& buffer,
                   const std::vector<CoughSegment>& segments);

struct ScreenOptions {
  ClippingOptions clipping;
  SegmenterOptions segmenter;
  BackgroundOptions background;
  const CoughDetector* detector = nullptr;  // heuristic when null
};

/// Runs volume, clipping, cough detection, segmentation and background checks
/// on a 16 kHz buffer. Sub-check errors become failures with a note.
QualityReport Screen(const AudioBuffer& buffer_16k, const GateThresholds& thresholds,
                     const ScreenOptions& opts = {});

}  // namespace coughgate

#endif  // COUGHGATE_QUALITY_GATE_H_
