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

#include "coughgate/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

namespace coughgate {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t ReadU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t ReadU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void PutTag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

// Zeroth-order modified Bessel function of the first kind.
double BesselI0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

std::vector<AudioBuffer> DecodeWav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw AudioError("truncated file: no RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw AudioError("unsupported codec: not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size())
        throw AudioError("truncated file: fmt chunk");
      format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = ReadU32(bytes.data() + body + 4);
      bits = ReadU16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw AudioError("truncated file: extensible fmt chunk");
        // First two bytes of the sub-format GUID carry the real tag.
        format = ReadU16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw AudioError("unsupported codec: data before fmt");
      data = bytes.data() + body;
      data_size = size;
      if (body + size > bytes.size())
        throw AudioError("truncated file: data chunk declares " +
                         std::to_string(size) + " bytes, " +
                         std::to_string(bytes.size() - body) + " present");
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw AudioError("truncated file: missing fmt chunk");
  if (!have_data) throw AudioError("truncated file: missing data chunk");
  if (format != kFormatPcm && format != kFormatFloat)
    throw AudioError("unsupported codec: fmt tag " + std::to_string(format));
  if (channels == 0 || rate == 0)
    throw AudioError("unsupported codec: zero channels or sample rate");
  const bool is_float = format == kFormatFloat;
  if (is_float ? (bits != 32 && bits != 64)
               : (bits != 16 && bits != 24 && bits != 32))
    throw AudioError("unsupported codec: " + std::to_string(bits) +
                     "-bit " + (is_float ? "float" : "PCM"));

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw AudioError("zero-length stream");

  std::vector<AudioBuffer> out(channels);
  for (auto& ch : out) {
    ch.sample_rate = static_cast<int>(rate);
    ch.samples.resize(frames);
  }
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + f * frame_bytes + c * bytes_per_sample;
      double v = 0.0;
      if (is_float) {
        if (bits == 32) {
          float x;
          std::memcpy(&x, p, 4);
          v = x;
        } else {
          std::memcpy(&v, p, 8);
        }
        if (!std::isfinite(v))
          throw AudioError("non-finite float sample at frame " +
                           std::to_string(f));
        v = std::clamp(v, -1.0, 1.0);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(ReadU16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = p[0] | (p[1] << 8) | (p[2] << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(ReadU32(p)) / 2147483648.0;
      }
      out[c].samples[f] = v;
    }
  }
  return out;
}

std::vector<AudioBuffer> ReadWavFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeWav(bytes);
  } catch (const AudioError& e) {
    throw AudioError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> EncodeWav(const std::vector<AudioBuffer>& channels,
                                    int bits_per_sample, bool ieee_float) {
  if (channels.empty()) throw std::invalid_argument("no channels to encode");
  const std::size_t frames = channels[0].size();
  const int rate = channels[0].sample_rate;
  for (const auto& c : channels)
    if (c.size() != frames || c.sample_rate != rate)
      throw std::invalid_argument("channel length or rate mismatch");
  if (ieee_float ? bits_per_sample != 32
                 : (bits_per_sample != 16 && bits_per_sample != 24 &&
                    bits_per_sample != 32))
    throw std::invalid_argument("unsupported encode format");

  const std::uint16_t nch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t bps = bits_per_sample / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * nch * bps);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  PutTag(out, "RIFF");
  PutU32(out, 36 + data_size);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutU32(out, 16);
  PutU16(out, ieee_float ? kFormatFloat : kFormatPcm);
  PutU16(out, nch);
  PutU32(out, static_cast<std::uint32_t>(rate));
  PutU32(out, static_cast<std::uint32_t>(rate) * nch * bps);
  PutU16(out, static_cast<std::uint16_t>(nch * bps));
  PutU16(out, static_cast<std::uint16_t>(bits_per_sample));
  PutTag(out, "data");
  PutU32(out, data_size);
  for (std::size_t f = 0; f < frames; ++f) {
    for (const auto& c : channels) {
      const double x = std::clamp(c.samples[f], -1.0, 1.0);
      if (ieee_float) {
        float v = static_cast<float>(x);
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        PutU32(out, u);
      } else {
        const double scale = std::ldexp(1.0, bits_per_sample - 1);
        const auto q = static_cast<std::int64_t>(std::clamp(
            std::round(x * scale), -scale, scale - 1.0));
        for (std::uint32_t b = 0; b < bps; ++b)
          out.push_back(static_cast<std::uint8_t>((q >> (8 * b)) & 0xFF));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> EncodeWav16(const AudioBuffer& buffer) {
  return EncodeWav({buffer}, 16, false);
}

void WriteWavFile(const std::filesystem::path& path, const AudioBuffer& buffer) {
  const auto bytes = EncodeWav16(buffer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AudioError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw AudioError("failed writing " + path.string());
}

AudioBuffer DownmixMono(const std::vector<AudioBuffer>& channels) {
  if (channels.empty()) throw std::invalid_argument("no channels to downmix");
  const auto& first = channels[0];
  for (const auto& c : channels)
    if (c.size() != first.size() || c.sample_rate != first.sample_rate)
      throw std::invalid_argument("downmix: mismatched channel lengths or rates");
  if (channels.size() == 1) return first;
  AudioBuffer out;
  out.sample_rate = first.sample_rate;
  out.samples.assign(first.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(channels.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    double sum = 0.0;
    for (const auto& c : channels) sum += c.samples[i];
    out.samples[i] = sum * inv;
  }
  return out;
}

Resampler::Resampler(int source_rate, int target_rate)
    : source_rate_(source_rate), target_rate_(target_rate) {
  if (source_rate <= 0) throw std::invalid_argument("source rate must be > 0");
  if (target_rate <= 0) throw std::invalid_argument("target rate must be > 0");
  const std::int64_t g = std::gcd(source_rate, target_rate);
  up_ = target_rate / g;
  down_ = source_rate / g;
  cutoff_ = std::min(1.0, static_cast<double>(up_) / static_cast<double>(down_));
  half_width_ = (kTapsPerPhase / 2) / cutoff_;
  taps_ = 2 * static_cast<int>(std::ceil(half_width_));
  if (up_ * taps_ <= (1 << 20)) {
    table_.resize(static_cast<std::size_t>(up_ * taps_));
    std::vector<double> taps;
    for (std::int64_t p = 0; p < up_; ++p) {
      PhaseTaps(p, taps);
      std::copy(taps.begin(), taps.end(), table_.begin() + p * taps_);
    }
  }
}

double Resampler::Kernel(double tau) const {
  const double x = tau / half_width_;
  if (std::abs(x) >= 1.0) return 0.0;
  const double arg = M_PI * cutoff_ * tau;
  const double sinc = tau == 0.0 ? 1.0 : std::sin(arg) / arg;
  const double window =
      BesselI0(kKaiserBeta * std::sqrt(1.0 - x * x)) / BesselI0(kKaiserBeta);
  return cutoff_ * sinc * window;
}

// Taps for output phase p, applied to input offsets k = 1 - taps/2 .. taps/2
// around floor(t). Normalized to unit DC gain.
void Resampler::PhaseTaps(std::int64_t phase, std::vector<double>& taps) const {
  taps.assign(taps_, 0.0);
  const double frac = static_cast<double>(phase) / static_cast<double>(up_);
  double sum = 0.0;
  for (int j = 0; j < taps_; ++j) {
    const int k = j + 1 - taps_ / 2;
    taps[j] = Kernel(k - frac);
    sum += taps[j];
  }
  for (auto& t : taps) t /= sum;
}

std::size_t Resampler::OutputLength(std::size_t input_length, int source_rate,
                                    int target_rate) {
  const auto n = static_cast<unsigned __int128>(input_length) * target_rate;
  return static_cast<std::size_t>((n + source_rate / 2) / source_rate);
}

AudioBuffer Resampler::Process(const AudioBuffer& input) const {
  if (input.sample_rate != source_rate_)
    throw std::invalid_argument("resampler built for a different source rate");
  AudioBuffer out;
  out.sample_rate = target_rate_;
  if (source_rate_ == target_rate_) {
    out.samples = input.samples;
    return out;
  }
  const std::size_t n_out =
      OutputLength(input.size(), source_rate_, target_rate_);
  out.samples.resize(n_out);
  const auto n_in = static_cast<std::int64_t>(input.size());
  std::vector<double> scratch;
  for (std::size_t n = 0; n < n_out; ++n) {
    const std::int64_t num = static_cast<std::int64_t>(n) * down_;
    const std::int64_t base = num / up_;
    const std::int64_t phase = num % up_;
    const double* taps;
    if (!table_.empty()) {
      taps = table_.data() + phase * taps_;
    } else {
      PhaseTaps(phase, scratch);
      taps = scratch.data();
    }
    const std::int64_t first = base + 1 - taps_ / 2;
    double acc = 0.0;
    const std::int64_t j0 = std::max<std::int64_t>(0, -first);
    const std::int64_t j1 = std::min<std::int64_t>(taps_, n_in - first);
    for (std::int64_t j = j0; j < j1; ++j) acc += taps[j] * input.samples[first + j];
    out.samples[n] = acc;
  }
  return out;
}

AudioBuffer Resample(const AudioBuffer& buffer, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("target rate must be > 0");
  if (buffer.sample_rate == target_rate) return buffer;
  return Resampler(buffer.sample_rate, target_rate).Process(buffer);
}

AudioBuffer LoadStandardized(const std::filesystem::path& path,
                             int target_rate) {
  return Resample(DownmixMono(ReadWavFile(path)), target_rate);
}

}  // namespace coughgate
