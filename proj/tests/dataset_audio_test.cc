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
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "coughgate/audio_io.h"
#include "coughgate/dataset.h"
#include "coughgate/fft.h"
#include "coughgate/random.h"
#include "doctest.h"

namespace coughgate {
namespace {

const char* kHeader = "id,audio_path,label,split,source\n";

TEST_CASE("manifest parsing") {
  SUBCASE("rows in file order") {
    const auto m = ParseManifestText(std::string(kHeader) +
                                     "b,b.wav,positive,train,x\n"
                                     "a,a.wav,negative,validation,x\n"
                                     "c,c.wav,unlabeled,train,y\n");
    REQUIRE(m.records.size() == 3);
    CHECK(m.records[0].id == "b");
    CHECK(m.records[1].split == Split::kValidation);
    CHECK(m.records[2].label == Label::kUnlabeled);
  }
  SUBCASE("duplicate id names both rows") {
    try {
      ParseManifestText(std::string(kHeader) +
                        "a1,1.wav,positive,train,x\n"
                        "a2,2.wav,positive,train,x\n"
                        "a3,3.wav,positive,train,x\n"
                        "a1,4.wav,positive,train,x\n");
      FAIL("no error");
    } catch (const ManifestError& e) {
      CHECK(e.rows() == std::vector<int>{2, 5});
    }
  }
  SUBCASE("unknown label") {
    try {
      ParseManifestText(std::string(kHeader) + "a,a.wav,covid,train,x\n");
      FAIL("no error");
    } catch (const ManifestError& e) {
      CHECK(std::string(e.what()).find("unknown label") != std::string::npos);
      CHECK(e.rows() == std::vector<int>{2});
    }
  }
  SUBCASE("missing column, unlabeled outside train, missing file") {
    CHECK_THROWS_AS(ParseManifestText("id,audio_path,label,source\na,a.wav,positive,x\n"), ManifestError);
    CHECK_THROWS_AS(ParseManifestText(std::string(kHeader) + "a,a.wav,unlabeled,test,x\n"), ManifestError);
    CHECK_THROWS_AS(ParseManifestText(std::string(kHeader) + "a,,positive,test,x\n"), ManifestError);
    CHECK_THROWS_AS(ParseManifest("/nonexistent/manifest.csv"), ManifestError);
  }
  SUBCASE("quoted fields and metadata round trip") {
    const auto m = ParseManifestText(
        "#schema_version=3\nid,audio_path,label,split,source,age,note\n"
        "a,\"dir, with comma/a.wav\",positive,train,x,41,\"said \"\"hi\"\"\"\n");
    CHECK(m.schema_version == 3);
    CHECK(m.records[0].audio_path == "dir, with comma/a.wav");
    CHECK(m.records[0].metadata.at("note") == "said \"hi\"");
    CHECK(ParseManifestText(SerializeManifest(m)) == m);
  }
}

DatasetManifest RandomManifest(std::uint64_t seed) {
  Rng rng(seed);
  DatasetManifest m;
  const int n = static_cast<int>(rng.UniformInt(40));
  for (int i = 0; i < n; ++i) {
    DatasetRecord r;
    r.id = "r" + std::to_string(i);
    r.audio_path = "audio/" + r.id + ".wav";
    r.split = static_cast<Split>(rng.UniformInt(3));
    r.label = r.split == Split::kTrain ? static_cast<Label>(rng.UniformInt(3))
                                       : static_cast<Label>(rng.UniformInt(2));
    r.source = rng.Bernoulli(0.5) ? "a" : "b,c";
    if (rng.Bernoulli(0.3)) r.metadata["age"] = std::to_string(rng.UniformInt(90));
    m.records.push_back(r);
  }
  return m;
}

TEST_CASE("split selection partitions every manifest") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = RandomManifest(seed);
    std::multiset<std::string> seen;
    for (Split s : {Split::kTrain, Split::kValidation, Split::kTest})
      for (const auto& r : SelectSplit(m, s, false)) {
        CHECK(r.split == s);
        seen.insert(r.id);
      }
    CHECK(seen.size() == m.records.size());
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == seen.size());
    for (const auto& r : SelectSplit(m, Split::kTrain, true)) CHECK(r.IsLabeled());
    CHECK(ParseManifestText(SerializeManifest(m)) == m);
  }
  const auto m = ParseManifestText(std::string(kHeader) +
                                   "a,a.wav,positive,train,x\n"
                                   "b,b.wav,unlabeled,train,x\n"
                                   "c,c.wav,negative,train,x\n"
                                   "d,d.wav,negative,validation,x\n");
  CHECK(SelectSplit(m, Split::kValidation, false).size() == 1);
  CHECK(SelectSplit(m, Split::kTrain, true).size() == 2);
  CHECK(SelectSplit(DatasetManifest{}, Split::kTrain, false).empty());
}

std::vector<DatasetRecord> Labeled(int pos, int neg) {
  std::vector<DatasetRecord> v;
  for (int i = 0; i < pos + neg; ++i) {
    DatasetRecord r;
    r.id = (i < pos ? "p" : "n") + std::to_string(i);
    r.audio_path = r.id + ".wav";
    r.label = i < pos ? Label::kPositive : Label::kNegative;
    v.push_back(r);
  }
  return v;
}

TEST_CASE("balance upsample") {
  auto count = [](const std::vector<RecordCopy>& out) {
    std::map<std::string, std::set<int>> copies;
    std::map<std::string, int> n;
    for (const auto& c : out) ++n[c.record.id], copies[c.record.id].insert(c.copy_index);
    return std::make_pair(n, copies);
  };
  const auto out = BalanceUpsample(Labeled(2, 10), 4, 9);
  CHECK(out.size() == 18);
  auto [n, copies] = count(out);
  CHECK(n["p0"] == 4);
  CHECK(copies["p1"] == std::set<int>{0, 1, 2, 3});
  CHECK(n["n5"] == 1);

  const auto five = BalanceUpsample(Labeled(1, 3), 5, 1);
  CHECK(five.size() == 8);
  CHECK(count(five).first["p0"] == 5);

  const auto same = BalanceUpsample(Labeled(3, 4), 1, 2);
  CHECK(same.size() == 7);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = BalanceUpsample(Labeled(3 + seed, 7), 4, seed);
    const auto b = BalanceUpsample(Labeled(3 + seed, 7), 4, seed);
    CHECK(a.size() == 7 + 4 * (3 + seed));
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK((a[i].record.id == b[i].record.id && a[i].copy_index == b[i].copy_index));
  }
  CHECK_THROWS(BalanceUpsample(Labeled(1, 1), 0, 0));
  auto unl = Labeled(1, 1);
  unl[0].label = Label::kUnlabeled;
  CHECK_THROWS(BalanceUpsample(unl, 2, 0));
}

std::vector<std::uint8_t> Wav16(std::vector<std::int16_t> samples, int rate, int channels = 1) {
  std::vector<std::uint8_t> b;
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff); };
  auto u16 = [&](std::uint16_t v) { b.push_back(v & 0xff), b.push_back(v >> 8); };
  const std::uint32_t data = static_cast<std::uint32_t>(samples.size() * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + data);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16), u16(1), u16(channels), u32(rate), u32(rate * 2 * channels), u16(2 * channels), u16(16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(data);
  for (auto s : samples) u16(static_cast<std::uint16_t>(s));
  return b;
}

TEST_CASE("wav decoding") {
  const auto a = DecodeWav(Wav16({16384, -32768}, 22050));
  REQUIRE(a.size() == 1);
  CHECK(a[0].samples == std::vector<double>{0.5, -1.0});
  CHECK(a[0].sample_rate == 22050);

  const auto sec = DecodeWav(Wav16(std::vector<std::int16_t>(8000, 7), 8000));
  CHECK(sec[0].size() == 8000);
  CHECK(sec[0].sample_rate == 8000);

  const auto stereo = DecodeWav(Wav16({100, -100, 200, -200}, 8000, 2));
  REQUIRE(stereo.size() == 2);
  CHECK(stereo[1].samples[1] == -200.0 / 32768.0);

  try {
    DecodeWav(Wav16({}, 8000));
    FAIL("no error");
  } catch (const AudioError& e) {
    CHECK(std::string(e.what()).find("zero-length") != std::string::npos);
  }
  auto truncated = Wav16({1, 2, 3, 4}, 8000);
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(DecodeWav(truncated), AudioError);
  auto alaw = Wav16({1, 2}, 8000);
  alaw[20] = 6;  // fmt tag 6 = A-law
  CHECK_THROWS_AS(DecodeWav(alaw), AudioError);
  const std::vector<std::uint8_t> junk = {'n', 'o', 'p', 'e', 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(DecodeWav(junk), AudioError);
}

TEST_CASE("wav encode and decode round trip") {
  Rng rng(1);
  AudioBuffer x;
  x.sample_rate = 16000;
  x.samples.resize(500);
  for (auto& v : x.samples) v = rng.Uniform(-1, 1);
  for (auto [bits, fl] : {std::pair{16, false}, {24, false}, {32, false}, {32, true}}) {
    const auto back = DecodeWav(EncodeWav({x}, bits, fl));
    REQUIRE(back.size() == 1);
    const double tol = fl ? 1e-7 : 1.0 / static_cast<double>(1LL << (bits - 2));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(back[0].samples[i] - x.samples[i]) <= tol);
      CHECK(std::abs(back[0].samples[i]) <= 1.0);
    }
  }
  const auto path = std::filesystem::temp_directory_path() / "coughgate_wav_test.wav";
  WriteWavFile(path, x);
  const auto loaded = LoadStandardized(path, 16000);
  CHECK(loaded.size() == x.size());
  std::filesystem::remove(path);
}

TEST_CASE("downmix") {
  AudioBuffer a, b;
  a.samples = {0.2, 0.4, -0.6};
  b.samples = {0.6, 0.0, 0.2};
  CHECK(DownmixMono({a, b}).samples[0] == doctest::Approx(0.4));
  auto neg = a;
  for (auto& v : neg.samples) v = -v;
  for (double v : DownmixMono({a, neg}).samples) CHECK(v == 0.0);
  CHECK(DownmixMono({a}).samples == a.samples);
  auto scaled_a = a, scaled_b = b;
  for (auto& v : scaled_a.samples) v *= 0.3;
  for (auto& v : scaled_b.samples) v *= 0.3;
  const auto m = DownmixMono({a, b}), ms = DownmixMono({scaled_a, scaled_b});
  for (std::size_t i = 0; i < 3; ++i) CHECK(ms.samples[i] == doctest::Approx(0.3 * m.samples[i]).epsilon(1e-15));
  b.samples.pop_back();
  CHECK_THROWS(DownmixMono({a, b}));
  b.samples.push_back(0), b.sample_rate = 8000;
  CHECK_THROWS(DownmixMono({a, b}));
}

AudioBuffer Sine(double hz, int rate, double seconds, double amp = 0.5) {
  AudioBuffer a;
  a.sample_rate = rate;
  a.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < a.size(); ++i) a.samples[i] = amp * std::sin(2 * M_PI * hz * i / rate);
  return a;
}

TEST_CASE("resampling") {
  SUBCASE("identity rate") {
    const auto a = Sine(440, 16000, 0.1);
    CHECK(Resample(a, 16000).samples == a.samples);
    CHECK_THROWS(Resample(a, 0));
  }
  SUBCASE("length and spectral peak") {
    const auto out = Resample(Sine(1000, 44100, 1.0), 16000);
    CHECK(out.sample_rate == 16000);
    CHECK(out.size() >= 15999);
    CHECK(out.size() <= 16001);
    const std::size_t n = 16384;
    Fft fft(n);
    std::vector<double> mags(n / 2 + 1);
    std::vector<double> x(out.samples.begin(), out.samples.begin() + std::min(n, out.size()));
    fft.RealMagnitudes(x, mags);
    const auto peak = std::max_element(mags.begin(), mags.end()) - mags.begin();
    const double bin = 16000.0 / n;
    CHECK(std::abs(peak * bin - 1000.0) <= bin);
  }
  SUBCASE("dc stays constant away from the edges") {
    AudioBuffer dc;
    dc.sample_rate = 44100;
    dc.samples.assign(44100, 0.3);
    const auto out = Resample(dc, 16000);
    for (std::size_t i = 200; i + 200 < out.size(); ++i) CHECK(std::abs(out.samples[i] - 0.3) < 1e-6);
  }
  SUBCASE("up then down recovers a band-limited signal") {
    AudioBuffer x = Sine(700, 8000, 0.5, 0.4);
    const auto s2 = Sine(2300, 8000, 0.5, 0.2);
    for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += s2.samples[i];
    const auto back = Resample(Resample(x, 16000), 8000);
    REQUIRE(back.size() == x.size());
    double err = 0, sig = 0;
    for (std::size_t i = 200; i + 200 < x.size(); ++i) {
      err += (back.samples[i] - x.samples[i]) * (back.samples[i] - x.samples[i]);
      sig += x.samples[i] * x.samples[i];
    }
    CHECK(10 * std::log10(err / sig) < -60.0);
  }
  CHECK(Resampler::OutputLength(44100, 44100, 16000) == 16000);
}

}  // namespace
}  // namespace coughgate
