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

#include "coughgate/feature_cache.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace coughgate {

namespace {

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> EncodeFeatureMatrix(const Matrix& m) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (m.rows > kMax || m.cols > kMax) throw FeatureCacheError("feature matrix too large");
  std::vector<std::uint8_t> out(std::begin(kFeatureMagic), std::end(kFeatureMagic));
  PutU32(out, static_cast<std::uint32_t>(m.rows));
  PutU32(out, static_cast<std::uint32_t>(m.cols));
  out.reserve(out.size() + 4 * m.data.size());
  for (double v : m.data) PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Matrix DecodeFeatureMatrix(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || !std::equal(std::begin(kFeatureMagic), std::end(kFeatureMagic),
                                       bytes.begin(),
                                       [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    throw FeatureCacheError("not a feature cache file (bad magic)");
  const std::size_t rows = GetU32(bytes.data() + 8);
  const std::size_t cols = GetU32(bytes.data() + 12);
  if (bytes.size() != 16 + 4 * rows * cols)
    throw FeatureCacheError("feature cache size " + std::to_string(bytes.size()) +
                            " does not match shape " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = std::bit_cast<float>(GetU32(bytes.data() + 16 + 4 * i));
  return m;
}

void WriteFeatureMatrix(const std::filesystem::path& path, const Matrix& m) {
  const auto bytes = EncodeFeatureMatrix(m);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FeatureCacheError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FeatureCacheError("write failed for " + path.string());
}

Matrix ReadFeatureMatrix(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FeatureCacheError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return DecodeFeatureMatrix(bytes);
}

}  // namespace coughgate
