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

#ifndef COUGHGATE_FEATURE_CACHE_H_
#define COUGHGATE_FEATURE_CACHE_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "coughgate/types.h"

namespace coughgate {

/// Layout: "CGFEAT01", u32 rows, u32 cols, rows*cols f32 values row-major;
/// all little-endian.
inline constexpr char kFeatureMagic[8] = {'C', 'G', 'F', 'E', 'A', 'T', '0', '1'};

class FeatureCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> EncodeFeatureMatrix(const Matrix& m);
Matrix DecodeFeatureMatrix(const std::vector<std::uint8_t>& bytes);

void WriteFeatureMatrix(const std::filesystem::path& path, const Matrix& m);
Matrix ReadFeatureMatrix(const std::filesystem::path& path);

}  // namespace coughgate

#endif  // COUGHGATE_FEATURE_CACHE_H_
