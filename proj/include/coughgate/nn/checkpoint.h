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

#ifndef COUGHGATE_NN_CHECKPOINT_H_
#define COUGHGATE_NN_CHECKPOINT_H_

#include <filesystem>
#include <stdexcept>

#include "coughgate/nn/layers.h"
#include "json.hpp"

namespace coughgate::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, little-endian:
///   "CGNNCKPT" | u32 version | u32 param_count |
///   per param: u32 layer | u32 name_len | name | u32 rank | u32 dims[rank] |
///              f32 values[prod(dims)]
/// A sidecar "<path>.json" holds `metadata` plus the architecture.
template <typename T>
void SaveCheckpoint(const Network<T>& net, const std::filesystem::path& path,
                    const nlohmann::json& metadata = nlohmann::json::object());

/// Loads values into an already-built network with the same layout.
template <typename T>
void LoadWeights(Network<T>& net, const std::filesystem::path& path);

/// Rebuilds the network from the sidecar architecture, then loads weights.
template <typename T>
Network<T> LoadNetwork(const std::filesystem::path& path);

nlohmann::json ReadSidecar(const std::filesystem::path& checkpoint_path);
std::filesystem::path SidecarPath(const std::filesystem::path& checkpoint_path);

nlohmann::json ArchitectureJson(const std::vector<LayerSpec>& specs, const Shape& input_shape);

}  // namespace coughgate::nn

#endif  // COUGHGATE_NN_CHECKPOINT_H_
