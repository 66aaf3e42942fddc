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

#include "coughgate/nn/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace coughgate::nn {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "little-endian host required");

void PutU32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void Take(void* dst, std::size_t n) {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint truncated");
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t U32() {
    std::uint32_t v;
    Take(&v, 4);
    return v;
  }
  bool AtEnd() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::filesystem::path SidecarPath(const std::filesystem::path& checkpoint_path) {
  return checkpoint_path.string() + ".json";
}

nlohmann::json ArchitectureJson(const std::vector<LayerSpec>& specs, const Shape& input_shape) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : specs) layers.push_back(s.ToJson());
  return {{"input_shape", input_shape}, {"layers", layers}};
}

template <typename T>
void SaveCheckpoint(const Network<T>& net, const std::filesystem::path& path,
                    const nlohmann::json& metadata) {
  std::string out(kMagic, 8);
  PutU32(out, kCheckpointVersion);
  const auto params = net.Params();
  const auto owner = net.ParamLayerIndex();
  PutU32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = *params[k];
    PutU32(out, static_cast<std::uint32_t>(owner[k]));
    PutU32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    PutU32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape) PutU32(out, static_cast<std::uint32_t>(d));
    for (T v : p.value.data) {
      const float f = static_cast<float>(v);
      char b[4];
      std::memcpy(b, &f, 4);
      out.append(b, 4);
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("write failed for " + path.string());
  }
  nlohmann::json side = metadata.is_object() ? metadata : nlohmann::json::object();
  side["format_version"] = kCheckpointVersion;
  side["architecture"] = ArchitectureJson(net.specs(), net.input_shape());
  side["parameter_count"] = net.ParameterCount();
  std::ofstream s(SidecarPath(path));
  if (!s) throw CheckpointError("cannot write sidecar for " + path.string());
  s << side.dump(2) << "\n";
}

template <typename T>
void LoadWeights(Network<T>& net, const std::filesystem::path& path) {
  Reader r(Slurp(path));
  char magic[8];
  r.Take(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("not a checkpoint: " + path.string());
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  auto params = net.Params();
  const auto owner = net.ParamLayerIndex();
  const std::uint32_t count = r.U32();
  if (count != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(count) + " parameters, network has " +
                          std::to_string(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const std::uint32_t layer = r.U32();
    std::string name(r.U32(), '\0');
    r.Take(name.data(), name.size());
    if (layer != owner[k] || name != p.name)
      throw CheckpointError("checkpoint parameter " + std::to_string(layer) + ":" + name +
                            " does not match " + std::to_string(owner[k]) + ":" + p.name);
    Shape shape(r.U32());
    for (auto& d : shape) d = static_cast<int>(r.U32());
    if (shape != p.value.shape)
      throw CheckpointError("shape mismatch for " + name + ": " + ShapeString(shape) + " vs " +
                            ShapeString(p.value.shape));
    for (auto& v : p.value.data) {
      float f;
      r.Take(&f, 4);
      v = static_cast<T>(f);
    }
  }
  if (!r.AtEnd()) throw CheckpointError("trailing bytes in checkpoint " + path.string());
}

nlohmann::json ReadSidecar(const std::filesystem::path& checkpoint_path) {
  const std::string text = Slurp(SidecarPath(checkpoint_path));
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad sidecar for " + checkpoint_path.string() + ": " + e.what());
  }
}

template <typename T>
Network<T> LoadNetwork(const std::filesystem::path& path) {
  const auto side = ReadSidecar(path);
  std::vector<LayerSpec> specs;
  try {
    for (const auto& j : side.at("architecture").at("layers")) specs.push_back(LayerSpec::FromJson(j));
    Network<T> net(specs, side.at("architecture").at("input_shape").get<Shape>(), 0);
    LoadWeights(net, path);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad architecture in sidecar of " + path.string() + ": " + e.what());
  }
}

template void SaveCheckpoint<float>(const Network<float>&, const std::filesystem::path&,
                                    const nlohmann::json&);
template void SaveCheckpoint<double>(const Network<double>&, const std::filesystem::path&,
                                     const nlohmann::json&);
template void LoadWeights<float>(Network<float>&, const std::filesystem::path&);
template void LoadWeights<double>(Network<double>&, const std::filesystem::path&);
template Network<float> LoadNetwork<float>(const std::filesystem::path&);
template Network<double> LoadNetwork<double>(const std::filesystem::path&);

}  // namespace coughgate::nn
