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

#ifndef COUGHGATE_NN_TENSOR_H_
#define COUGHGATE_NN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace coughgate::nn {

using Shape = std::vector<int>;

inline std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::string ShapeString(const Shape& shape);

/// Allocator with a fixed 64-byte alignment. Vectorized reductions peel
/// elements up to the first aligned address, so heap placement would
/// otherwise change the summation order from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Contiguous row-major buffer with a shape.
template <typename T>
struct Tensor {
  Shape shape;
  AlignedVector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0))
      : shape(std::move(s)), data(NumElements(shape), fill) {}
  Tensor(Shape s, const std::vector<T>& values)
      : shape(std::move(s)), data(values.begin(), values.end()) {
    if (data.size() != NumElements(shape))
      throw std::invalid_argument("tensor: value count " + std::to_string(data.size()) +
                                  " does not match shape " + ShapeString(shape));
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Tensor&) const = default;

  template <typename U>
  Tensor<U> Cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

}  // namespace coughgate::nn

#endif  // COUGHGATE_NN_TENSOR_H_
