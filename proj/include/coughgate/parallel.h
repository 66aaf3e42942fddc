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

#ifndef COUGHGATE_PARALLEL_H_
#define COUGHGATE_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace coughgate {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results land in
/// index order regardless of scheduling. The first exception is rethrown
/// after all workers stop.
template <typename R, typename Fn>
std::vector<R> ParallelMap(std::size_t n, int workers, Fn&& fn) {
  std::vector<R> out(n);
  const std::size_t width = std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  if (width == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < width; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace coughgate

#endif  // COUGHGATE_PARALLEL_H_
