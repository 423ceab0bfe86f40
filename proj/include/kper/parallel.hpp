/*
 * Copyright 2026 The kper Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace kper {

// Splits [0, n) into `threads` contiguous ranges and runs fn(begin, end, t)
// on each. The partition depends only on (n, threads), so per-thread
// accumulators reduced in t order give reproducible results.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  threads = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end, t] { fn(begin, end, t); });
  }
  fn(std::size_t{0}, std::min(n, chunk), std::size_t{0});
  for (auto& th : pool) th.join();
}

// Number of chunks parallel_for will actually use.
inline std::size_t effective_threads(std::size_t n, std::size_t threads) {
  if (threads <= 1 || n < 2) return 1;
  return std::min(threads, n);
}

}  // namespace kper
