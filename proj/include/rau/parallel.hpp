#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace rau {

// Worker count: hardware concurrency, capped by RAU_NUM_THREADS when set.
inline std::size_t resolve_num_threads(bool single_thread = false) {
  if (single_thread) {
    return 1;
  }
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RAU_NUM_THREADS")) {
    try {
      const auto cap = std::stoul(env);
      if (cap >= 1) {
        n = std::min<std::size_t>(n, cap);
      }
    } catch (const std::exception&) {
      // ignored: a malformed value leaves the default in place
    }
  }
  return n;
}

// Calls fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries
// depend only on n and the thread count, and callers write disjoint outputs,
// so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t num_threads, Fn&& fn) {
  num_threads = std::clamp<std::size_t>(num_threads, 1, std::max<std::size_t>(n, 1));
  if (num_threads == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + num_threads - 1) / num_threads;
  std::vector<std::thread> workers;
  workers.reserve(num_threads);
  for (std::size_t t = 0; t < num_threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) {
      break;
    }
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& w : workers) {
    w.join();
  }
}

}  // namespace rau
