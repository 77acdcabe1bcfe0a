#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace igae {

// Worker-thread cap: IGAE_THREADS env var, else hardware concurrency.
inline int worker_threads() {
  if (const char* env = std::getenv("IGAE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Index-partitioned parallel loop over [0, n); each index is processed by
// exactly one worker, so results are independent of scheduling. Used only
// for read-only forward evaluation over disjoint outputs.
inline void parallel_for(int n, const std::function<void(int)>& fn,
                         bool sequential = false) {
  const int threads = sequential ? 1 : std::min(worker_threads(), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace igae
