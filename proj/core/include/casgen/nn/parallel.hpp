#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace casgen::nn {

/// Worker count: CASGEN_WORKERS env var, else 1.
inline int worker_count() {
  if (const char* env = std::getenv("CASGEN_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

/// Static-chunked parallel loop over [0, n). Each index must write only its
/// own outputs; result is then independent of the worker count.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace casgen::nn
