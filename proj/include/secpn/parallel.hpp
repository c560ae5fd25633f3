#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace secpn {

// Worker count: hardware concurrency, capped by SECPN_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SECPN_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    } catch (...) {
      // unparsable value: ignore the cap
    }
  }
  return n;
}

// Runs body(i) for i in [0, count). Each index is visited exactly once, so
// bodies writing only to slot i give results independent of the thread count.
template <class Body>
void parallel_for(size_t count, Body&& body) {
  const size_t workers = std::min<size_t>(worker_count(), count);
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < count; i += workers) body(i);
    });
  }
}

}  // namespace secpn
