#ifndef SEQMON_PARALLEL_HPP
#define SEQMON_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace seqmon {

/// Worker count: hardware concurrency, capped by the SEQMON_THREADS
/// environment variable when set.
inline int max_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("SEQMON_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Runs fn(i) for i in [0, n).  Each index must be independent; results
/// keyed by index are deterministic regardless of the thread count.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
  const int workers = std::min<long>(max_threads(), n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, n, w, workers] {
      for (long i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace seqmon

#endif  // SEQMON_PARALLEL_HPP
