#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace opt2rl {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static-chunked parallel loop over [0, count). Each index is processed by
// exactly one thread; callers get determinism by writing results per index.
inline void parallel_for(int count, int threads,
                         const std::function<void(int)>& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  if (threads > count) threads = count;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    int lo = static_cast<int>(static_cast<long long>(count) * t / threads);
    int hi = static_cast<int>(static_cast<long long>(count) * (t + 1) / threads);
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace opt2rl
