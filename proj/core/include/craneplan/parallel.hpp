#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace craneplan {

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Each index is processed exactly once; results must be
/// written to index-addressed storage so the outcome is independent of
/// scheduling.
inline void parallel_for(int count, const std::function<void(int)>& fn,
                         int threads = 0) {
  if (count <= 0) return;
  int n = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, std::min(n, count));
  if (n == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += n) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace craneplan
