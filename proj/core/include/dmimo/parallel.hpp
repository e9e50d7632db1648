#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace dmimo {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(chunk_index, begin, end) over [0, count) split into fixed-size
/// chunks. Chunk boundaries depend only on chunk_size, never on the worker
/// count, so per-chunk results reduced in chunk order are deterministic.
inline void parallel_chunks(std::int64_t count, std::int64_t chunk_size, int threads,
                            const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn) {
  if (count <= 0) return;
  const std::int64_t num_chunks = (count + chunk_size - 1) / chunk_size;
  const int workers = std::min<std::int64_t>(resolve_thread_count(threads), num_chunks);

  if (workers <= 1) {
    for (std::int64_t c = 0; c < num_chunks; ++c) {
      const std::int64_t begin = c * chunk_size;
      fn(c, begin, std::min(begin + chunk_size, count));
    }
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t c = next.fetch_add(1);
        if (c >= num_chunks) break;
        const std::int64_t begin = c * chunk_size;
        fn(c, begin, std::min(begin + chunk_size, count));
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace dmimo
