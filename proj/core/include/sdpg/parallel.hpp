#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace sdpg {

// Runs fn(begin, end) over fixed-size chunks of [0, total). Chunk boundaries
// depend only on chunk_size, never on the worker count, so any computation
// whose chunks write disjoint outputs produces identical results for every
// worker count.
inline void parallel_chunks(int total, int chunk_size, int workers,
                            const std::function<void(int, int)>& fn) {
  if (total <= 0) return;
  const int n_chunks = (total + chunk_size - 1) / chunk_size;
  if (workers <= 1 || n_chunks <= 1) {
    for (int c = 0; c < n_chunks; ++c) {
      fn(c * chunk_size, std::min(total, (c + 1) * chunk_size));
    }
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
      fn(c * chunk_size, std::min(total, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, n_chunks);
  pool.reserve(n_threads - 1);
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace sdpg
