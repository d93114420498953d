#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace energy_matching {

/// Column chunk size for batched work. Fixed independently of the thread
/// count so results are bit-identical for any degree of parallelism.
inline constexpr long kChunkColumns = 64;

/// Worker count: explicit value if positive, else ENERGY_MATCHING_THREADS,
/// else hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ENERGY_MATCHING_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(begin, end) for consecutive chunks of [0, n). Chunks are
/// disjoint; fn must only write state owned by its chunk.
inline void for_each_chunk(long n, int threads, const std::function<void(long, long)>& fn) {
  const long chunks = (n + kChunkColumns - 1) / kChunkColumns;
  const int workers = static_cast<int>(std::min<long>(std::max(1, threads), chunks));
  if (workers <= 1) {
    for (long c = 0; c < chunks; ++c) fn(c * kChunkColumns, std::min(n, (c + 1) * kChunkColumns));
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (long c = w; c < chunks; c += workers) {
        try {
          fn(c * kChunkColumns, std::min(n, (c + 1) * kChunkColumns));
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace energy_matching
