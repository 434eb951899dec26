#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nrsw::detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

/**
 * Runs fn(k) for k in [0, n) on a work-stealing pool. Results must be
 * written into per-index slots by the caller so reductions can run in index
 * order afterwards, keeping outputs independent of the thread budget.
 */
template <class Fn>
void parallel_for_index(long long n, int threads, Fn&& fn) {
  if (n <= 0) return;
  const int pool_size =
      int(std::min<long long>(resolve_threads(threads), n));
  if (pool_size <= 1) {
    for (long long k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<long long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(pool_size));
  for (int t = 0; t < pool_size; ++t)
    pool.emplace_back([&] {
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const long long k = next.fetch_add(1, std::memory_order_relaxed);
        if (k >= n) return;
        try {
          fn(k);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nrsw::detail
