// Deterministic block parallelism.
//
// Work is split into a fixed list of tasks; each task writes only its own
// output slot, so results do not depend on the number of threads.

#ifndef GLMMIX_PARALLEL_HPP
#define GLMMIX_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace glmmix {

namespace detail {
inline std::atomic<unsigned> worker_override{0};
}

/// Forces the number of worker threads; 0 restores the hardware count.
inline void set_worker_count(unsigned workers) { detail::worker_override = workers; }

inline unsigned worker_count() {
  if (const unsigned forced = detail::worker_override) return forced;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(task) for task in [0, n_tasks). The first exception thrown by any
/// task is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n_tasks, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n_tasks));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Pairwise sum of equally sized buffers in a fixed tree shape: the left
/// subtree always holds the largest power of two below the count.
template <typename Buffer>
Buffer tree_sum(std::vector<Buffer>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  std::size_t half = 1;
  while (half * 2 < hi - lo) half *= 2;
  Buffer left = tree_sum(parts, lo, lo + half);
  const Buffer right = tree_sum(parts, lo + half, hi);
  for (std::size_t i = 0; i < left.size(); ++i) left[i] += right[i];
  return left;
}

}  // namespace glmmix

#endif  // GLMMIX_PARALLEL_HPP
