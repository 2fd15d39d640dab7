#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace apc {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(row) for every row in [0, rows). Rows are dealt out in contiguous
// bands, so each worker writes a disjoint image region. The first exception
// thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for_rows(int rows, int threads, Body&& body) {
  const int workers = std::clamp(resolve_thread_count(threads), 1, std::max(rows, 1));
  if (workers == 1) {
    for (int y = 0; y < rows; ++y) body(y);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = rows * w / workers;
    const int end = rows * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (int y = begin; y < end; ++y) body(y);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace apc
