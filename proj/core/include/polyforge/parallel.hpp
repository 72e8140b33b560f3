#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace polyforge {

/// Runs body(i) for i in [0, count) on at most `parallelism` threads.
///
/// Work items are claimed through a shared counter, so completion order is
/// arbitrary; callers write results into slot i. The first exception thrown
/// by any item is rethrown after every worker has joined.
template <class Body>
void parallel_for(std::size_t count, std::size_t parallelism, Body&& body) {
  if (count == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count || failed.load()) return;
          try {
            body(i);
          } catch (...) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
              first_error = std::current_exception();
            }
            return;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace polyforge
