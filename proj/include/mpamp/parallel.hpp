#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mpamp {

// Parallelism budget handed down from the CLI. jobs <= 1 runs inline.
struct Parallelism {
  int jobs = 1;
};

// Runs fn(i) for i in [0, n) on at most `jobs` threads. Work items are
// claimed dynamically; callers write results into pre-sized slots so the
// output never depends on scheduling. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Parallelism par, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, par.jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count - 1);
  for (std::size_t w = 1; w < count; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mpamp
