#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "gridopt/errors.hpp"

namespace gridopt {

/// Runs fn(i) for i in [0, n) over `workers` threads and returns the results
/// in index order. Each task writes only its own slot, so the output is
/// independent of the number of workers and of scheduling order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, int workers, Fn&& fn) {
  if (workers < 1) throw InputError("worker count must be >= 1");
  std::vector<T> results(n);
  if (n == 0) return results;
  if (workers == 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        results[i] = fn(i);
      } catch (...) {
        std::scoped_lock lk(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int spawn = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

/// Resolves a worker count: explicit value wins, else GRIDOPT_WORKERS, else 1.
inline int resolve_workers(int requested) {
  if (requested >= 1) return requested;
  if (const char* env = std::getenv("GRIDOPT_WORKERS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

}  // namespace gridopt
