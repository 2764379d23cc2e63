#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace formnav {

// worker cap: FORMNAV_THREADS if set (minimum 1), else hardware concurrency
inline int max_threads() {
  if (const char* env = std::getenv("FORMNAV_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// runs fn(i) for i in [0, count). work is split into a fixed strided
// decomposition, so results are independent of the worker count as long as
// each fn(i) only touches its own slot. the first exception (by index) is
// rethrown after all workers join.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(count, max_threads());
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace formnav
