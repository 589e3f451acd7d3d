#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace pinchflow {

/// Worker count: hardware concurrency, capped by PINCHFLOW_THREADS when set.
inline unsigned worker_count() {
  unsigned count = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PINCHFLOW_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) count = std::min<unsigned>(count, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return count;
}

/// Runs body(begin, end) over contiguous, disjoint index ranges covering
/// [0, count). Work assignment is independent of timing, so results written
/// per index are identical for every worker count. `requested` = 0 uses
/// worker_count().
template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned requested = 0) {
  const unsigned wanted = requested ? requested : worker_count();
  const std::size_t workers = std::min<std::size_t>(wanted, std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pinchflow
