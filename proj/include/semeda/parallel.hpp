#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace semeda {

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Worker t takes
/// indices t, t + threads, ...; callers write results into per-index slots
/// so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += workers) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// SEMEDA_THREADS if set and positive, else the hardware concurrency.
std::size_t default_threads();

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS, which otherwise costs a page-fault storm per training step.
/// Process-wide; meant to be called once from main().
void tune_allocator();

}  // namespace semeda
