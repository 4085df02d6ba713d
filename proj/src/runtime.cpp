#include <algorithm>
#include <cstdlib>
#include <thread>

#include "semeda/parallel.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace semeda {

std::size_t default_threads() {
  if (const char* env = std::getenv("SEMEDA_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace semeda
