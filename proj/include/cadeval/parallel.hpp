#pragma once
// Thin wrapper around OpenMP so the library builds (serially) without it
// and so the thread cap from CADEVAL_THREADS is honored in one place.
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cadeval {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Apply the CADEVAL_THREADS environment cap, if set and positive.
inline void apply_thread_env() {
  const char* v = std::getenv("CADEVAL_THREADS");
  if (!v) return;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (end != v && n > 0) set_threads(static_cast<int>(n));
}

inline double wall_time() {
#ifdef _OPENMP
  return omp_get_wtime();
#else
  return 0.0;
#endif
}

}  // namespace cadeval
