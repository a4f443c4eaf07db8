#pragma once

// Thin OpenMP shim. Everything compiles without OpenMP; the pragmas vanish
// and the thread queries report a single thread.

#ifdef _OPENMP
#include <omp.h>
#define ENDO_PRAGMA(X) _Pragma(#X)
#define ENDO_OMP(ARGS) ENDO_PRAGMA(omp ARGS)
#else
#define ENDO_OMP(ARGS)
#endif

namespace endo::parallel {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline bool in_parallel_region() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

/// Worker count to use for a loop of `work_items`; 0 requests the runtime default.
inline int resolve_workers(int requested) { return requested > 0 ? requested : max_threads(); }

} // namespace endo::parallel
