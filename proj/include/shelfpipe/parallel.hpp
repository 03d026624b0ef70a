#pragma once

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace shelfpipe {

// Every parallel loop in the library also has a serial path selected by this
// policy. The serial path is the reference: tests run both and require
// identical results, and tools/parbench compares their speed.
enum class ExecPolicy { serial, parallel };

inline int hardware_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class Fn>
void parallel_for(std::size_t n, ExecPolicy policy, Fn&& fn) {
#if defined(_OPENMP)
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)policy;
#endif
  for (std::size_t i = 0; i < n; ++i) {
    fn(i);
  }
}

}  // namespace shelfpipe
