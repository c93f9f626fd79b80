#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mspop {

// Execution mode for the data-parallel kernels.  Exec::serial is the
// reference path; the test suite checks that both modes produce identical
// results before the parallel path is trusted.
enum class Exec { serial, parallel };

template <class F>
void for_each_index(std::ptrdiff_t n, Exec mode, F&& body) {
#ifdef _OPENMP
    if (mode == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
        return;
    }
#else
    (void)mode;
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// 0 leaves the runtime default in place.
inline void set_thread_limit(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

} // namespace mspop
