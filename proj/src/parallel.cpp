#include "mg1/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mg1 {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }
int max_threads() { return g_max_threads; }

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

namespace detail {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
#ifdef _OPENMP
    const int nt = g_max_threads;
#pragma omp parallel for schedule(static) num_threads(nt > 0 ? nt : omp_get_max_threads())
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        fn(static_cast<std::size_t>(i));
    }
#else
    for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace detail

}  // namespace mg1
