#pragma once

#include <cstddef>
#include <functional>

namespace mg1 {

/// Thread-count control for the OpenMP kernels. 0 = use OMP default.
/// Every parallel kernel in this library chunks its work on fixed
/// boundaries and reduces in chunk order, so results are bit-identical
/// for any thread count (including 1 / OpenMP disabled).
void set_max_threads(int n);
int max_threads();

/// True when compiled with OpenMP support.
bool openmp_enabled();

namespace detail {

/// Run fn(i) for i in [0, n). Parallel when OpenMP is available.
/// Iterations must be independent; no reduction is performed here.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace detail

}  // namespace mg1
