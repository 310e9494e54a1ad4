#ifndef POPDYN_PARALLEL_HPP
#define POPDYN_PARALLEL_HPP

#ifdef _OPENMP
#include <omp.h>
#endif

namespace popdyn {

// Global worker count for the OpenMP kernels. 0 = all available cores.
// Every parallel kernel in this project writes per-index results and folds
// reductions in a fixed order, so the thread count never changes results.
void set_threads(int n);
int threads();

// Resolved count actually handed to omp pragmas.
int resolve_threads();

double wall_time();

}  // namespace popdyn

#endif  // POPDYN_PARALLEL_HPP
