#ifndef POPDYN_KERNELS_HPP
#define POPDYN_KERNELS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace popdyn::kernels {

// Hot loops shared by the clustering and regression modules. Each kernel has
// a serial reference (_ref) and an OpenMP variant (_omp). Both run the same
// per-index arithmetic and all reductions fold in fixed index order, so the
// two variants produce bitwise-identical results for any thread count; the
// test suite asserts that and tools/popdyn_bench compares their speed.

inline double sqdist(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

inline double dot(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
}

// left-to-right fold; the one reduction order used everywhere
inline double ordered_sum(const double* values, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += values[i];
    return acc;
}

// Nearest centroid per point (ties -> lowest index). sqd may be null.
void assign_nearest_ref(const double* pts, std::size_t n, const double* cents, std::size_t k,
                        std::size_t d, int* labels, double* sqd);
void assign_nearest_omp(const double* pts, std::size_t n, const double* cents, std::size_t k,
                        std::size_t d, int* labels, double* sqd, int threads);

// Cluster means; members are summed in ascending point order per cluster.
// Empty clusters keep their previous centroid (counts[c] == 0 tells the
// caller to repair them).
void centroid_update_ref(const double* pts, std::size_t n, std::size_t d, const int* labels,
                         std::size_t k, double* cents, std::int64_t* counts);
void centroid_update_omp(const double* pts, std::size_t n, std::size_t d, const int* labels,
                         std::size_t k, double* cents, std::int64_t* counts, int threads);

// Flat-kernel mean shift: each mode starts at its point and moves to the mean
// of all points within `bandwidth` until the shift drops below tol or
// max_iter is hit. iters may be null.
void meanshift_modes_ref(const double* pts, std::size_t n, std::size_t d, double bandwidth,
                         double tol, int max_iter, double* modes, int* iters);
void meanshift_modes_omp(const double* pts, std::size_t n, std::size_t d, double bandwidth,
                         double tol, int max_iter, double* modes, int* iters, int threads);

// Per-point silhouette values s_i = (b-a)/max(a,b); singletons contribute 0.
// labels must be compact 0..k-1.
void silhouette_values_ref(const double* pts, std::size_t n, std::size_t d, const int* labels,
                           std::size_t k, double* out);
void silhouette_values_omp(const double* pts, std::size_t n, std::size_t d, const int* labels,
                           std::size_t k, double* out, int threads);

enum class KernelKind { kLinear = 0, kRbf = 1 };

inline double kernel_eval(KernelKind kind, const double* a, const double* b, std::size_t d,
                          double gamma);

// Full symmetric Gram matrix K[n*n].
void gram_ref(KernelKind kind, const double* X, std::size_t n, std::size_t d, double gamma,
              double* K);
void gram_omp(KernelKind kind, const double* X, std::size_t n, std::size_t d, double gamma,
              double* K, int threads);

// out[q] = sum_m beta[m] * k(sv_m, x_q) + bias, support vectors in index order.
void kernel_expand_ref(KernelKind kind, const double* sv, std::size_t m, std::size_t d,
                       const double* beta, double bias, double gamma, const double* Xq,
                       std::size_t q, double* out);
void kernel_expand_omp(KernelKind kind, const double* sv, std::size_t m, std::size_t d,
                       const double* beta, double bias, double gamma, const double* Xq,
                       std::size_t q, double* out, int threads);

inline double kernel_eval(KernelKind kind, const double* a, const double* b, std::size_t d,
                          double gamma) {
    if (kind == KernelKind::kLinear) return dot(a, b, d);
    return std::exp(-gamma * sqdist(a, b, d));
}

}  // namespace popdyn::kernels

#endif  // POPDYN_KERNELS_HPP
