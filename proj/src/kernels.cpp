#include "popdyn/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace popdyn::kernels {

namespace {

inline void nearest_of(const double* pt, const double* cents, std::size_t k, std::size_t d,
                       int& label, double& best) {
    label = 0;
    best = sqdist(pt, cents, d);
    for (std::size_t c = 1; c < k; ++c) {
        const double dist = sqdist(pt, cents + c * d, d);
        if (dist < best) {
            best = dist;
            label = static_cast<int>(c);
        }
    }
}

// One cluster's mean, summing members in ascending point order.
inline void cluster_mean(const double* pts, std::size_t n, std::size_t d, const int* labels,
                         int cluster, double* cent, std::int64_t& count) {
    std::vector<double> sum(d, 0.0);
    std::int64_t members = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != cluster) continue;
        const double* row = pts + i * d;
        for (std::size_t j = 0; j < d; ++j) sum[j] += row[j];
        ++members;
    }
    count = members;
    if (members > 0) {
        const double inv = 1.0 / static_cast<double>(members);
        for (std::size_t j = 0; j < d; ++j) cent[j] = sum[j] * inv;
    }
}

// Full trajectory of one mean-shift mode.
inline int shift_to_mode(const double* pts, std::size_t n, std::size_t d, double bandwidth,
                         double tol, int max_iter, double* mode) {
    const double bw2 = bandwidth * bandwidth;
    const double tol2 = tol * tol;
    std::vector<double> next(d);
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        std::int64_t inside = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double* row = pts + j * d;
            if (sqdist(mode, row, d) <= bw2) {
                for (std::size_t c = 0; c < d; ++c) next[c] += row[c];
                ++inside;
            }
        }
        if (inside == 0) break;  // cannot happen when the mode starts on a point
        const double inv = 1.0 / static_cast<double>(inside);
        double shift2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            next[c] *= inv;
            const double diff = next[c] - mode[c];
            shift2 += diff * diff;
        }
        std::memcpy(mode, next.data(), d * sizeof(double));
        if (shift2 < tol2) {
            ++iter;
            break;
        }
    }
    return iter;
}

// Silhouette value of one point from per-cluster distance sums.
inline double silhouette_of(const double* pts, std::size_t n, std::size_t d, const int* labels,
                            std::size_t k, const std::int64_t* cluster_sizes, std::size_t i) {
    std::vector<double> dist_sum(k, 0.0);
    const double* pi = pts + i * d;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        dist_sum[static_cast<std::size_t>(labels[j])] += std::sqrt(sqdist(pi, pts + j * d, d));
    }
    const auto own = static_cast<std::size_t>(labels[i]);
    if (cluster_sizes[own] <= 1) return 0.0;  // singleton convention
    const double a = dist_sum[own] / static_cast<double>(cluster_sizes[own] - 1);
    double b = 0.0;
    bool first = true;
    for (std::size_t c = 0; c < k; ++c) {
        if (c == own || cluster_sizes[c] == 0) continue;
        const double mean = dist_sum[c] / static_cast<double>(cluster_sizes[c]);
        if (first || mean < b) {
            b = mean;
            first = false;
        }
    }
    const double denom = a > b ? a : b;
    if (denom == 0.0) return 0.0;
    return (b - a) / denom;
}

}  // namespace

void assign_nearest_ref(const double* pts, std::size_t n, const double* cents, std::size_t k,
                        std::size_t d, int* labels, double* sqd) {
    for (std::size_t i = 0; i < n; ++i) {
        double best = 0.0;
        nearest_of(pts + i * d, cents, k, d, labels[i], best);
        if (sqd != nullptr) sqd[i] = best;
    }
}

void assign_nearest_omp(const double* pts, std::size_t n, const double* cents, std::size_t k,
                        std::size_t d, int* labels, double* sqd, int threads) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double best = 0.0;
        nearest_of(pts + u * d, cents, k, d, labels[u], best);
        if (sqd != nullptr) sqd[u] = best;
    }
}

void centroid_update_ref(const double* pts, std::size_t n, std::size_t d, const int* labels,
                         std::size_t k, double* cents, std::int64_t* counts) {
    for (std::size_t c = 0; c < k; ++c) {
        cluster_mean(pts, n, d, labels, static_cast<int>(c), cents + c * d, counts[c]);
    }
}

void centroid_update_omp(const double* pts, std::size_t n, std::size_t d, const int* labels,
                         std::size_t k, double* cents, std::int64_t* counts, int threads) {
    const auto clusters = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t c = 0; c < clusters; ++c) {
        const auto u = static_cast<std::size_t>(c);
        cluster_mean(pts, n, d, labels, static_cast<int>(c), cents + u * d, counts[u]);
    }
}

void meanshift_modes_ref(const double* pts, std::size_t n, std::size_t d, double bandwidth,
                         double tol, int max_iter, double* modes, int* iters) {
    for (std::size_t i = 0; i < n; ++i) {
        std::memcpy(modes + i * d, pts + i * d, d * sizeof(double));
        const int it = shift_to_mode(pts, n, d, bandwidth, tol, max_iter, modes + i * d);
        if (iters != nullptr) iters[i] = it;
    }
}

void meanshift_modes_omp(const double* pts, std::size_t n, std::size_t d, double bandwidth,
                         double tol, int max_iter, double* modes, int* iters, int threads) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        std::memcpy(modes + u * d, pts + u * d, d * sizeof(double));
        const int it = shift_to_mode(pts, n, d, bandwidth, tol, max_iter, modes + u * d);
        if (iters != nullptr) iters[u] = it;
    }
}

void silhouette_values_ref(const double* pts, std::size_t n, std::size_t d, const int* labels,
                           std::size_t k, double* out) {
    std::vector<std::int64_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(labels[i])];
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = silhouette_of(pts, n, d, labels, k, sizes.data(), i);
    }
}

void silhouette_values_omp(const double* pts, std::size_t n, std::size_t d, const int* labels,
                           std::size_t k, double* out, int threads) {
    std::vector<std::int64_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(labels[i])];
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out[u] = silhouette_of(pts, n, d, labels, k, sizes.data(), u);
    }
}

void gram_ref(KernelKind kind, const double* X, std::size_t n, std::size_t d, double gamma,
              double* K) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = kernel_eval(kind, X + i * d, X + j * d, d, gamma);
            K[i * n + j] = v;
            K[j * n + i] = v;
        }
    }
}

void gram_omp(KernelKind kind, const double* X, std::size_t n, std::size_t d, double gamma,
              double* K, int threads) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        for (std::size_t j = u; j < n; ++j) {
            const double v = kernel_eval(kind, X + u * d, X + j * d, d, gamma);
            K[u * n + j] = v;
            K[j * n + u] = v;
        }
    }
}

void kernel_expand_ref(KernelKind kind, const double* sv, std::size_t m, std::size_t d,
                       const double* beta, double bias, double gamma, const double* Xq,
                       std::size_t q, double* out) {
    for (std::size_t i = 0; i < q; ++i) {
        double acc = bias;
        for (std::size_t s = 0; s < m; ++s) {
            acc += beta[s] * kernel_eval(kind, sv + s * d, Xq + i * d, d, gamma);
        }
        out[i] = acc;
    }
}

void kernel_expand_omp(KernelKind kind, const double* sv, std::size_t m, std::size_t d,
                       const double* beta, double bias, double gamma, const double* Xq,
                       std::size_t q, double* out, int threads) {
    const auto count = static_cast<std::int64_t>(q);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double acc = bias;
        for (std::size_t s = 0; s < m; ++s) {
            acc += beta[s] * kernel_eval(kind, sv + s * d, Xq + u * d, d, gamma);
        }
        out[u] = acc;
    }
}

}  // namespace popdyn::kernels
