#include "popdyn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "popdyn/kernels.hpp"
#include "popdyn/parallel.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {

namespace {

constexpr std::size_t kDim = static_cast<std::size_t>(kDays);

std::vector<std::array<double, kDays>> unpack_centroids(const std::vector<double>& flat,
                                                        std::size_t k) {
    std::vector<std::array<double, kDays>> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::copy_n(flat.data() + c * kDim, kDim, out[c].begin());
    }
    return out;
}

// k-means++ seeding: first centroid uniform, then proportional to the squared
// distance to the nearest chosen centroid. Deterministic given the rng state.
std::vector<double> kmeanspp_init(const std::vector<double>& pts, std::size_t n, std::size_t k,
                                  Rng& rng) {
    std::vector<double> cents(k * kDim);
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy_n(pts.data() + first * kDim, kDim, cents.begin());
    for (std::size_t c = 1; c < k; ++c) {
        const double* prev = cents.data() + (c - 1) * kDim;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = kernels::sqdist(pts.data() + i * kDim, prev, kDim);
            if (d2 < dist2[i]) dist2[i] = d2;
        }
        const double total = kernels::ordered_sum(dist2.data(), n);
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        std::copy_n(pts.data() + pick * kDim, kDim, cents.begin() + static_cast<std::ptrdiff_t>(c * kDim));
    }
    return cents;
}

struct LloydResult {
    std::vector<double> centroids;
    std::vector<int> labels;
    double wss = 0.0;
    std::vector<double> trace;
};

LloydResult lloyd(const std::vector<double>& pts, std::size_t n, std::size_t k, Rng& rng,
                  int max_iter, double tol) {
    const int nthreads = resolve_threads();
    LloydResult res;
    res.centroids = kmeanspp_init(pts, n, k, rng);
    res.labels.assign(n, 0);
    std::vector<double> sqd(n, 0.0);
    std::vector<double> old_cents(k * kDim);
    std::vector<std::int64_t> counts(k, 0);

    for (int iter = 0; iter < max_iter; ++iter) {
        kernels::assign_nearest_omp(pts.data(), n, res.centroids.data(), k, kDim,
                                    res.labels.data(), sqd.data(), nthreads);
        old_cents = res.centroids;
        kernels::centroid_update_omp(pts.data(), n, kDim, res.labels.data(), k,
                                     res.centroids.data(), counts.data(), nthreads);
        // repair empty clusters: reseed at the point farthest from the
        // cluster's previous centroid (ties -> lowest point index)
        std::vector<bool> claimed(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            const double* old_c = old_cents.data() + c * kDim;
            double best = -1.0;
            std::size_t far = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (claimed[i]) continue;
                const double d2 = kernels::sqdist(pts.data() + i * kDim, old_c, kDim);
                if (d2 > best) {
                    best = d2;
                    far = i;
                }
            }
            claimed[far] = true;
            std::copy_n(pts.data() + far * kDim, kDim,
                        res.centroids.begin() + static_cast<std::ptrdiff_t>(c * kDim));
        }
        // WSS with this iteration's labels and updated centroids
        for (std::size_t i = 0; i < n; ++i) {
            sqd[i] = kernels::sqdist(pts.data() + i * kDim,
                                     res.centroids.data() + static_cast<std::size_t>(res.labels[i]) * kDim,
                                     kDim);
        }
        res.trace.push_back(kernels::ordered_sum(sqd.data(), n));

        double shift2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift2 = std::max(shift2, kernels::sqdist(res.centroids.data() + c * kDim,
                                                      old_cents.data() + c * kDim, kDim));
        }
        if (shift2 < tol * tol) break;
    }
    // sync labels with the final centroids
    kernels::assign_nearest_omp(pts.data(), n, res.centroids.data(), k, kDim, res.labels.data(),
                                sqd.data(), nthreads);
    res.wss = kernels::ordered_sum(sqd.data(), n);
    return res;
}

}  // namespace

std::vector<double> pack_shapes(const std::vector<ShapeVector>& shapes) {
    std::vector<double> pts;
    pts.reserve(shapes.size() * kDim);
    for (const auto& s : shapes) {
        if (s.degenerate) {
            throw std::invalid_argument("degenerate shape passed to clustering");
        }
        pts.insert(pts.end(), s.values.begin(), s.values.end());
    }
    return pts;
}

KmeansRun kmeans_single_run(const std::vector<ShapeVector>& shapes, int k, std::uint64_t seed,
                            int max_iter, double tol) {
    const std::size_t n = shapes.size();
    if (n == 0) throw std::invalid_argument("kmeans: empty input");
    if (k < 1 || static_cast<std::size_t>(k) > n) {
        throw std::invalid_argument("kmeans: k out of range");
    }
    const std::vector<double> pts = pack_shapes(shapes);
    Rng rng(seed);
    LloydResult res = lloyd(pts, n, static_cast<std::size_t>(k), rng, max_iter, tol);
    KmeansRun run;
    run.centroids = unpack_centroids(res.centroids, static_cast<std::size_t>(k));
    run.labels = std::move(res.labels);
    run.wss = res.wss;
    run.wss_trace = std::move(res.trace);
    return run;
}

ShapeModel kmeans(const std::vector<ShapeVector>& shapes, int k, std::uint64_t seed,
                  const KmeansOptions& options) {
    const std::size_t n = shapes.size();
    if (n == 0) throw std::invalid_argument("kmeans: empty input");
    if (k < 1 || static_cast<std::size_t>(k) > n) {
        throw std::invalid_argument("kmeans: k out of range");
    }
    if (options.restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
    const std::vector<double> pts = pack_shapes(shapes);

    LloydResult best;
    best.wss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.restarts; ++r) {
        Rng rng(seed + static_cast<std::uint64_t>(r));
        LloydResult run =
            lloyd(pts, n, static_cast<std::size_t>(k), rng, options.max_iter, options.tol);
        if (run.wss < best.wss) best = std::move(run);
    }

    ShapeModel model;
    model.method = ClusterMethod::kKMeans;
    model.prototypes = unpack_centroids(best.centroids, static_cast<std::size_t>(k));
    model.labels = std::move(best.labels);
    model.k = k;
    model.seed = seed;
    return model;
}

double wss(const std::vector<ShapeVector>& shapes, const ShapeModel& model) {
    if (model.labels.size() != shapes.size()) {
        throw std::invalid_argument("wss: labels do not cover all shapes");
    }
    const std::vector<double> pts = pack_shapes(shapes);
    std::vector<double> sqd(shapes.size(), 0.0);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const int label = model.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= model.prototypes.size()) {
            throw std::invalid_argument("wss: label out of range");
        }
        sqd[i] = kernels::sqdist(pts.data() + i * kDim,
                                 model.prototypes[static_cast<std::size_t>(label)].data(), kDim);
    }
    return kernels::ordered_sum(sqd.data(), sqd.size());
}

std::vector<std::pair<int, double>> elbow_sweep(const std::vector<ShapeVector>& shapes, int k_min,
                                                int k_max, std::uint64_t seed,
                                                const KmeansOptions& options) {
    if (k_min < 1 || k_max < k_min) throw std::invalid_argument("elbow_sweep: bad k range");
    if (static_cast<std::size_t>(k_max) > shapes.size()) {
        throw std::invalid_argument("elbow_sweep: k_max exceeds number of shapes");
    }
    std::vector<std::pair<int, double>> table;
    table.reserve(static_cast<std::size_t>(k_max - k_min + 1));
    for (int k = k_min; k <= k_max; ++k) {
        const ShapeModel model = kmeans(shapes, k, seed, options);
        table.emplace_back(k, wss(shapes, model));
    }
    return table;
}

double silhouette(const std::vector<ShapeVector>& shapes, const std::vector<int>& labels) {
    if (labels.size() != shapes.size()) {
        throw std::invalid_argument("silhouette: labels do not cover all shapes");
    }
    // compact the label alphabet to 0..k-1 in ascending label order
    std::vector<int> alphabet(labels);
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
    if (alphabet.size() < 2) {
        throw std::invalid_argument("silhouette requires at least 2 clusters");
    }
    std::vector<int> compact(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), labels[i]);
        compact[i] = static_cast<int>(it - alphabet.begin());
    }
    const std::vector<double> pts = pack_shapes(shapes);
    std::vector<double> values(shapes.size(), 0.0);
    kernels::silhouette_values_omp(pts.data(), shapes.size(), kDim, compact.data(),
                                   alphabet.size(), values.data(), resolve_threads());
    return kernels::ordered_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

ShapeModel mean_shift(const std::vector<ShapeVector>& shapes, double bandwidth,
                      std::uint64_t seed, const MeanShiftOptions& options) {
    const std::size_t n = shapes.size();
    if (n == 0) throw std::invalid_argument("mean_shift: empty input");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("mean_shift: bandwidth must be > 0");
    const std::vector<double> pts = pack_shapes(shapes);

    std::vector<double> modes(n * kDim);
    kernels::meanshift_modes_omp(pts.data(), n, kDim, bandwidth, options.tol, options.max_iter,
                                 modes.data(), nullptr, resolve_threads());

    // merge modes within bandwidth/2, keeping the lowest-index representative
    const double merge2 = 0.25 * bandwidth * bandwidth;
    std::vector<double> protos;
    std::vector<bool> merged(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (merged[i]) continue;
        const double* rep = modes.data() + i * kDim;
        protos.insert(protos.end(), rep, rep + kDim);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!merged[j] && kernels::sqdist(modes.data() + j * kDim, rep, kDim) <= merge2) {
                merged[j] = true;
            }
        }
    }
    std::size_t k = protos.size() / kDim;

    std::vector<int> labels(n, 0);
    kernels::assign_nearest_omp(pts.data(), n, protos.data(), k, kDim, labels.data(), nullptr,
                                resolve_threads());

    // drop modes that attracted no points and compact the indices
    std::vector<std::int64_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(labels[i])];
    std::vector<int> remap(k, -1);
    std::vector<double> kept;
    int next = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        remap[c] = next++;
        kept.insert(kept.end(), protos.begin() + static_cast<std::ptrdiff_t>(c * kDim),
                    protos.begin() + static_cast<std::ptrdiff_t>((c + 1) * kDim));
    }
    for (auto& l : labels) l = remap[static_cast<std::size_t>(l)];

    ShapeModel model;
    model.method = ClusterMethod::kMeanShift;
    model.prototypes = unpack_centroids(kept, static_cast<std::size_t>(next));
    model.labels = std::move(labels);
    model.k = next;
    model.bandwidth = bandwidth;
    model.seed = seed;
    return model;
}

std::vector<int> assign_to_prototypes(const ShapeModel& model,
                                      const std::vector<ShapeVector>& shapes) {
    if (model.prototypes.empty()) throw std::invalid_argument("assign_to_prototypes: empty model");
    const std::vector<double> pts = pack_shapes(shapes);
    std::vector<double> protos;
    protos.reserve(model.prototypes.size() * kDim);
    for (const auto& p : model.prototypes) protos.insert(protos.end(), p.begin(), p.end());
    std::vector<int> labels(shapes.size(), 0);
    kernels::assign_nearest_omp(pts.data(), shapes.size(), protos.data(), model.prototypes.size(),
                                kDim, labels.data(), nullptr, resolve_threads());
    return labels;
}

}  // namespace popdyn
