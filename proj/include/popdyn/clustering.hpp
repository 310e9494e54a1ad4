#ifndef POPDYN_CLUSTERING_HPP
#define POPDYN_CLUSTERING_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "popdyn/dynamics.hpp"

namespace popdyn {

enum class ClusterMethod { kKMeans, kMeanShift };

/// Prototype library produced by clustering. `labels` is aligned with the
/// order of the clustered shapes; every label indexes its nearest prototype
/// (Euclidean, ties to the lowest index).
struct ShapeModel {
    ClusterMethod method = ClusterMethod::kKMeans;
    std::vector<std::array<double, kDays>> prototypes;
    std::vector<int> labels;
    int k = 0;               // prototype count
    double bandwidth = 0.0;  // mean shift only
    std::uint64_t seed = 0;
};

/// Packs non-degenerate shapes into a row-major n x 30 buffer; throws if any
/// shape is degenerate.
std::vector<double> pack_shapes(const std::vector<ShapeVector>& shapes);

struct KmeansOptions {
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-6;
};

/// Lloyd iterations with k-means++ starts, best of `restarts` by WSS. Empty
/// clusters are reseeded at the point farthest from their previous centroid.
ShapeModel kmeans(const std::vector<ShapeVector>& shapes, int k, std::uint64_t seed,
                  const KmeansOptions& options = KmeansOptions());

/// Single restart, exposing the per-iteration WSS trace (measured after each
/// centroid update) so Lloyd monotonicity is checkable.
struct KmeansRun {
    std::vector<std::array<double, kDays>> centroids;
    std::vector<int> labels;
    double wss = 0.0;
    std::vector<double> wss_trace;
};
KmeansRun kmeans_single_run(const std::vector<ShapeVector>& shapes, int k, std::uint64_t seed,
                            int max_iter = 300, double tol = 1e-6);

/// Within-cluster sum of squared distances to the assigned prototype.
double wss(const std::vector<ShapeVector>& shapes, const ShapeModel& model);

/// Best-of-restarts WSS per k over [k_min, k_max]; the elbow-plot table.
std::vector<std::pair<int, double>> elbow_sweep(const std::vector<ShapeVector>& shapes, int k_min,
                                                int k_max, std::uint64_t seed,
                                                const KmeansOptions& options = KmeansOptions());

/// Mean silhouette over points; requires at least two distinct labels.
double silhouette(const std::vector<ShapeVector>& shapes, const std::vector<int>& labels);

struct MeanShiftOptions {
    int max_iter = 300;
    double tol = 1e-6;
};

/// Flat-kernel mean shift. Modes within bandwidth/2 are merged keeping the
/// lowest-index representative; every point is labeled with its nearest
/// surviving mode. The procedure itself is deterministic; the seed is
/// recorded for provenance only.
ShapeModel mean_shift(const std::vector<ShapeVector>& shapes, double bandwidth,
                      std::uint64_t seed, const MeanShiftOptions& options = MeanShiftOptions());

/// Nearest-prototype labels for held-out shapes (ties -> lowest index).
std::vector<int> assign_to_prototypes(const ShapeModel& model,
                                      const std::vector<ShapeVector>& shapes);

}  // namespace popdyn

#endif  // POPDYN_CLUSTERING_HPP
