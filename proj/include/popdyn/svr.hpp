#ifndef POPDYN_SVR_HPP
#define POPDYN_SVR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "popdyn/dataset.hpp"

namespace popdyn {

enum class SvrKernel { kLinear, kRbf };

struct SvrParams {
    SvrKernel kernel = SvrKernel::kRbf;
    double C = 10.0;
    double epsilon = 0.1;  // tube half-width, in transformed target units
    double gamma = 0.0;    // rbf width; 0 resolves to 1/d
    double tol = 1e-3;     // KKT tolerance
    int max_passes = 1000;  // iteration cap is max_passes * n pair updates
    bool log_transform = true;  // log1p on targets, expm1 on predictions
};

/// Per-column z-scoring statistics fitted on training rows. Constant columns
/// are dropped and recorded.
struct Standardizer {
    std::vector<std::string> input_columns;
    std::vector<std::size_t> kept_indices;
    std::vector<std::string> kept_columns;
    std::vector<double> means;
    std::vector<double> stds;
    std::vector<std::string> dropped_columns;
};

Standardizer standardize_fit(const FeatureMatrix& X);
FeatureMatrix standardize_apply(const FeatureMatrix& X, const Standardizer& stats);

struct SvrModel {
    SvrParams params;
    double gamma = 0.0;  // resolved value
    Standardizer standardizer;
    std::uint64_t seed = 0;
    double bias = 0.0;
    // dual coefficients beta_i = alpha_i - alpha*_i in canonical row order;
    // always within [-C, C]
    std::vector<double> dual_coefficients;
    // support vectors: standardized rows with nonzero beta
    std::vector<double> support_x;  // m x kept_columns
    std::vector<double> support_beta;
};

/// Epsilon-insensitive SVR trained by SMO on the (alpha, alpha*) dual with
/// deterministic max-violating-pair selection. Rows are canonically sorted by
/// row id before training; the seed is recorded for provenance.
SvrModel fit_svr(const FeatureMatrix& X, const std::vector<double>& y, const SvrParams& params,
                 std::uint64_t seed);

/// Continuous predictions after the inverse target transform (no clamping or
/// rounding); this is what rank metrics consume.
std::vector<double> predict_raw(const SvrModel& model, const FeatureMatrix& X);

/// Counts: inverse transform, clamped at 0, rounded.
std::vector<std::int64_t> predict_scale(const SvrModel& model, const FeatureMatrix& X);

void save_svr(const SvrModel& model, const std::string& path, const std::string& fingerprint,
              std::uint64_t seed);
SvrModel load_svr(const std::string& path);

struct FeatureSetProtocol {
    double train_fraction = 0.9;
    int runs = 10;
    std::uint64_t master_seed = 0;
    int tag_dims = 64;
    SvrParams svr;
};

struct FeatureSetScore {
    std::vector<std::string> features;
    double mean_spearman = 0.0;
};

/// Trains one SVR per candidate set per split and scores Spearman(predicted,
/// actual scale) on the held-out rows; the table is sorted descending by the
/// mean over runs (ties keep input order).
std::vector<FeatureSetScore> evaluate_feature_sets(
    const std::vector<ImageRecord>& records,
    const std::vector<std::vector<std::string>>& candidate_sets,
    const FeatureSetProtocol& protocol);

}  // namespace popdyn

#endif  // POPDYN_SVR_HPP
