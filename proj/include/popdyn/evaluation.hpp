#ifndef POPDYN_EVALUATION_HPP
#define POPDYN_EVALUATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "popdyn/clustering.hpp"
#include "popdyn/dataset.hpp"
#include "popdyn/forest.hpp"
#include "popdyn/svr.hpp"

namespace popdyn {

struct SplitPlan {
    std::vector<std::string> train_ids;  // sorted
    std::vector<std::string> test_ids;   // sorted
};

/// Per run r: canonical sort by image_id, a seeded shuffle keyed by
/// master_seed + r, first ceil(train_fraction * n) ids train, rest test.
std::vector<SplitPlan> split_runs(const std::vector<ImageRecord>& records, double train_fraction,
                                  int runs, std::uint64_t master_seed);

struct ClusteringConfig {
    ClusterMethod method = ClusterMethod::kMeanShift;
    int k = 50;
    double bandwidth = 0.53;
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-6;
    int k_min = 1;   // diagnose sweep range
    int k_max = 80;
};

struct ClassifierConfig {
    // a single entry means a direct fit; more entries trigger a per-run grid search
    std::vector<ForestParams> grid = {ForestParams{}};
    int folds = 5;
};

struct EvaluationConfig {
    double train_fraction = 0.9;
    int runs = 10;
    double trim = 0.25;
    // diagnostic mode: appends the shape-area feature to the classifier input
    // (computed from the true shapes, so it is not a pre-upload feature)
    bool use_shape_area = false;
};

struct PipelineConfig {
    std::string dataset_path;
    std::string output_dir = "out";
    std::uint64_t seed = 42;
    int threads = 0;
    int tag_dims = 64;
    ClusteringConfig clustering;
    ClassifierConfig classifier;
    SvrParams regressor;
    std::vector<std::string> regressor_features = {
        "contacts", "photo_count", "mean_views", "num_groups", "avg_group_members",
        "avg_group_photos"};
    std::vector<std::vector<std::string>> candidate_sets;
    EvaluationConfig evaluation;
};

/// The classifier consumes every social feature plus the tag columns.
std::vector<std::string> classifier_feature_set(int tag_dims);

struct RunMetrics {
    int run_index = 0;
    double spearman_scale = 0.0;
    double classifier_accuracy = 0.0;
    double trmse_25 = 0.0;
    double trmse_median = 0.0;
    double rmse_mean = 0.0;  // untrimmed, for reference
};

struct PredictionRow {
    int run = 0;
    std::string image_id;
    EngagementSequence sequence;
    std::int64_t predicted_scale = 0;
    int predicted_prototype = 0;
};

/// Everything fitted inside one run; fitted statistics are exposed so tests
/// can verify they derive from the training partition only.
struct RunArtifacts {
    ImputeStats impute;
    Standardizer standardizer;
    ShapeModel shape_model;
    ForestParams classifier_params;
    RunMetrics metrics;
    std::vector<PredictionRow> predictions;
};

RunArtifacts run_evaluation_once(const std::vector<ImageRecord>& records, const SplitPlan& split,
                                 const PipelineConfig& config, int run_index);

struct EvaluationReport {
    std::vector<RunMetrics> per_run;
    RunMetrics aggregate;  // arithmetic means over runs
    std::string config_fingerprint;
    std::vector<PredictionRow> predictions;  // all runs, test rows only
};

/// The full protocol: per run, cluster / classify / regress on the training
/// partition only, predict and recompose on the test partition, aggregate by
/// mean. A failing run aborts with its run index.
EvaluationReport evaluate_pipeline(const std::vector<ImageRecord>& records,
                                   const PipelineConfig& config);

/// Hex fingerprint of the full effective configuration (and its seed).
std::string config_fingerprint(const PipelineConfig& config);
/// Canonical key=value dump; fingerprint input and `report.txt` preamble.
std::vector<std::pair<std::string, std::string>> config_items(const PipelineConfig& config);

}  // namespace popdyn

#endif  // POPDYN_EVALUATION_HPP
