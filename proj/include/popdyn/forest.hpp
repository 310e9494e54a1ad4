#ifndef POPDYN_FOREST_HPP
#define POPDYN_FOREST_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popdyn/dataset.hpp"

namespace popdyn {

struct ForestParams {
    int n_trees = 100;
    int max_depth = 16;  // 0 = unlimited
    int min_leaf = 1;
    // 0: floor(sqrt(d)), -1: max(1, d/3), otherwise an explicit count
    int features_per_split = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<std::int64_t> histogram;  // leaf class counts, class_labels order
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    ForestParams params;
    std::uint64_t seed = 0;
    std::vector<int> class_labels;      // ascending
    std::vector<std::string> columns;   // training feature schema
};

/// Bagged Gini trees. Rows are canonically sorted by row id before any random
/// draw, and tree t uses the rng stream seeded seed + t, so results do not
/// depend on input row order or on training trees in parallel.
ForestModel fit_forest(const FeatureMatrix& X, const std::vector<int>& y,
                       const ForestParams& params, std::uint64_t seed);

/// Majority vote over per-tree leaf-histogram argmaxes; all ties break to the
/// lowest class label. Rejects a column schema that differs from training.
std::vector<int> predict_forest(const ForestModel& model, const FeatureMatrix& X);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct GridSearchResult {
    ForestParams best;
    double best_accuracy = 0.0;
    std::vector<double> mean_accuracies;  // grid order
};

/// Stratified f-fold cross-validated accuracy per combo; ties keep the first
/// combo in grid order.
GridSearchResult grid_search(const FeatureMatrix& X, const std::vector<int>& y,
                             const std::vector<ForestParams>& grid, int folds,
                             std::uint64_t seed);

void save_forest(const ForestModel& model, const std::string& path,
                 const std::string& fingerprint, std::uint64_t seed);
ForestModel load_forest(const std::string& path);

}  // namespace popdyn

#endif  // POPDYN_FOREST_HPP
