#ifndef POPDYN_CONFIG_HPP
#define POPDYN_CONFIG_HPP

#include <string>

#include "popdyn/evaluation.hpp"

namespace popdyn {

/// Flat key = value text with dotted section prefixes. '#' starts a comment,
/// blank lines are skipped, unknown keys are rejected. Lists are
/// comma-separated; the classifier grid keys cross-product into combos.
PipelineConfig load_config(const std::string& path);

/// Applies one key/value pair onto a config (the loader and flag overrides
/// share this). Throws on unknown keys or out-of-range values.
struct ConfigOverlay {
    PipelineConfig config;
    bool seed_set = false;
    bool grid_touched = false;
    // pending grid axes; folded into config.classifier.grid by finalize()
    std::vector<int> grid_n_trees = {100};
    std::vector<int> grid_max_depth = {16};
    std::vector<int> grid_min_leaf = {1};
    std::vector<int> grid_features_per_split = {0};

    void set(const std::string& key, const std::string& value);
    void finalize();
};

/// Candidate feature sets mirroring the ones the reference tables rank.
std::vector<std::vector<std::string>> default_candidate_sets();

void validate_config(const PipelineConfig& config);

}  // namespace popdyn

#endif  // POPDYN_CONFIG_HPP
