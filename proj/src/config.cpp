#include "popdyn/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "popdyn/csv.hpp"

namespace popdyn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        const auto sep = value.find(',', start);
        const auto end = sep == std::string::npos ? value.size() : sep;
        const std::string item = trim(value.substr(start, end - start));
        if (!item.empty()) out.push_back(item);
        if (sep == std::string::npos) break;
        start = sep + 1;
    }
    return out;
}

int to_int(const std::string& key, const std::string& value) {
    try {
        return static_cast<int>(parse_int(value));
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': expected integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        return parse_double(value);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': expected number, got '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::runtime_error("config key '" + key + "': expected true/false, got '" + value + "'");
}

int parse_fps(const std::string& key, const std::string& value) {
    if (value == "sqrt") return 0;
    if (value == "third") return -1;
    const int v = to_int(key, value);
    if (v < 1) throw std::runtime_error("config key '" + key + "': features_per_split must be >= 1");
    return v;
}

}  // namespace

void ConfigOverlay::set(const std::string& key, const std::string& value) {
    if (key == "dataset") {
        config.dataset_path = value;
    } else if (key == "output_dir") {
        config.output_dir = value;
    } else if (key == "seed") {
        config.seed = static_cast<std::uint64_t>(parse_int(value));
        seed_set = true;
    } else if (key == "threads") {
        config.threads = to_int(key, value);
    } else if (key == "preprocess.tag_dims") {
        config.tag_dims = to_int(key, value);
    } else if (key == "clustering.method") {
        if (value == "kmeans") {
            config.clustering.method = ClusterMethod::kKMeans;
        } else if (value == "meanshift") {
            config.clustering.method = ClusterMethod::kMeanShift;
        } else {
            throw std::runtime_error("config key 'clustering.method': expected kmeans|meanshift");
        }
    } else if (key == "clustering.k") {
        config.clustering.k = to_int(key, value);
    } else if (key == "clustering.bandwidth") {
        config.clustering.bandwidth = to_double(key, value);
    } else if (key == "clustering.restarts") {
        config.clustering.restarts = to_int(key, value);
    } else if (key == "clustering.max_iter") {
        config.clustering.max_iter = to_int(key, value);
    } else if (key == "clustering.tol") {
        config.clustering.tol = to_double(key, value);
    } else if (key == "clustering.k_min") {
        config.clustering.k_min = to_int(key, value);
    } else if (key == "clustering.k_max") {
        config.clustering.k_max = to_int(key, value);
    } else if (key == "classifier.folds") {
        config.classifier.folds = to_int(key, value);
    } else if (key == "classifier.grid.n_trees") {
        grid_n_trees.clear();
        for (const auto& item : split_list(value)) grid_n_trees.push_back(to_int(key, item));
        grid_touched = true;
    } else if (key == "classifier.grid.max_depth") {
        grid_max_depth.clear();
        for (const auto& item : split_list(value)) grid_max_depth.push_back(to_int(key, item));
        grid_touched = true;
    } else if (key == "classifier.grid.min_leaf") {
        grid_min_leaf.clear();
        for (const auto& item : split_list(value)) grid_min_leaf.push_back(to_int(key, item));
        grid_touched = true;
    } else if (key == "classifier.grid.features_per_split") {
        grid_features_per_split.clear();
        for (const auto& item : split_list(value)) grid_features_per_split.push_back(parse_fps(key, item));
        grid_touched = true;
    } else if (key == "regressor.kernel") {
        if (value == "linear") {
            config.regressor.kernel = SvrKernel::kLinear;
        } else if (value == "rbf") {
            config.regressor.kernel = SvrKernel::kRbf;
        } else {
            throw std::runtime_error("config key 'regressor.kernel': expected linear|rbf");
        }
    } else if (key == "regressor.C") {
        config.regressor.C = to_double(key, value);
    } else if (key == "regressor.epsilon") {
        config.regressor.epsilon = to_double(key, value);
    } else if (key == "regressor.gamma") {
        config.regressor.gamma = to_double(key, value);
    } else if (key == "regressor.tol") {
        config.regressor.tol = to_double(key, value);
    } else if (key == "regressor.max_passes") {
        config.regressor.max_passes = to_int(key, value);
    } else if (key == "regressor.transform") {
        if (value == "log1p") {
            config.regressor.log_transform = true;
        } else if (value == "identity") {
            config.regressor.log_transform = false;
        } else {
            throw std::runtime_error("config key 'regressor.transform': expected log1p|identity");
        }
    } else if (key == "regressor.features") {
        config.regressor_features = split_list(value);
    } else if (key.rfind("features.set.", 0) == 0) {
        const std::string suffix = key.substr(std::string("features.set.").size());
        (void)to_int(key, suffix);  // numbered suffix; ordering handled by the loader
        config.candidate_sets.push_back(split_list(value));
    } else if (key == "evaluation.train_fraction") {
        config.evaluation.train_fraction = to_double(key, value);
    } else if (key == "evaluation.runs") {
        config.evaluation.runs = to_int(key, value);
    } else if (key == "evaluation.trim") {
        config.evaluation.trim = to_double(key, value);
    } else if (key == "evaluation.use_shape_area") {
        config.evaluation.use_shape_area = to_bool(key, value);
    } else {
        throw std::runtime_error("unknown config key '" + key + "'");
    }
}

void ConfigOverlay::finalize() {
    if (grid_touched) {
        config.classifier.grid.clear();
        for (const int trees : grid_n_trees) {
            for (const int depth : grid_max_depth) {
                for (const int leaf : grid_min_leaf) {
                    for (const int fps : grid_features_per_split) {
                        ForestParams p;
                        p.n_trees = trees;
                        p.max_depth = depth;
                        p.min_leaf = leaf;
                        p.features_per_split = fps;
                        config.classifier.grid.push_back(p);
                    }
                }
            }
        }
    }
    validate_config(config);
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ConfigOverlay overlay;
    // numbered feature sets are collected then ordered by suffix
    std::map<int, std::vector<std::string>> sets;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + format_int(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.rfind("features.set.", 0) == 0) {
            const int idx = to_int(key, key.substr(std::string("features.set.").size()));
            if (sets.count(idx) != 0) {
                throw std::runtime_error("duplicate config key '" + key + "'");
            }
            sets[idx] = split_list(value);
            continue;
        }
        try {
            overlay.set(key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + format_int(line_no) + ": " + e.what());
        }
    }
    for (auto& [idx, features] : sets) overlay.config.candidate_sets.push_back(std::move(features));
    overlay.finalize();
    return overlay.config;
}

std::vector<std::vector<std::string>> default_candidate_sets() {
    return {
        {"mean_views"},
        {"contacts"},
        {"groups_count"},
        {"mean_views", "groups_count"},
        {"mean_views", "contacts"},
        {"mean_views", "contacts", "groups_count"},
        {"mean_views", "contacts", "groups_count", "groups_avg_members", "groups_avg_pictures"},
    };
}

void validate_config(const PipelineConfig& config) {
    if (config.tag_dims < 1) throw std::runtime_error("config key 'preprocess.tag_dims': must be >= 1");
    if (config.clustering.k < 1) throw std::runtime_error("config key 'clustering.k': must be >= 1");
    if (!(config.clustering.bandwidth > 0.0)) {
        throw std::runtime_error("config key 'clustering.bandwidth': must be > 0");
    }
    if (config.clustering.restarts < 1) {
        throw std::runtime_error("config key 'clustering.restarts': must be >= 1");
    }
    if (config.clustering.k_min < 1 || config.clustering.k_max < config.clustering.k_min) {
        throw std::runtime_error("config key 'clustering.k_min/k_max': bad sweep range");
    }
    if (!(config.regressor.C > 0.0)) throw std::runtime_error("config key 'regressor.C': must be > 0");
    if (config.regressor.epsilon < 0.0) {
        throw std::runtime_error("config key 'regressor.epsilon': must be >= 0");
    }
    if (config.classifier.folds < 2) throw std::runtime_error("config key 'classifier.folds': must be >= 2");
    if (config.classifier.grid.empty()) throw std::runtime_error("classifier grid is empty");
    for (const auto& p : config.classifier.grid) {
        if (p.n_trees < 1 || p.min_leaf < 1 || p.max_depth < 0 || p.features_per_split < -1) {
            throw std::runtime_error("classifier grid contains invalid parameters");
        }
    }
    if (!(config.evaluation.train_fraction > 0.0 && config.evaluation.train_fraction < 1.0)) {
        throw std::runtime_error("config key 'evaluation.train_fraction': must be in (0,1)");
    }
    if (config.evaluation.runs < 1) throw std::runtime_error("config key 'evaluation.runs': must be >= 1");
    if (!(config.evaluation.trim >= 0.0) || config.evaluation.trim >= 0.5) {
        throw std::runtime_error("config key 'evaluation.trim': must be in [0, 0.5)");
    }
    if (config.regressor_features.empty()) {
        throw std::runtime_error("config key 'regressor.features': must name at least one feature");
    }
}

}  // namespace popdyn
