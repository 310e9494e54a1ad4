#include "popdyn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "popdyn/csv.hpp"
#include "popdyn/hash.hpp"
#include "popdyn/parallel.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {

namespace {

// canonical row order: ascending row id, original index as tiebreak
std::vector<std::size_t> canonical_order(const std::vector<std::string>& ids) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    return order;
}

double gini(const std::vector<std::int64_t>& counts, std::int64_t total) {
    if (total == 0) return 0.0;
    double acc = 0.0;
    for (const std::int64_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        acc += p * p;
    }
    return 1.0 - acc;
}

struct TreeBuilder {
    const std::vector<double>& X;  // canonical order, row-major
    std::size_t cols;
    const std::vector<int>& y;  // class indices, canonical order
    std::size_t n_classes;
    const ForestParams& params;
    int subset_size;
    Rng& rng;
    DecisionTree tree;

    double value(std::size_t row, std::size_t col) const { return X[row * cols + col]; }

    int build(std::vector<std::size_t>& rows, int depth) {
        std::vector<std::int64_t> hist(n_classes, 0);
        for (const std::size_t r : rows) ++hist[static_cast<std::size_t>(y[r])];
        const auto total = static_cast<std::int64_t>(rows.size());

        const bool pure = std::count_if(hist.begin(), hist.end(),
                                        [](std::int64_t c) { return c > 0; }) <= 1;
        const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
        if (pure || depth_capped || total < 2 * params.min_leaf) {
            return make_leaf(std::move(hist));
        }

        // random feature subset, evaluated in ascending index order
        std::vector<int> features(cols);
        std::iota(features.begin(), features.end(), 0);
        const int m = std::min<int>(subset_size, static_cast<int>(cols));
        for (int i = 0; i < m; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           static_cast<std::size_t>(rng.below(cols - static_cast<std::size_t>(i)));
            std::swap(features[static_cast<std::size_t>(i)], features[j]);
        }
        features.resize(static_cast<std::size_t>(m));
        std::sort(features.begin(), features.end());

        const double parent_gini = gini(hist, total);
        double best_decrease = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::pair<double, int>> sorted;
        sorted.reserve(rows.size());
        std::vector<std::int64_t> left_hist(n_classes);
        for (const int f : features) {
            sorted.clear();
            for (const std::size_t r : rows) {
                sorted.emplace_back(value(r, static_cast<std::size_t>(f)), y[r]);
            }
            std::sort(sorted.begin(), sorted.end());
            std::fill(left_hist.begin(), left_hist.end(), 0);
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                ++left_hist[static_cast<std::size_t>(sorted[i].second)];
                if (sorted[i].first == sorted[i + 1].first) continue;
                const auto n_left = static_cast<std::int64_t>(i + 1);
                const std::int64_t n_right = total - n_left;
                if (n_left < params.min_leaf || n_right < params.min_leaf) continue;
                const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                // the routing rule x < t must reproduce this partition
                if (!(sorted[i].first < threshold && threshold <= sorted[i + 1].first)) continue;
                std::vector<std::int64_t> right_hist(n_classes);
                for (std::size_t c = 0; c < n_classes; ++c) right_hist[c] = hist[c] - left_hist[c];
                const double weighted = (static_cast<double>(n_left) * gini(left_hist, n_left) +
                                         static_cast<double>(n_right) * gini(right_hist, n_right)) /
                                        static_cast<double>(total);
                const double decrease = parent_gini - weighted;
                if (decrease > best_decrease) {
                    best_decrease = decrease;
                    best_feature = f;
                    best_threshold = threshold;
                }
            }
        }

        if (best_feature < 0) return make_leaf(std::move(hist));

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (const std::size_t r : rows) {
            if (value(r, static_cast<std::size_t>(best_feature)) < best_threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        rows.clear();
        rows.shrink_to_fit();

        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_idx)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_idx)].threshold = best_threshold;
        const int left = build(left_rows, depth + 1);
        const int right = build(right_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_idx)].left = left;
        tree.nodes[static_cast<std::size_t>(node_idx)].right = right;
        return node_idx;
    }

    int make_leaf(std::vector<std::int64_t>&& hist) {
        const int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(idx)].histogram = std::move(hist);
        return idx;
    }
};

int tree_predict(const DecisionTree& tree, std::span<const double> row) {
    const TreeNode* node = &tree.nodes[0];
    while (node->feature >= 0) {
        node = row[static_cast<std::size_t>(node->feature)] < node->threshold
                   ? &tree.nodes[static_cast<std::size_t>(node->left)]
                   : &tree.nodes[static_cast<std::size_t>(node->right)];
    }
    int best = 0;
    for (std::size_t c = 1; c < node->histogram.size(); ++c) {
        if (node->histogram[c] > node->histogram[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(c);
        }
    }
    return best;
}

int resolve_subset_size(int features_per_split, std::size_t d) {
    if (features_per_split == 0) {
        return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
    }
    if (features_per_split == -1) {
        return std::max<int>(1, static_cast<int>(d) / 3);
    }
    if (features_per_split < -1) throw std::invalid_argument("bad features_per_split");
    return features_per_split;
}

}  // namespace

ForestModel fit_forest(const FeatureMatrix& X, const std::vector<int>& y,
                       const ForestParams& params, std::uint64_t seed) {
    if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("fit_forest: empty matrix");
    if (X.rows() != y.size()) throw std::invalid_argument("fit_forest: rows and labels differ");
    if (X.rows() < 2) throw std::invalid_argument("fit_forest: need at least 2 rows");
    if (params.n_trees < 1 || params.min_leaf < 1) throw std::invalid_argument("fit_forest: bad params");

    ForestModel model;
    model.params = params;
    model.seed = seed;
    model.columns = X.columns;
    model.class_labels = y;
    std::sort(model.class_labels.begin(), model.class_labels.end());
    model.class_labels.erase(std::unique(model.class_labels.begin(), model.class_labels.end()),
                             model.class_labels.end());
    if (model.class_labels.size() < 2) {
        throw std::invalid_argument("fit_forest: need at least 2 distinct classes");
    }

    const std::vector<std::size_t> order = canonical_order(X.row_ids);
    const std::size_t n = X.rows();
    const std::size_t cols = X.cols();
    std::vector<double> Xc(n * cols);
    std::vector<int> yc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = X.row(order[i]);
        std::copy(src.begin(), src.end(), Xc.begin() + static_cast<std::ptrdiff_t>(i * cols));
        const auto it = std::lower_bound(model.class_labels.begin(), model.class_labels.end(),
                                         y[order[i]]);
        yc[i] = static_cast<int>(it - model.class_labels.begin());
    }

    const int subset = resolve_subset_size(params.features_per_split, cols);
    model.trees.resize(static_cast<std::size_t>(params.n_trees));
    const auto n_trees = static_cast<std::int64_t>(params.n_trees);
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads())
    for (std::int64_t t = 0; t < n_trees; ++t) {
        Rng rng(seed + static_cast<std::uint64_t>(t));
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));  // bootstrap
        TreeBuilder builder{Xc, cols, yc, model.class_labels.size(), params, subset, rng, {}};
        builder.tree.nodes.reserve(64);
        builder.build(rows, 0);
        model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    }
    return model;
}

std::vector<int> predict_forest(const ForestModel& model, const FeatureMatrix& X) {
    if (X.columns != model.columns) {
        throw std::invalid_argument("predict_forest: feature columns do not match training schema");
    }
    const std::size_t n = X.rows();
    std::vector<int> out(n, 0);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(resolve_threads())
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        std::vector<std::int64_t> votes(model.class_labels.size(), 0);
        for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree_predict(tree, X.row(u)))];
        int best = 0;
        for (std::size_t c = 1; c < votes.size(); ++c) {
            if (votes[c] > votes[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
        }
        out[u] = model.class_labels[static_cast<std::size_t>(best)];
    }
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

GridSearchResult grid_search(const FeatureMatrix& X, const std::vector<int>& y,
                             const std::vector<ForestParams>& grid, int folds,
                             std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    if (folds < 2) throw std::invalid_argument("grid_search: folds must be >= 2");
    if (X.rows() != y.size()) throw std::invalid_argument("grid_search: rows and labels differ");

    // stratified fold assignment on canonically sorted rows
    const std::vector<std::size_t> order = canonical_order(X.row_ids);
    std::vector<int> classes(y);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    Rng rng(seed);
    std::vector<int> fold_of(X.rows(), -1);
    for (const int cls : classes) {
        std::vector<std::size_t> members;
        for (const std::size_t idx : order) {
            if (y[idx] == cls) members.push_back(idx);
        }
        if (members.size() < static_cast<std::size_t>(folds)) {
            throw std::invalid_argument("grid_search: fold count exceeds smallest class count");
        }
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i) {
            fold_of[members[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
        }
    }

    auto subset = [&](const std::vector<char>& take) {
        FeatureMatrix sub;
        sub.columns = X.columns;
        std::vector<int> labels;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            if (!take[i]) continue;
            sub.row_ids.push_back(X.row_ids[i]);
            const auto row = X.row(i);
            sub.values.insert(sub.values.end(), row.begin(), row.end());
            labels.push_back(y[i]);
        }
        return std::make_pair(sub, labels);
    };

    GridSearchResult result;
    result.mean_accuracies.reserve(grid.size());
    double best = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<char> train_take(X.rows());
            std::vector<char> test_take(X.rows());
            for (std::size_t i = 0; i < X.rows(); ++i) {
                train_take[i] = fold_of[i] != f;
                test_take[i] = fold_of[i] == f;
            }
            const auto [train_X, train_y] = subset(train_take);
            const auto [test_X, test_y] = subset(test_take);
            const ForestModel model = fit_forest(train_X, train_y, grid[g],
                                                 seed + static_cast<std::uint64_t>(f));
            const std::vector<int> pred = predict_forest(model, test_X);
            acc_sum += accuracy(pred, test_y);
        }
        const double mean_acc = acc_sum / static_cast<double>(folds);
        result.mean_accuracies.push_back(mean_acc);
        if (mean_acc > best) {
            best = mean_acc;
            result.best = grid[g];
            result.best_accuracy = mean_acc;
        }
    }
    return result;
}

void save_forest(const ForestModel& model, const std::string& path, const std::string& fingerprint,
                 std::uint64_t seed) {
    OutputFile out(path, fingerprint, seed);
    out.line("popdyn_forest 1");
    std::string cols;
    for (std::size_t i = 0; i < model.columns.size(); ++i) {
        if (i > 0) cols.push_back('\x1f');
        cols += model.columns[i];
    }
    out.line("schema_hash " + to_hex(fnv1a64(cols)));
    std::string cols_line = "columns";
    for (const auto& c : model.columns) cols_line += " " + c;
    out.line(cols_line);
    std::string class_line = "classes";
    for (const int c : model.class_labels) class_line += " " + format_int(c);
    out.line(class_line);
    out.line("params " + format_int(model.params.n_trees) + " " + format_int(model.params.max_depth) +
             " " + format_int(model.params.min_leaf) + " " + format_int(model.params.features_per_split) +
             " " + format_int(static_cast<std::int64_t>(model.seed)));
    out.line("trees " + format_int(static_cast<std::int64_t>(model.trees.size())));
    for (const auto& tree : model.trees) {
        out.line("tree " + format_int(static_cast<std::int64_t>(tree.nodes.size())));
        for (const auto& node : tree.nodes) {
            if (node.feature >= 0) {
                out.line("s " + format_int(node.feature) + " " + format_double(node.threshold) + " " +
                         format_int(node.left) + " " + format_int(node.right));
            } else {
                std::string line = "l";
                for (const std::int64_t h : node.histogram) line += " " + format_int(h);
                out.line(line);
            }
        }
    }
    out.line("end");
    out.commit();
}

ForestModel load_forest(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    auto next_line = [&]() -> std::string {
        while (std::getline(in, line)) {
            if (!line.empty() && line.front() == '#') continue;
            return line;
        }
        throw std::runtime_error("truncated forest model file: " + path);
    };

    if (next_line() != "popdyn_forest 1") {
        throw std::runtime_error("not a popdyn forest model (or wrong version): " + path);
    }
    ForestModel model;
    std::string stored_hash;
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key >> stored_hash;
        if (key != "schema_hash") throw std::runtime_error("malformed forest model: " + path);
    }
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key;
        if (key != "columns") throw std::runtime_error("malformed forest model: " + path);
        std::string col;
        while (ls >> col) model.columns.push_back(col);
    }
    std::string cols;
    for (std::size_t i = 0; i < model.columns.size(); ++i) {
        if (i > 0) cols.push_back('\x1f');
        cols += model.columns[i];
    }
    if (to_hex(fnv1a64(cols)) != stored_hash) {
        throw std::runtime_error("forest model schema hash mismatch: " + path);
    }
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key;
        if (key != "classes") throw std::runtime_error("malformed forest model: " + path);
        int c = 0;
        while (ls >> c) model.class_labels.push_back(c);
    }
    {
        std::istringstream ls(next_line());
        std::string key;
        std::int64_t seed = 0;
        ls >> key >> model.params.n_trees >> model.params.max_depth >> model.params.min_leaf >>
            model.params.features_per_split >> seed;
        if (key != "params" || !ls) throw std::runtime_error("malformed forest model: " + path);
        model.seed = static_cast<std::uint64_t>(seed);
    }
    std::size_t n_trees = 0;
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key >> n_trees;
        if (key != "trees" || !ls) throw std::runtime_error("malformed forest model: " + path);
    }
    model.trees.resize(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::istringstream ls(next_line());
        std::string key;
        std::size_t n_nodes = 0;
        ls >> key >> n_nodes;
        if (key != "tree" || !ls) throw std::runtime_error("malformed forest model: " + path);
        auto& tree = model.trees[t];
        tree.nodes.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            std::istringstream ns(next_line());
            std::string kind;
            ns >> kind;
            if (kind == "s") {
                ns >> tree.nodes[i].feature >> tree.nodes[i].threshold >> tree.nodes[i].left >>
                    tree.nodes[i].right;
                if (!ns) throw std::runtime_error("malformed forest node: " + path);
            } else if (kind == "l") {
                std::int64_t h = 0;
                while (ns >> h) tree.nodes[i].histogram.push_back(h);
                if (tree.nodes[i].histogram.size() != model.class_labels.size()) {
                    throw std::runtime_error("malformed forest leaf: " + path);
                }
            } else {
                throw std::runtime_error("malformed forest node: " + path);
            }
        }
    }
    if (next_line() != "end") throw std::runtime_error("malformed forest model: " + path);
    return model;
}

}  // namespace popdyn
