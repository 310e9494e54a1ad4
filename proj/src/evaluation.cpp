#include "popdyn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "popdyn/csv.hpp"
#include "popdyn/dynamics.hpp"
#include "popdyn/hash.hpp"
#include "popdyn/metrics.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {

std::vector<SplitPlan> split_runs(const std::vector<ImageRecord>& records, double train_fraction,
                                  int runs, std::uint64_t master_seed) {
    if (records.size() < 2) throw std::invalid_argument("split_runs: need at least 2 records");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split_runs: train_fraction must be in (0,1)");
    }
    if (runs < 1) throw std::invalid_argument("split_runs: runs must be >= 1");

    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& rec : records) ids.push_back(rec.image_id);
    std::sort(ids.begin(), ids.end());

    const auto n = ids.size();
    const auto n_train = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(n)));
    if (n_train >= n) {
        throw std::invalid_argument("split_runs: train_fraction leaves an empty test partition");
    }

    std::vector<SplitPlan> plan(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        std::vector<std::string> shuffled(ids);
        Rng rng(master_seed + static_cast<std::uint64_t>(r));
        rng.shuffle(shuffled);
        auto& split = plan[static_cast<std::size_t>(r)];
        split.train_ids.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test_ids.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
        std::sort(split.train_ids.begin(), split.train_ids.end());
        std::sort(split.test_ids.begin(), split.test_ids.end());
    }
    return plan;
}

std::vector<std::string> classifier_feature_set(int tag_dims) {
    std::vector<std::string> features;
    for (const auto& name : social_feature_names()) features.emplace_back(name);
    features.emplace_back("num_tags");
    for (int b = 0; b < tag_dims; ++b) features.push_back(tag_column_name(b, tag_dims));
    return features;
}

namespace {

std::vector<ImageRecord> select_records(const std::vector<ImageRecord>& records,
                                        const std::vector<std::string>& ids) {
    std::unordered_map<std::string_view, std::size_t> index;
    index.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].image_id, i);
    std::vector<ImageRecord> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = index.find(id);
        if (it == index.end()) throw std::invalid_argument("split references unknown image_id '" + id + "'");
        out.push_back(records[it->second]);
    }
    return out;
}

// shape_area with the degenerate case mapped to 0 (pipeline feature column)
double area_or_zero(const ShapeVector& shape) {
    return shape.degenerate ? 0.0 : shape_area(shape);
}

}  // namespace

RunArtifacts run_evaluation_once(const std::vector<ImageRecord>& records, const SplitPlan& split,
                                 const PipelineConfig& config, int run_index) {
    const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(run_index);

    std::vector<ImageRecord> train = select_records(records, split.train_ids);
    std::vector<ImageRecord> test = select_records(records, split.test_ids);
    for (auto& rec : train) rec.sequence = repair_sequence(rec.sequence);
    for (auto& rec : test) rec.sequence = repair_sequence(rec.sequence);

    RunArtifacts run;
    run.metrics.run_index = run_index;

    // preprocessing statistics come from the training partition only
    run.impute = fit_impute(train);
    apply_impute(train, run.impute);
    apply_impute(test, run.impute);

    std::vector<Decomposition> train_parts(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) train_parts[i] = decompose(train[i].sequence);
    std::vector<Decomposition> test_parts(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) test_parts[i] = decompose(test[i].sequence);

    // shape prototypes from the non-degenerate training shapes
    std::vector<ShapeVector> train_shapes;
    std::vector<std::size_t> train_shape_idx;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (!train_parts[i].shape.degenerate) {
            train_shapes.push_back(train_parts[i].shape);
            train_shape_idx.push_back(i);
        }
    }
    if (train_shapes.empty()) {
        throw std::runtime_error("no non-degenerate training shapes to cluster");
    }
    const auto& cl = config.clustering;
    if (cl.method == ClusterMethod::kKMeans) {
        KmeansOptions opts;
        opts.restarts = cl.restarts;
        opts.max_iter = cl.max_iter;
        opts.tol = cl.tol;
        run.shape_model = kmeans(train_shapes, cl.k, run_seed, opts);
    } else {
        MeanShiftOptions opts;
        opts.max_iter = cl.max_iter;
        opts.tol = cl.tol;
        run.shape_model = mean_shift(train_shapes, cl.bandwidth, run_seed, opts);
    }

    // shape classifier on social features
    const std::vector<std::string> cls_features = classifier_feature_set(config.tag_dims);
    std::vector<ImageRecord> cls_train;
    cls_train.reserve(train_shape_idx.size());
    for (const auto i : train_shape_idx) cls_train.push_back(train[i]);
    FeatureMatrix X_cls = build_feature_matrix(cls_train, cls_features, config.tag_dims);
    if (config.evaluation.use_shape_area) {
        std::vector<double> areas;
        areas.reserve(train_shape_idx.size());
        for (const auto i : train_shape_idx) areas.push_back(area_or_zero(train_parts[i].shape));
        append_column(X_cls, "shape_area", areas);
    }
    run.classifier_params = config.classifier.grid.front();
    if (config.classifier.grid.size() > 1) {
        run.classifier_params = grid_search(X_cls, run.shape_model.labels, config.classifier.grid,
                                            config.classifier.folds, run_seed)
                                    .best;
    }
    const ForestModel forest = fit_forest(X_cls, run.shape_model.labels, run.classifier_params, run_seed);

    // scale regressor on all training rows (degenerate rows keep target 0)
    FeatureMatrix X_reg = build_feature_matrix(train, config.regressor_features, config.tag_dims);
    std::vector<double> y_reg(train.size(), 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        y_reg[i] = static_cast<double>(train_parts[i].scale.value);
    }
    const SvrModel svr = fit_svr(X_reg, y_reg, config.regressor, run_seed);
    run.standardizer = svr.standardizer;

    // test-side prediction: label -> prototype shape, scale -> recompose
    FeatureMatrix X_cls_test = build_feature_matrix(test, cls_features, config.tag_dims);
    if (config.evaluation.use_shape_area) {
        std::vector<double> areas;
        areas.reserve(test.size());
        for (const auto& part : test_parts) areas.push_back(area_or_zero(part.shape));
        append_column(X_cls_test, "shape_area", areas);
    }
    const std::vector<int> pred_labels = predict_forest(forest, X_cls_test);
    const FeatureMatrix X_reg_test = build_feature_matrix(test, config.regressor_features, config.tag_dims);
    const std::vector<double> pred_scale_raw = predict_raw(svr, X_reg_test);

    std::vector<double> errors(test.size(), 0.0);
    std::vector<double> actual_scales(test.size(), 0.0);
    run.predictions.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int label = pred_labels[i];
        const auto& proto = run.shape_model.prototypes[static_cast<std::size_t>(label)];
        ShapeVector shape;
        shape.values = proto;
        const double raw = pred_scale_raw[i];
        Scale scale;
        scale.value = raw <= 0.0 ? 0 : std::llround(raw);
        const EngagementSequence predicted = recompose(scale, shape);
        errors[i] = per_image_rmse(predicted, test[i].sequence);
        actual_scales[i] = static_cast<double>(test_parts[i].scale.value);
        run.predictions.push_back(PredictionRow{run_index, test[i].image_id, predicted,
                                                scale.value, label});
    }

    // classifier accuracy against nearest-prototype labels of the true shapes
    std::vector<ShapeVector> test_shapes;
    std::vector<std::size_t> test_shape_idx;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!test_parts[i].shape.degenerate) {
            test_shapes.push_back(test_parts[i].shape);
            test_shape_idx.push_back(i);
        }
    }
    if (test_shapes.empty()) {
        throw std::runtime_error("no non-degenerate test shapes; classifier accuracy undefined");
    }
    const std::vector<int> truth_labels = assign_to_prototypes(run.shape_model, test_shapes);
    std::vector<int> pred_on_shaped;
    pred_on_shaped.reserve(test_shape_idx.size());
    for (const auto i : test_shape_idx) pred_on_shaped.push_back(pred_labels[i]);

    // rank correlation on the continuous predictions (rounding would only
    // introduce ties; the monotone inverse transform preserves ranks)
    run.metrics.spearman_scale = spearman(pred_scale_raw, actual_scales);
    run.metrics.classifier_accuracy = accuracy(pred_on_shaped, truth_labels);
    run.metrics.trmse_25 = trimmed_rmse(errors, config.evaluation.trim);
    run.metrics.trmse_median = median_rmse(errors);
    run.metrics.rmse_mean = trimmed_rmse(errors, 0.0);
    return run;
}

EvaluationReport evaluate_pipeline(const std::vector<ImageRecord>& records,
                                   const PipelineConfig& config) {
    const std::vector<SplitPlan> plan = split_runs(records, config.evaluation.train_fraction,
                                                   config.evaluation.runs, config.seed);
    EvaluationReport report;
    report.config_fingerprint = config_fingerprint(config);
    report.per_run.reserve(plan.size());

    for (std::size_t r = 0; r < plan.size(); ++r) {
        try {
            RunArtifacts run = run_evaluation_once(records, plan[r], config, static_cast<int>(r));
            report.per_run.push_back(run.metrics);
            report.predictions.insert(report.predictions.end(), run.predictions.begin(),
                                      run.predictions.end());
        } catch (const std::exception& e) {
            throw std::runtime_error("run " + format_int(static_cast<std::int64_t>(r)) +
                                     " failed: " + e.what());
        }
    }

    auto& agg = report.aggregate;
    agg.run_index = -1;
    const auto n = static_cast<double>(report.per_run.size());
    for (const auto& m : report.per_run) {
        agg.spearman_scale += m.spearman_scale;
        agg.classifier_accuracy += m.classifier_accuracy;
        agg.trmse_25 += m.trmse_25;
        agg.trmse_median += m.trmse_median;
        agg.rmse_mean += m.rmse_mean;
    }
    agg.spearman_scale /= n;
    agg.classifier_accuracy /= n;
    agg.trmse_25 /= n;
    agg.trmse_median /= n;
    agg.rmse_mean /= n;
    return report;
}

std::vector<std::pair<std::string, std::string>> config_items(const PipelineConfig& config) {
    std::vector<std::pair<std::string, std::string>> items;
    items.emplace_back("dataset", config.dataset_path);
    items.emplace_back("output_dir", config.output_dir);
    items.emplace_back("seed", format_int(static_cast<std::int64_t>(config.seed)));
    items.emplace_back("threads", format_int(config.threads));
    items.emplace_back("preprocess.tag_dims", format_int(config.tag_dims));
    const auto& cl = config.clustering;
    items.emplace_back("clustering.method",
                       cl.method == ClusterMethod::kKMeans ? "kmeans" : "meanshift");
    items.emplace_back("clustering.k", format_int(cl.k));
    items.emplace_back("clustering.bandwidth", format_double(cl.bandwidth));
    items.emplace_back("clustering.restarts", format_int(cl.restarts));
    items.emplace_back("clustering.max_iter", format_int(cl.max_iter));
    items.emplace_back("clustering.tol", format_double(cl.tol));
    items.emplace_back("clustering.k_min", format_int(cl.k_min));
    items.emplace_back("clustering.k_max", format_int(cl.k_max));
    auto fps_text = [](int fps) -> std::string {
        if (fps == 0) return "sqrt";
        if (fps == -1) return "third";
        return format_int(fps);
    };
    auto join_ints = [&](auto&& get) {
        std::string s;
        for (std::size_t i = 0; i < config.classifier.grid.size(); ++i) {
            if (i > 0) s.push_back(',');
            s += get(config.classifier.grid[i]);
        }
        return s;
    };
    items.emplace_back("classifier.grid.n_trees",
                       join_ints([](const ForestParams& p) { return format_int(p.n_trees); }));
    items.emplace_back("classifier.grid.max_depth",
                       join_ints([](const ForestParams& p) { return format_int(p.max_depth); }));
    items.emplace_back("classifier.grid.min_leaf",
                       join_ints([](const ForestParams& p) { return format_int(p.min_leaf); }));
    items.emplace_back("classifier.grid.features_per_split",
                       join_ints([&](const ForestParams& p) { return fps_text(p.features_per_split); }));
    items.emplace_back("classifier.folds", format_int(config.classifier.folds));
    const auto& reg = config.regressor;
    items.emplace_back("regressor.kernel", reg.kernel == SvrKernel::kLinear ? "linear" : "rbf");
    items.emplace_back("regressor.C", format_double(reg.C));
    items.emplace_back("regressor.epsilon", format_double(reg.epsilon));
    items.emplace_back("regressor.gamma", format_double(reg.gamma));
    items.emplace_back("regressor.tol", format_double(reg.tol));
    items.emplace_back("regressor.max_passes", format_int(reg.max_passes));
    items.emplace_back("regressor.transform", reg.log_transform ? "log1p" : "identity");
    std::string reg_features;
    for (std::size_t i = 0; i < config.regressor_features.size(); ++i) {
        if (i > 0) reg_features.push_back(',');
        reg_features += config.regressor_features[i];
    }
    items.emplace_back("regressor.features", reg_features);
    for (std::size_t s = 0; s < config.candidate_sets.size(); ++s) {
        std::string joined;
        for (std::size_t i = 0; i < config.candidate_sets[s].size(); ++i) {
            if (i > 0) joined.push_back(',');
            joined += config.candidate_sets[s][i];
        }
        items.emplace_back("features.set." + format_int(static_cast<std::int64_t>(s + 1)), joined);
    }
    const auto& ev = config.evaluation;
    items.emplace_back("evaluation.train_fraction", format_double(ev.train_fraction));
    items.emplace_back("evaluation.runs", format_int(ev.runs));
    items.emplace_back("evaluation.trim", format_double(ev.trim));
    items.emplace_back("evaluation.use_shape_area", ev.use_shape_area ? "true" : "false");
    return items;
}

std::string config_fingerprint(const PipelineConfig& config) {
    std::string canonical;
    for (const auto& [key, value] : config_items(config)) {
        canonical += key;
        canonical.push_back('=');
        canonical += value;
        canonical.push_back('\n');
    }
    return to_hex(fnv1a64(canonical));
}

}  // namespace popdyn
