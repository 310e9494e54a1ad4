#include "popdyn/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "popdyn/csv.hpp"
#include "popdyn/dynamics.hpp"
#include "popdyn/evaluation.hpp"
#include "popdyn/hash.hpp"
#include "popdyn/kernels.hpp"
#include "popdyn/metrics.hpp"
#include "popdyn/parallel.hpp"

namespace popdyn {

Standardizer standardize_fit(const FeatureMatrix& X) {
    if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("standardize_fit: empty matrix");
    Standardizer stats;
    stats.input_columns = X.columns;
    const auto n = static_cast<double>(X.rows());
    for (std::size_t c = 0; c < X.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < X.rows(); ++r) mean += X.at(r, c);
        mean /= n;
        double var = 0.0;
        for (std::size_t r = 0; r < X.rows(); ++r) {
            const double d = X.at(r, c) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / n);
        if (sd > 0.0) {
            stats.kept_indices.push_back(c);
            stats.kept_columns.push_back(X.columns[c]);
            stats.means.push_back(mean);
            stats.stds.push_back(sd);
        } else {
            stats.dropped_columns.push_back(X.columns[c]);
        }
    }
    if (stats.kept_columns.empty()) {
        throw std::invalid_argument("standardize_fit: every column is constant");
    }
    return stats;
}

FeatureMatrix standardize_apply(const FeatureMatrix& X, const Standardizer& stats) {
    if (X.columns != stats.input_columns) {
        throw std::invalid_argument("standardize_apply: columns do not match fit schema");
    }
    FeatureMatrix out;
    out.row_ids = X.row_ids;
    out.columns = stats.kept_columns;
    out.values.reserve(X.rows() * stats.kept_columns.size());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t j = 0; j < stats.kept_indices.size(); ++j) {
            out.values.push_back((X.at(r, stats.kept_indices[j]) - stats.means[j]) / stats.stds[j]);
        }
    }
    return out;
}

namespace {

// Kernel access with a cached Gram matrix at desk scale and on-the-fly rows
// beyond it.
class KernelTable {
public:
    KernelTable(kernels::KernelKind kind, const std::vector<double>& X, std::size_t n,
                std::size_t d, double gamma)
        : kind_(kind), X_(X), n_(n), d_(d), gamma_(gamma) {
        if (n_ <= 10000) {
            cache_.resize(n_ * n_);
            kernels::gram_omp(kind_, X_.data(), n_, d_, gamma_, cache_.data(), resolve_threads());
        }
        row_.resize(n_);
    }

    // row i of the Gram matrix, valid until the next row() call
    const double* row(std::size_t i) {
        if (!cache_.empty()) return cache_.data() + i * n_;
        for (std::size_t j = 0; j < n_; ++j) {
            row_[j] = kernels::kernel_eval(kind_, X_.data() + i * d_, X_.data() + j * d_, d_, gamma_);
        }
        return row_.data();
    }

    double diag(std::size_t i) {
        if (!cache_.empty()) return cache_[i * n_ + i];
        return kernels::kernel_eval(kind_, X_.data() + i * d_, X_.data() + i * d_, d_, gamma_);
    }

private:
    kernels::KernelKind kind_;
    const std::vector<double>& X_;
    std::size_t n_;
    std::size_t d_;
    double gamma_;
    std::vector<double> cache_;
    std::vector<double> row_;
};

// SMO over the 2n-variable dual: theta = (alpha, alpha*), signs z = (+1, -1),
// box [0, C], constraint sum(z*theta) = 0. Gradients in terms of
// f_i = sum_j beta_j K_ij:
//   G(alpha_i)  =  f_i + eps - y_i
//   G(alpha*_i) = -f_i + eps + y_i
// The max-violating pair is updated analytically until the KKT gap drops
// below tol. The primal bias is the negated midpoint of the multiplier range.
struct SmoResult {
    std::vector<double> beta;
    double bias = 0.0;
    int iterations = 0;
};

SmoResult solve_smo(KernelTable& K, const std::vector<double>& y, double C, double eps, double tol,
                    std::int64_t max_iterations) {
    const std::size_t n = y.size();
    std::vector<double> theta(2 * n, 0.0);
    std::vector<double> beta(n, 0.0);
    std::vector<double> f(n, 0.0);

    auto gradient = [&](std::size_t t) {
        return t < n ? f[t] + eps - y[t] : -f[t - n] + eps + y[t - n];
    };
    auto sign_of = [&](std::size_t t) { return t < n ? 1.0 : -1.0; };

    SmoResult res;
    std::int64_t iter = 0;
    double b_low = 0.0;
    double b_up = 0.0;
    for (; iter < max_iterations; ++iter) {
        // bounds on the equality multiplier implied by the current point
        b_low = -std::numeric_limits<double>::infinity();
        b_up = std::numeric_limits<double>::infinity();
        std::size_t p = 2 * n;
        std::size_t q = 2 * n;
        for (std::size_t t = 0; t < 2 * n; ++t) {
            const double g = gradient(t);
            const double z = sign_of(t);
            const double v = z > 0 ? g : -g;
            const bool at_zero = theta[t] <= 0.0;
            const bool at_cap = theta[t] >= C;
            // lower bound when the variable can decrease its z-contribution
            if ((z > 0 && !at_zero) || (z < 0 && !at_cap)) {
                if (v > b_low) {
                    b_low = v;
                    p = t;
                }
            }
            if ((z > 0 && !at_cap) || (z < 0 && !at_zero)) {
                if (v < b_up) {
                    b_up = v;
                    q = t;
                }
            }
        }
        if (p >= 2 * n || q >= 2 * n || b_low - b_up <= tol) break;

        const std::size_t i = p < n ? p : p - n;
        const std::size_t j = q < n ? q : q - n;
        const double zp = sign_of(p);
        const double zq = sign_of(q);
        const double zz = zp * zq;

        // feasible range for the change in theta[p]
        double lo = -theta[p];
        double hi = C - theta[p];
        if (zz > 0) {
            lo = std::max(lo, theta[q] - C);
            hi = std::min(hi, theta[q]);
        } else {
            lo = std::max(lo, -theta[q]);
            hi = std::min(hi, C - theta[q]);
        }

        const double g0 = gradient(p) - zz * gradient(q);
        const double* ki = K.row(i);
        const double kij = ki[j];
        const double eta = K.diag(i) + K.diag(j) - 2.0 * kij;
        double step;
        if (eta > 1e-12) {
            step = std::clamp(-g0 / eta, lo, hi);
        } else {
            step = g0 > 0 ? lo : hi;  // linear piece: walk to the box edge
        }
        if (step == 0.0) break;  // numerically stuck; the gap is at tolerance scale

        theta[p] += step;
        const double step_q = -zz * step;
        theta[q] += step_q;
        theta[p] = std::clamp(theta[p], 0.0, C);
        theta[q] = std::clamp(theta[q], 0.0, C);

        const double dbeta_i = zp * step;
        const double dbeta_j = zq * step_q;
        beta[i] += dbeta_i;
        beta[j] += dbeta_j;
        if (i == j) {
            for (std::size_t v = 0; v < n; ++v) f[v] += (dbeta_i + dbeta_j) * ki[v];
        } else {
            for (std::size_t v = 0; v < n; ++v) f[v] += dbeta_i * ki[v];
            const double* kj = K.row(j);
            for (std::size_t v = 0; v < n; ++v) f[v] += dbeta_j * kj[v];
        }
    }

    res.beta = std::move(beta);
    // primal bias: dual multiplier negated (interior alpha_i gives
    // b_dual = f_i + eps - y_i = -(y_i - f_i - eps))
    if (std::isfinite(b_low) && std::isfinite(b_up)) {
        res.bias = -0.5 * (b_low + b_up);
    } else if (std::isfinite(b_low)) {
        res.bias = -b_low;
    } else if (std::isfinite(b_up)) {
        res.bias = -b_up;
    }
    res.iterations = static_cast<int>(iter);
    return res;
}

std::vector<std::size_t> canonical_order(const std::vector<std::string>& ids) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    return order;
}

}  // namespace

SvrModel fit_svr(const FeatureMatrix& X, const std::vector<double>& y, const SvrParams& params,
                 std::uint64_t seed) {
    if (X.rows() < 2) throw std::invalid_argument("fit_svr: need at least 2 rows");
    if (X.rows() != y.size()) throw std::invalid_argument("fit_svr: rows and targets differ");
    if (!(params.C > 0.0)) throw std::invalid_argument("fit_svr: C must be > 0");
    if (params.epsilon < 0.0) throw std::invalid_argument("fit_svr: epsilon must be >= 0");
    for (const double v : X.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("fit_svr: non-finite feature value");
    }
    for (const double t : y) {
        if (!std::isfinite(t) || t < 0.0) {
            throw std::invalid_argument("fit_svr: targets must be finite and >= 0");
        }
    }

    const std::vector<std::size_t> order = canonical_order(X.row_ids);
    FeatureMatrix Xc;
    Xc.columns = X.columns;
    std::vector<double> yc(y.size());
    Xc.row_ids.reserve(X.rows());
    Xc.values.reserve(X.values.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        Xc.row_ids.push_back(X.row_ids[order[i]]);
        const auto row = X.row(order[i]);
        Xc.values.insert(Xc.values.end(), row.begin(), row.end());
        yc[i] = params.log_transform ? std::log1p(y[order[i]]) : y[order[i]];
    }

    SvrModel model;
    model.params = params;
    model.seed = seed;
    model.standardizer = standardize_fit(Xc);
    const FeatureMatrix Z = standardize_apply(Xc, model.standardizer);
    const std::size_t n = Z.rows();
    const std::size_t d = Z.cols();
    model.gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(d);

    const auto kind = params.kernel == SvrKernel::kLinear ? kernels::KernelKind::kLinear
                                                          : kernels::KernelKind::kRbf;
    KernelTable table(kind, Z.values, n, d, model.gamma);
    const std::int64_t cap = static_cast<std::int64_t>(params.max_passes) * static_cast<std::int64_t>(n);
    SmoResult smo = solve_smo(table, yc, params.C, params.epsilon, params.tol, cap);

    model.bias = smo.bias;
    model.dual_coefficients = smo.beta;
    for (std::size_t i = 0; i < n; ++i) {
        if (smo.beta[i] != 0.0) {
            const auto row = Z.row(i);
            model.support_x.insert(model.support_x.end(), row.begin(), row.end());
            model.support_beta.push_back(smo.beta[i]);
        }
    }
    return model;
}

namespace {

std::vector<double> raw_kernel_output(const SvrModel& model, const FeatureMatrix& X) {
    if (X.columns != model.standardizer.input_columns) {
        throw std::invalid_argument("predict: feature columns do not match training schema");
    }
    const FeatureMatrix Z = standardize_apply(X, model.standardizer);
    std::vector<double> out(Z.rows(), 0.0);
    const auto kind = model.params.kernel == SvrKernel::kLinear ? kernels::KernelKind::kLinear
                                                                : kernels::KernelKind::kRbf;
    kernels::kernel_expand_omp(kind, model.support_x.data(), model.support_beta.size(), Z.cols(),
                               model.support_beta.data(), model.bias, model.gamma, Z.values.data(),
                               Z.rows(), out.data(), resolve_threads());
    return out;
}

}  // namespace

std::vector<double> predict_raw(const SvrModel& model, const FeatureMatrix& X) {
    std::vector<double> out = raw_kernel_output(model, X);
    if (model.params.log_transform) {
        for (auto& v : out) v = std::expm1(v);
    }
    return out;
}

std::vector<std::int64_t> predict_scale(const SvrModel& model, const FeatureMatrix& X) {
    const std::vector<double> raw = predict_raw(model, X);
    std::vector<std::int64_t> out(raw.size(), 0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = raw[i] <= 0.0 ? 0 : std::llround(raw[i]);
    }
    return out;
}

void save_svr(const SvrModel& model, const std::string& path, const std::string& fingerprint,
              std::uint64_t seed) {
    OutputFile out(path, fingerprint, seed);
    out.line("popdyn_svr 1");
    std::string cols;
    for (std::size_t i = 0; i < model.standardizer.input_columns.size(); ++i) {
        if (i > 0) cols.push_back('\x1f');
        cols += model.standardizer.input_columns[i];
    }
    out.line("schema_hash " + to_hex(fnv1a64(cols)));
    auto name_list = [](const std::vector<std::string>& names) {
        std::string s;
        for (const auto& n : names) s += " " + n;
        return s;
    };
    out.line("columns" + name_list(model.standardizer.input_columns));
    out.line("kept" + name_list(model.standardizer.kept_columns));
    out.line("dropped" + name_list(model.standardizer.dropped_columns));
    std::string means = "means";
    for (const double m : model.standardizer.means) means += " " + format_double(m);
    out.line(means);
    std::string stds = "stds";
    for (const double s : model.standardizer.stds) stds += " " + format_double(s);
    out.line(stds);
    out.line("params kernel=" + std::string(model.params.kernel == SvrKernel::kLinear ? "linear" : "rbf") +
             " C=" + format_double(model.params.C) + " epsilon=" + format_double(model.params.epsilon) +
             " gamma=" + format_double(model.gamma) + " transform=" +
             (model.params.log_transform ? "log1p" : "identity") +
             " bias=" + format_double(model.bias) + " seed=" + format_int(static_cast<std::int64_t>(seed)));
    out.line("support " + format_int(static_cast<std::int64_t>(model.support_beta.size())));
    const std::size_t d = model.standardizer.kept_columns.size();
    for (std::size_t s = 0; s < model.support_beta.size(); ++s) {
        std::string line = format_double(model.support_beta[s]);
        for (std::size_t c = 0; c < d; ++c) {
            line += " " + format_double(model.support_x[s * d + c]);
        }
        out.line(line);
    }
    out.line("end");
    out.commit();
}

SvrModel load_svr(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    auto next_line = [&]() -> std::string {
        while (std::getline(in, line)) {
            if (!line.empty() && line.front() == '#') continue;
            return line;
        }
        throw std::runtime_error("truncated svr model file: " + path);
    };
    if (next_line() != "popdyn_svr 1") {
        throw std::runtime_error("not a popdyn svr model (or wrong version): " + path);
    }
    SvrModel model;
    std::string stored_hash;
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key >> stored_hash;
        if (key != "schema_hash") throw std::runtime_error("malformed svr model: " + path);
    }
    auto read_names = [&](const std::string& expect) {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key;
        if (key != expect) throw std::runtime_error("malformed svr model: " + path);
        std::vector<std::string> names;
        std::string name;
        while (ls >> name) names.push_back(name);
        return names;
    };
    model.standardizer.input_columns = read_names("columns");
    model.standardizer.kept_columns = read_names("kept");
    model.standardizer.dropped_columns = read_names("dropped");
    std::string cols;
    for (std::size_t i = 0; i < model.standardizer.input_columns.size(); ++i) {
        if (i > 0) cols.push_back('\x1f');
        cols += model.standardizer.input_columns[i];
    }
    if (to_hex(fnv1a64(cols)) != stored_hash) {
        throw std::runtime_error("svr model schema hash mismatch: " + path);
    }
    for (const auto& name : model.standardizer.kept_columns) {
        for (std::size_t c = 0; c < model.standardizer.input_columns.size(); ++c) {
            if (model.standardizer.input_columns[c] == name) {
                model.standardizer.kept_indices.push_back(c);
                break;
            }
        }
    }
    auto read_doubles = [&](const std::string& expect) {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key;
        if (key != expect) throw std::runtime_error("malformed svr model: " + path);
        std::vector<double> values;
        double v = 0.0;
        while (ls >> v) values.push_back(v);
        return values;
    };
    model.standardizer.means = read_doubles("means");
    model.standardizer.stds = read_doubles("stds");
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key;
        if (key != "params") throw std::runtime_error("malformed svr model: " + path);
        std::string kv;
        while (ls >> kv) {
            const auto pos = kv.find('=');
            if (pos == std::string::npos) throw std::runtime_error("malformed svr params: " + path);
            const std::string k = kv.substr(0, pos);
            const std::string v = kv.substr(pos + 1);
            if (k == "kernel") {
                model.params.kernel = v == "linear" ? SvrKernel::kLinear : SvrKernel::kRbf;
            } else if (k == "C") {
                model.params.C = parse_double(v);
            } else if (k == "epsilon") {
                model.params.epsilon = parse_double(v);
            } else if (k == "gamma") {
                model.gamma = parse_double(v);
                model.params.gamma = model.gamma;
            } else if (k == "transform") {
                model.params.log_transform = v == "log1p";
            } else if (k == "bias") {
                model.bias = parse_double(v);
            } else if (k == "seed") {
                model.seed = static_cast<std::uint64_t>(parse_int(v));
            } else {
                throw std::runtime_error("unknown svr param '" + k + "': " + path);
            }
        }
    }
    std::size_t m = 0;
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key >> m;
        if (key != "support" || !ls) throw std::runtime_error("malformed svr model: " + path);
    }
    const std::size_t d = model.standardizer.kept_columns.size();
    model.support_beta.reserve(m);
    model.support_x.reserve(m * d);
    for (std::size_t s = 0; s < m; ++s) {
        std::istringstream ls(next_line());
        double beta = 0.0;
        ls >> beta;
        model.support_beta.push_back(beta);
        for (std::size_t c = 0; c < d; ++c) {
            double v = 0.0;
            ls >> v;
            model.support_x.push_back(v);
        }
        if (!ls) throw std::runtime_error("malformed svr support row: " + path);
    }
    if (next_line() != "end") throw std::runtime_error("malformed svr model: " + path);
    model.dual_coefficients = model.support_beta;
    return model;
}

std::vector<FeatureSetScore> evaluate_feature_sets(
    const std::vector<ImageRecord>& records,
    const std::vector<std::vector<std::string>>& candidate_sets,
    const FeatureSetProtocol& protocol) {
    if (candidate_sets.empty()) throw std::invalid_argument("evaluate_feature_sets: no candidate sets");

    // repair + decompose once; actual scale is the regression target
    std::vector<ImageRecord> repaired(records);
    for (auto& rec : repaired) rec.sequence = repair_sequence(rec.sequence);
    std::vector<double> scales(repaired.size(), 0.0);
    for (std::size_t i = 0; i < repaired.size(); ++i) {
        scales[i] = static_cast<double>(decompose(repaired[i].sequence).scale.value);
    }

    const std::vector<SplitPlan> plan =
        split_runs(repaired, protocol.train_fraction, protocol.runs, protocol.master_seed);

    std::vector<double> rho_sums(candidate_sets.size(), 0.0);
    for (std::size_t r = 0; r < plan.size(); ++r) {
        std::vector<std::size_t> train_idx;
        std::vector<std::size_t> test_idx;
        for (std::size_t i = 0; i < repaired.size(); ++i) {
            const auto& ids = plan[r].train_ids;
            const bool in_train = std::binary_search(ids.begin(), ids.end(), repaired[i].image_id);
            (in_train ? train_idx : test_idx).push_back(i);
        }
        std::vector<ImageRecord> train;
        train.reserve(train_idx.size());
        for (const auto i : train_idx) train.push_back(repaired[i]);
        std::vector<ImageRecord> test;
        test.reserve(test_idx.size());
        for (const auto i : test_idx) test.push_back(repaired[i]);

        const ImputeStats medians = fit_impute(train);
        apply_impute(train, medians);
        apply_impute(test, medians);

        std::vector<double> y_train;
        y_train.reserve(train_idx.size());
        for (const auto i : train_idx) y_train.push_back(scales[i]);
        std::vector<double> y_test;
        y_test.reserve(test_idx.size());
        for (const auto i : test_idx) y_test.push_back(scales[i]);

        for (std::size_t s = 0; s < candidate_sets.size(); ++s) {
            const FeatureMatrix X_train =
                build_feature_matrix(train, candidate_sets[s], protocol.tag_dims);
            const FeatureMatrix X_test =
                build_feature_matrix(test, candidate_sets[s], protocol.tag_dims);
            const SvrModel model = fit_svr(X_train, y_train, protocol.svr,
                                           protocol.master_seed + r);
            const std::vector<double> pred = predict_raw(model, X_test);
            rho_sums[s] += spearman(pred, y_test);
        }
    }

    std::vector<FeatureSetScore> table(candidate_sets.size());
    for (std::size_t s = 0; s < candidate_sets.size(); ++s) {
        table[s].features = candidate_sets[s];
        table[s].mean_spearman = rho_sums[s] / static_cast<double>(plan.size());
    }
    std::stable_sort(table.begin(), table.end(), [](const FeatureSetScore& a, const FeatureSetScore& b) {
        return a.mean_spearman > b.mean_spearman;
    });
    return table;
}

}  // namespace popdyn
