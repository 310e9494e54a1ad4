#include "popdyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace popdyn {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // 1-based ranks i+1..j+1 share the mean of the span
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("spearman: need at least 2 observations");
    auto constant = [](std::span<const double> v) {
        for (const double e : v) {
            if (e != v[0]) return false;
        }
        return true;
    };
    if (constant(x) || constant(y)) {
        throw std::invalid_argument("spearman is undefined for constant input");
    }
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    // Pearson on the ranks
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += rx[i];
        mean_y += ry[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double cov = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean_x;
        const double dy = ry[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    return cov / std::sqrt(var_x * var_y);
}

double per_image_rmse(const EngagementSequence& pred, const EngagementSequence& actual) {
    if (!pred.repaired() || !actual.repaired()) {
        throw std::invalid_argument("per_image_rmse requires repaired sequences");
    }
    double acc = 0.0;
    for (int t = 0; t < kDays; ++t) {
        const double diff = static_cast<double>(pred.values[static_cast<std::size_t>(t)] -
                                                actual.values[static_cast<std::size_t>(t)]);
        acc += diff * diff;
    }
    return std::sqrt(acc / static_cast<double>(kDays));
}

double trimmed_rmse(std::span<const double> errors, double trim) {
    if (errors.empty()) throw std::invalid_argument("trimmed_rmse: empty input");
    if (!(trim >= 0.0) || trim >= 0.5) throw std::invalid_argument("trimmed_rmse: trim must be in [0, 0.5)");
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(sorted.size())));
    double acc = 0.0;
    for (std::size_t i = cut; i < sorted.size() - cut; ++i) acc += sorted[i];
    return acc / static_cast<double>(sorted.size() - 2 * cut);
}

double median_rmse(std::span<const double> errors) {
    if (errors.empty()) throw std::invalid_argument("median_rmse: empty input");
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace popdyn
