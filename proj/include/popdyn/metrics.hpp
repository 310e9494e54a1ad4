#ifndef POPDYN_METRICS_HPP
#define POPDYN_METRICS_HPP

#include <span>
#include <vector>

#include "popdyn/dataset.hpp"

namespace popdyn {

/// Average ranks (1-based); ties receive the mean of their rank span.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation: Pearson on average ranks. Rejects constant
/// inputs and lengths below 2.
double spearman(std::span<const double> x, std::span<const double> y);

/// Root mean squared day-wise error between two repaired sequences.
double per_image_rmse(const EngagementSequence& pred, const EngagementSequence& actual);

/// Sorts ascending, drops floor(trim*n) from each end, returns the mean of
/// the remainder (the interquartile mean at trim = 0.25).
double trimmed_rmse(std::span<const double> errors, double trim);

double median_rmse(std::span<const double> errors);

}  // namespace popdyn

#endif  // POPDYN_METRICS_HPP
