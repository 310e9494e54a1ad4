#ifndef POPDYN_DYNAMICS_HPP
#define POPDYN_DYNAMICS_HPP

#include <array>
#include <cstdint>

#include "popdyn/dataset.hpp"

namespace popdyn {

/// An engagement sequence divided by its scale. Values lie in [0,1] and the
/// maximum is exactly 1 unless the source scale was 0 (degenerate: all zero).
struct ShapeVector {
    std::array<double, kDays> values{};
    bool degenerate = false;
};

/// Day-30 views of a repaired cumulative sequence (its maximum).
struct Scale {
    std::int64_t value = 0;
};

/// Time-normalized popularity: ln(views/days + 1). Zero iff views is zero,
/// strictly decreasing in days for fixed positive views.
double popularity_score(std::int64_t views, double days_since_upload);

struct Decomposition {
    Scale scale;
    ShapeVector shape;
};

/// Splits a repaired sequence into its scale and shape. Throws on sequences
/// that are incomplete, decreasing, or negative.
Decomposition decompose(const EngagementSequence& seq);

/// Inverse of decompose: values = scale * shape, rounded to counts.
EngagementSequence recompose(Scale scale, const ShapeVector& shape);

/// Trapezoidal integral of the shape over days 1..30, normalized by 29 so the
/// result lies in [0,1]. Rejects degenerate shapes.
double shape_area(const ShapeVector& shape);

}  // namespace popdyn

#endif  // POPDYN_DYNAMICS_HPP
