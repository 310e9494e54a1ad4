#include "popdyn/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace popdyn {

double popularity_score(std::int64_t views, double days_since_upload) {
    if (!(days_since_upload > 0.0)) {
        throw std::invalid_argument("days_since_upload must be > 0");
    }
    if (views < 0) throw std::invalid_argument("views must be >= 0");
    return std::log1p(static_cast<double>(views) / days_since_upload);
}

Decomposition decompose(const EngagementSequence& seq) {
    if (!seq.repaired()) {
        throw std::invalid_argument("decompose requires a repaired sequence");
    }
    Decomposition out;
    // nondecreasing, so the max is the day-30 value
    out.scale.value = seq.values[kDays - 1];
    if (out.scale.value == 0) {
        out.shape.degenerate = true;
        return out;
    }
    const double scale = static_cast<double>(out.scale.value);
    for (int t = 0; t < kDays; ++t) {
        out.shape.values[static_cast<std::size_t>(t)] =
            static_cast<double>(seq.values[static_cast<std::size_t>(t)]) / scale;
    }
    return out;
}

EngagementSequence recompose(Scale scale, const ShapeVector& shape) {
    EngagementSequence seq;
    const double s = static_cast<double>(scale.value);
    for (int t = 0; t < kDays; ++t) {
        seq.values[static_cast<std::size_t>(t)] = std::llround(s * shape.values[static_cast<std::size_t>(t)]);
    }
    return seq;
}

double shape_area(const ShapeVector& shape) {
    if (shape.degenerate) {
        throw std::invalid_argument("shape_area is undefined for degenerate shapes");
    }
    double area = 0.0;
    for (int t = 0; t + 1 < kDays; ++t) {
        area += 0.5 * (shape.values[static_cast<std::size_t>(t)] + shape.values[static_cast<std::size_t>(t + 1)]);
    }
    return area / static_cast<double>(kDays - 1);
}

}  // namespace popdyn
