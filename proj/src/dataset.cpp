#include "popdyn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "popdyn/csv.hpp"
#include "popdyn/hash.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {

namespace {

const std::array<std::string_view, kSocialFeatureCount> kSocialNames = {
    "contacts",
    "photo_count",
    "mean_views",
    "groups_count",
    "groups_avg_members",
    "groups_avg_pictures",
    "num_groups",
    "avg_group_members",
    "avg_group_photos",
};

std::string day_column(int day) {
    std::string name = "d";
    if (day < 10) name.push_back('0');
    name += format_int(day);
    return name;
}

}  // namespace

std::span<const std::string_view> social_feature_names() { return kSocialNames; }

std::optional<SocialFeature> social_feature_from_name(std::string_view name) {
    for (int i = 0; i < kSocialFeatureCount; ++i) {
        if (kSocialNames[static_cast<std::size_t>(i)] == name) {
            return static_cast<SocialFeature>(i);
        }
    }
    return std::nullopt;
}

bool EngagementSequence::nondecreasing() const {
    for (int t = 1; t < kDays; ++t) {
        if (values[static_cast<std::size_t>(t)] < values[static_cast<std::size_t>(t - 1)]) {
            return false;
        }
    }
    return true;
}

bool EngagementSequence::repaired() const {
    if (!complete() || !nondecreasing()) return false;
    return values[0] >= 0;
}

DatasetSchema::DatasetSchema() {
    for (int i = 0; i < kSocialFeatureCount; ++i) {
        social_columns[static_cast<std::size_t>(i)] = std::string(kSocialNames[static_cast<std::size_t>(i)]);
    }
}

std::vector<ImageRecord> load_dataset(const std::string& path, const DatasetSchema& schema) {
    const CsvTable table = read_csv(path);

    auto require = [&](const std::string& name) -> std::size_t {
        const auto idx = table.column(name);
        if (!idx) throw std::runtime_error("missing column '" + name + "' in " + path);
        return *idx;
    };

    const std::size_t col_id = require(schema.image_id);
    const std::size_t col_user = require(schema.user_id);
    std::array<std::size_t, kSocialFeatureCount> col_social{};
    for (int i = 0; i < kSocialFeatureCount; ++i) {
        col_social[static_cast<std::size_t>(i)] = require(schema.social_columns[static_cast<std::size_t>(i)]);
    }
    const std::size_t col_tags = require(schema.tags);
    const std::size_t col_title = require(schema.title);
    std::array<std::size_t, kDays> col_day{};
    for (int d = 1; d <= kDays; ++d) {
        col_day[static_cast<std::size_t>(d - 1)] = require(day_column(d));
    }
    const auto col_true_cluster = table.column(schema.true_cluster);
    const auto col_true_scale = table.column(schema.true_scale);

    std::vector<ImageRecord> records;
    records.reserve(table.rows.size());
    std::unordered_set<std::string> seen_ids;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        const std::string where = "row " + format_int(static_cast<std::int64_t>(r + 1));
        if (cells.size() != table.header.size()) {
            throw std::runtime_error("malformed " + where + ": expected " +
                                     format_int(static_cast<std::int64_t>(table.header.size())) +
                                     " cells, got " + format_int(static_cast<std::int64_t>(cells.size())));
        }
        ImageRecord rec;
        rec.image_id = cells[col_id];
        if (rec.image_id.empty()) throw std::runtime_error("malformed " + where + ": empty image_id");
        if (!seen_ids.insert(rec.image_id).second) {
            throw std::runtime_error("duplicate image_id '" + rec.image_id + "'");
        }
        rec.user_id = cells[col_user];

        try {
            for (int i = 0; i < kSocialFeatureCount; ++i) {
                const std::string& cell = cells[col_social[static_cast<std::size_t>(i)]];
                if (cell.empty()) continue;  // recorded as missing, not zero
                const double v = parse_double(cell);
                if (!std::isfinite(v) || v < 0.0) {
                    throw std::runtime_error("negative or non-finite value in column '" +
                                             std::string(kSocialNames[static_cast<std::size_t>(i)]) + "'");
                }
                rec.social[static_cast<std::size_t>(i)] = v;
            }
            for (int d = 0; d < kDays; ++d) {
                const std::string& cell = cells[col_day[static_cast<std::size_t>(d)]];
                if (cell.empty()) {
                    rec.sequence.missing.set(static_cast<std::size_t>(d));
                    continue;
                }
                const std::int64_t v = parse_int(cell);
                if (v < 0) throw std::runtime_error("negative view count on day " + format_int(d + 1));
                rec.sequence.values[static_cast<std::size_t>(d)] = v;
            }
            if (col_true_cluster && !cells[*col_true_cluster].empty()) {
                rec.true_cluster = static_cast<int>(parse_int(cells[*col_true_cluster]));
            }
            if (col_true_scale && !cells[*col_true_scale].empty()) {
                rec.true_scale = parse_int(cells[*col_true_scale]);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("malformed " + where + " (image_id '" + rec.image_id + "'): " + e.what());
        }

        const std::string& tag_cell = cells[col_tags];
        std::size_t start = 0;
        while (start <= tag_cell.size() && !tag_cell.empty()) {
            const std::size_t sep = tag_cell.find(';', start);
            const std::size_t end = sep == std::string::npos ? tag_cell.size() : sep;
            if (end > start) rec.tags.emplace_back(tag_cell.substr(start, end - start));
            if (sep == std::string::npos) break;
            start = sep + 1;
        }
        rec.title = cells[col_title];
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<std::string> dataset_header() {
    std::vector<std::string> header = {"image_id", "user_id"};
    for (const auto& name : kSocialNames) header.emplace_back(name);
    header.emplace_back("tags");
    header.emplace_back("title");
    for (int d = 1; d <= kDays; ++d) header.push_back(day_column(d));
    header.emplace_back("true_cluster");
    header.emplace_back("true_scale");
    return header;
}

std::vector<std::string> dataset_row(const ImageRecord& rec) {
    std::vector<std::string> cells;
    cells.reserve(2 + kSocialFeatureCount + 2 + kDays + 2);
    cells.push_back(rec.image_id);
    cells.push_back(rec.user_id);
    for (const auto& v : rec.social) {
        cells.push_back(v ? format_double(*v) : std::string());
    }
    std::string tags;
    for (std::size_t i = 0; i < rec.tags.size(); ++i) {
        if (i > 0) tags.push_back(';');
        tags += rec.tags[i];
    }
    cells.push_back(std::move(tags));
    cells.push_back(rec.title);
    for (int d = 0; d < kDays; ++d) {
        if (rec.sequence.missing.test(static_cast<std::size_t>(d))) {
            cells.emplace_back();
        } else {
            cells.push_back(format_int(rec.sequence.values[static_cast<std::size_t>(d)]));
        }
    }
    cells.push_back(rec.true_cluster ? format_int(*rec.true_cluster) : std::string());
    cells.push_back(rec.true_scale ? format_int(*rec.true_scale) : std::string());
    return cells;
}

EngagementSequence repair_sequence(const EngagementSequence& seq) {
    if (seq.missing.all()) {
        throw std::runtime_error("cannot repair sequence: all 30 days missing");
    }
    EngagementSequence out;
    out.values = seq.values;

    int first = -1;
    int last = -1;
    for (int t = 0; t < kDays; ++t) {
        if (!seq.missing.test(static_cast<std::size_t>(t))) {
            if (first < 0) first = t;
            last = t;
        }
    }
    for (int t = 0; t < first; ++t) {
        out.values[static_cast<std::size_t>(t)] = seq.values[static_cast<std::size_t>(first)];
    }
    for (int t = last + 1; t < kDays; ++t) {
        out.values[static_cast<std::size_t>(t)] = seq.values[static_cast<std::size_t>(last)];
    }
    int prev = first;
    for (int t = first + 1; t <= last; ++t) {
        if (seq.missing.test(static_cast<std::size_t>(t))) continue;
        if (t > prev + 1) {
            const double lo = static_cast<double>(seq.values[static_cast<std::size_t>(prev)]);
            const double hi = static_cast<double>(seq.values[static_cast<std::size_t>(t)]);
            for (int g = prev + 1; g < t; ++g) {
                const double frac = static_cast<double>(g - prev) / static_cast<double>(t - prev);
                out.values[static_cast<std::size_t>(g)] = std::llround(lo + (hi - lo) * frac);
            }
        }
        prev = t;
    }
    // running maximum: cumulative series must be nondecreasing
    for (int t = 1; t < kDays; ++t) {
        out.values[static_cast<std::size_t>(t)] = std::max(out.values[static_cast<std::size_t>(t)],
                                                           out.values[static_cast<std::size_t>(t - 1)]);
    }
    out.missing.reset();
    return out;
}

ImputeStats fit_impute(const std::vector<ImageRecord>& records) {
    ImputeStats stats;
    std::vector<double> present;
    for (int i = 0; i < kSocialFeatureCount; ++i) {
        present.clear();
        for (const auto& rec : records) {
            if (rec.social[static_cast<std::size_t>(i)]) {
                present.push_back(*rec.social[static_cast<std::size_t>(i)]);
            }
        }
        if (present.empty()) {
            throw std::runtime_error("column '" + std::string(kSocialNames[static_cast<std::size_t>(i)]) +
                                     "' has no present values; cannot impute");
        }
        std::sort(present.begin(), present.end());
        const std::size_t n = present.size();
        stats.medians[static_cast<std::size_t>(i)] =
            (n % 2 == 1) ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
    }
    return stats;
}

void apply_impute(std::vector<ImageRecord>& records, const ImputeStats& stats) {
    for (auto& rec : records) {
        for (int i = 0; i < kSocialFeatureCount; ++i) {
            if (!rec.social[static_cast<std::size_t>(i)]) {
                rec.social[static_cast<std::size_t>(i)] = stats.medians[static_cast<std::size_t>(i)];
            }
        }
    }
}

std::vector<ImageRecord> impute_features(std::vector<ImageRecord> records) {
    const ImputeStats stats = fit_impute(records);
    apply_impute(records, stats);
    return records;
}

std::vector<double> embed_tags(const ImageRecord& record, int dims) {
    if (dims < 1) throw std::invalid_argument("tag embedding dims must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(dims) + 1, 0.0);
    for (const auto& tag : record.tags) {
        std::string lowered(tag);
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const std::uint64_t bucket = fnv1a64(lowered) % static_cast<std::uint64_t>(dims);
        out[static_cast<std::size_t>(bucket)] += 1.0;
    }
    out.back() = static_cast<double>(record.tags.size());  // num_tags
    return out;
}

std::string tag_column_name(int bucket, int dims) {
    int width = 1;
    for (int v = dims - 1; v >= 10; v /= 10) ++width;
    std::string digits = format_int(bucket);
    std::string name = "tag_";
    for (int pad = width - static_cast<int>(digits.size()); pad > 0; --pad) name.push_back('0');
    name += digits;
    return name;
}

FeatureMatrix build_feature_matrix(const std::vector<ImageRecord>& records,
                                   const std::vector<std::string>& feature_set, int tag_dims) {
    if (feature_set.empty()) throw std::invalid_argument("feature set is empty");
    if (tag_dims < 1) throw std::invalid_argument("tag embedding dims must be >= 1");

    // kind: 0..8 social index, -1 num_tags, >=1000 tag bucket (offset by 1000)
    std::vector<int> kinds;
    kinds.reserve(feature_set.size());
    std::unordered_map<std::string, int> tag_columns;
    for (int b = 0; b < tag_dims; ++b) tag_columns[tag_column_name(b, tag_dims)] = b;
    bool needs_tags = false;
    for (const auto& name : feature_set) {
        if (const auto f = social_feature_from_name(name)) {
            kinds.push_back(static_cast<int>(*f));
        } else if (name == "num_tags") {
            kinds.push_back(-1);
            needs_tags = true;
        } else if (const auto it = tag_columns.find(name); it != tag_columns.end()) {
            kinds.push_back(1000 + it->second);
            needs_tags = true;
        } else {
            throw std::invalid_argument("unknown feature name '" + name + "'");
        }
    }

    FeatureMatrix matrix;
    matrix.columns = feature_set;
    matrix.row_ids.reserve(records.size());
    matrix.values.reserve(records.size() * feature_set.size());
    for (const auto& rec : records) {
        matrix.row_ids.push_back(rec.image_id);
        std::vector<double> tag_vec;
        if (needs_tags) tag_vec = embed_tags(rec, tag_dims);
        for (const int kind : kinds) {
            if (kind >= 1000) {
                matrix.values.push_back(tag_vec[static_cast<std::size_t>(kind - 1000)]);
            } else if (kind == -1) {
                matrix.values.push_back(tag_vec.back());
            } else {
                const auto& v = rec.social[static_cast<std::size_t>(kind)];
                if (!v) {
                    throw std::invalid_argument("record '" + rec.image_id + "' is not imputed: missing " +
                                                std::string(kSocialNames[static_cast<std::size_t>(kind)]));
                }
                matrix.values.push_back(*v);
            }
        }
    }
    return matrix;
}

void append_column(FeatureMatrix& matrix, const std::string& name, const std::vector<double>& column) {
    if (column.size() != matrix.rows()) {
        throw std::invalid_argument("appended column length does not match row count");
    }
    const std::size_t old_cols = matrix.cols();
    std::vector<double> values;
    values.reserve(matrix.rows() * (old_cols + 1));
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t c = 0; c < old_cols; ++c) values.push_back(matrix.at(r, c));
        values.push_back(column[r]);
    }
    matrix.columns.push_back(name);
    matrix.values = std::move(values);
}

namespace {

// Prototype curves live on a 1/60 grid and scales are multiples of 60, so a
// zero-noise sequence round(scale * prototype) is exact and decomposes back
// to the prototype with no quantization residue.
constexpr std::int64_t kShapeGrid = 60;

std::string zero_padded(std::int64_t value, int width) {
    std::string digits = format_int(value);
    std::string out;
    for (int pad = width - static_cast<int>(digits.size()); pad > 0; --pad) out.push_back('0');
    out += digits;
    return out;
}

}  // namespace

std::vector<std::array<double, kDays>> synthetic_prototypes(int n_prototypes) {
    if (n_prototypes < 2) throw std::invalid_argument("need at least 2 prototypes");
    std::vector<std::array<double, kDays>> prototypes;
    prototypes.reserve(static_cast<std::size_t>(n_prototypes));
    for (int p = 0; p < n_prototypes; ++p) {
        // growth rates log-spaced from near-linear ramps to day-one saturation
        const double frac = static_cast<double>(p) / static_cast<double>(n_prototypes - 1);
        const double rate = 0.02 * std::pow(75.0, frac);
        const double denom = 1.0 - std::exp(-rate * kDays);
        std::array<double, kDays> curve{};
        std::int64_t prev = 0;
        for (int t = 1; t <= kDays; ++t) {
            const double v = (1.0 - std::exp(-rate * t)) / denom;
            std::int64_t u = std::llround(static_cast<double>(kShapeGrid) * v);
            u = std::max(u, prev);
            prev = u;
            curve[static_cast<std::size_t>(t - 1)] =
                static_cast<double>(u) / static_cast<double>(kShapeGrid);
        }
        prototypes.push_back(curve);
    }
    return prototypes;
}

std::vector<ImageRecord> generate_synthetic(int n, int n_prototypes, double noise,
                                            std::uint64_t seed, const SyntheticOptions& options) {
    if (n_prototypes < 2 || n < n_prototypes) {
        throw std::invalid_argument("need n >= n_prototypes >= 2");
    }
    if (noise < 0.0) throw std::invalid_argument("noise must be >= 0");

    const auto prototypes = synthetic_prototypes(n_prototypes);
    const int half = n_prototypes / 2;
    Rng rng(seed);

    std::vector<ImageRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ImageRecord rec;
        rec.image_id = "img" + zero_padded(i, 6);
        rec.user_id = "usr" + zero_padded(i, 6);
        rec.title = "synthetic image " + format_int(i);

        // the first n_prototypes records cover every prototype once
        const int p = (i < n_prototypes) ? i
                                         : static_cast<int>(rng.below(static_cast<std::uint64_t>(n_prototypes)));
        rec.true_cluster = p;

        const double mean_views = std::exp(rng.normal(5.5, 1.2));
        const double contacts = std::round(std::exp(rng.normal(4.0, 1.0)));
        const double photo_count = std::round(std::exp(rng.normal(5.0, 0.6)));
        const double sig = options.cluster_feature_sigma;
        // four prototype-signature patterns: identity, half-shift, reversal, unit shift
        const double groups_count = std::round(std::exp(rng.normal(1.0 + 0.7 * p, sig)));
        const double num_groups =
            std::round(std::exp(rng.normal(1.0 + 0.7 * ((p + half) % n_prototypes), sig)));
        const double avg_group_members = std::exp(rng.normal(2.5 + 0.6 * (n_prototypes - 1 - p), sig));
        const double avg_group_photos =
            std::exp(rng.normal(2.0 + 0.6 * ((p + 1) % n_prototypes), sig));
        const double groups_avg_members = std::exp(rng.normal(3.0, 0.8));
        const double groups_avg_pictures = std::exp(rng.normal(2.0, 0.8));

        rec.social_value(SocialFeature::kContacts) = contacts;
        rec.social_value(SocialFeature::kPhotoCount) = photo_count;
        rec.social_value(SocialFeature::kMeanViews) = mean_views;
        rec.social_value(SocialFeature::kGroupsCount) = groups_count;
        rec.social_value(SocialFeature::kGroupsAvgMembers) = groups_avg_members;
        rec.social_value(SocialFeature::kGroupsAvgPictures) = groups_avg_pictures;
        rec.social_value(SocialFeature::kNumGroups) = num_groups;
        rec.social_value(SocialFeature::kAvgGroupMembers) = avg_group_members;
        rec.social_value(SocialFeature::kAvgGroupPhotos) = avg_group_photos;

        const int n_cluster_tags = 2 + static_cast<int>(rng.below(3));
        for (int t = 0; t < n_cluster_tags; ++t) {
            rec.tags.push_back("shape" + format_int(p) + "tag" + format_int(static_cast<std::int64_t>(rng.below(5))));
        }
        const int n_shared_tags = 1 + static_cast<int>(rng.below(3));
        static const std::array<std::string_view, 4> shared = {"flickr", "photo", "daily", "art"};
        for (int t = 0; t < n_shared_tags; ++t) {
            rec.tags.emplace_back(shared[static_cast<std::size_t>(rng.below(shared.size()))]);
        }

        const double log_scale = options.scale_alpha * std::log1p(mean_views) +
                                 options.scale_beta * std::log1p(contacts) +
                                 rng.normal(0.0, options.scale_noise_sigma);
        const std::int64_t scale =
            kShapeGrid * std::max<std::int64_t>(1, std::llround(std::exp(log_scale) / static_cast<double>(kShapeGrid)));
        rec.true_scale = scale;

        const auto& proto = prototypes[static_cast<std::size_t>(p)];
        std::int64_t running = 0;
        for (int t = 0; t < kDays; ++t) {
            double v = static_cast<double>(scale) * proto[static_cast<std::size_t>(t)];
            if (noise > 0.0) v += static_cast<double>(scale) * rng.normal(0.0, noise);
            std::int64_t count = std::max<std::int64_t>(0, std::llround(v));
            count = std::max(count, running);
            running = count;
            rec.sequence.values[static_cast<std::size_t>(t)] = count;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace popdyn
