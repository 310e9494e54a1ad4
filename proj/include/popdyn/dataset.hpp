#ifndef POPDYN_DATASET_HPP
#define POPDYN_DATASET_HPP

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace popdyn {

inline constexpr int kDays = 30;

/// Cumulative daily view counts over the 30-day horizon. Raw cells that were
/// absent in the source file are flagged in `missing` rather than stored as 0.
struct EngagementSequence {
    std::array<std::int64_t, kDays> values{};
    std::bitset<kDays> missing;

    bool complete() const { return missing.none(); }
    bool nondecreasing() const;
    /// complete, nondecreasing, all values >= 0
    bool repaired() const;
};

/// Numeric social features, in the canonical column order used everywhere.
enum class SocialFeature : int {
    kContacts = 0,
    kPhotoCount,
    kMeanViews,
    kGroupsCount,
    kGroupsAvgMembers,
    kGroupsAvgPictures,
    kNumGroups,
    kAvgGroupMembers,
    kAvgGroupPhotos,
};
inline constexpr int kSocialFeatureCount = 9;
std::span<const std::string_view> social_feature_names();
std::optional<SocialFeature> social_feature_from_name(std::string_view name);

struct ImageRecord {
    std::string image_id;
    std::string user_id;
    std::array<std::optional<double>, kSocialFeatureCount> social{};
    std::vector<std::string> tags;
    std::string title;
    EngagementSequence sequence;
    // Ground truth carried by synthetic datasets only.
    std::optional<int> true_cluster;
    std::optional<std::int64_t> true_scale;

    std::optional<double>& social_value(SocialFeature f) {
        return social[static_cast<std::size_t>(f)];
    }
    const std::optional<double>& social_value(SocialFeature f) const {
        return social[static_cast<std::size_t>(f)];
    }
};

/// Dense numeric view over a record set; rows follow `row_ids` order and
/// column order is exactly the requested feature-set order.
struct FeatureMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> columns;
    std::vector<double> values;  // row-major, rows() x cols()

    std::size_t rows() const { return row_ids.size(); }
    std::size_t cols() const { return columns.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(values).subspan(r * cols(), cols());
    }
};

/// Column-name overrides for input files whose headers differ from the
/// canonical schema. Day columns are always d01..d30.
struct DatasetSchema {
    std::string image_id = "image_id";
    std::string user_id = "user_id";
    std::array<std::string, kSocialFeatureCount> social_columns;
    std::string tags = "tags";
    std::string title = "title";
    std::string true_cluster = "true_cluster";
    std::string true_scale = "true_scale";

    DatasetSchema();
};

std::vector<ImageRecord> load_dataset(const std::string& path,
                                      const DatasetSchema& schema = DatasetSchema());

/// Rows of the canonical CSV layout (no provenance line; callers prepend it).
std::vector<std::string> dataset_header();
std::vector<std::string> dataset_row(const ImageRecord& rec);

/// Linear interpolation of interior gaps, edge fill, then a running-maximum
/// pass so the cumulative series is nondecreasing. Throws if every day is
/// missing. Idempotent.
EngagementSequence repair_sequence(const EngagementSequence& seq);

/// Per-column medians over present values; the statistics object keeps them so
/// the evaluation protocol can fit on the training partition only.
struct ImputeStats {
    std::array<double, kSocialFeatureCount> medians{};
};
ImputeStats fit_impute(const std::vector<ImageRecord>& records);
void apply_impute(std::vector<ImageRecord>& records, const ImputeStats& stats);
std::vector<ImageRecord> impute_features(std::vector<ImageRecord> records);

/// Feature hashing of lowercased tag tokens into `dims` count buckets.
/// Deterministic and training-free; `num_tags` is the total token count.
std::vector<double> embed_tags(const ImageRecord& record, int dims);
std::string tag_column_name(int bucket, int dims);

/// Assembles the matrix for `feature_set` drawn from the known vocabulary:
/// the nine social features, `num_tags`, and tag hash columns. Requires
/// imputed records.
FeatureMatrix build_feature_matrix(const std::vector<ImageRecord>& records,
                                   const std::vector<std::string>& feature_set,
                                   int tag_dims = 64);

/// Appends one extra column (used for the optional shape-area feature).
void append_column(FeatureMatrix& matrix, const std::string& name,
                   const std::vector<double>& column);

struct SyntheticOptions {
    double scale_alpha = 1.0;        // exponent on log1p(mean_views)
    double scale_beta = 0.3;         // exponent on log1p(contacts)
    double scale_noise_sigma = 0.2;  // sigma of the log-scale noise term
    double cluster_feature_sigma = 0.35;
};

/// Ground-truthed synthetic stand-in for the real dataset: saturating-curve
/// prototypes on a 1/60 grid, scales that are multiples of 60 so the
/// zero-noise sequences decompose back to their prototypes exactly, and
/// social features correlated with the drawn prototype and scale.
std::vector<ImageRecord> generate_synthetic(int n, int n_prototypes, double noise,
                                            std::uint64_t seed,
                                            const SyntheticOptions& options = SyntheticOptions());

/// The prototype shape library the generator draws from (values in [0,1],
/// ending at 1). Exposed so recovery tests can compare against ground truth.
std::vector<std::array<double, kDays>> synthetic_prototypes(int n_prototypes);

}  // namespace popdyn

#endif  // POPDYN_DATASET_HPP
