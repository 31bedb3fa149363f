#pragma once

#include "viscal/data_io.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace viscal {

enum class SpatialMode { Regional, Local, SemiLocal };

[[nodiscard]] std::string to_string(SpatialMode mode);
[[nodiscard]] SpatialMode parse_spatial_mode(const std::string& s);

struct TrainingPlan {
    int window_days = 1;
    SpatialMode mode = SpatialMode::Regional;
    int clusters = 1;                 ///< k, SemiLocal only
    int feature_quantile_count = 10;  ///< quantile levels per feature block
    std::size_t min_cases = 30;       ///< units below this are flagged

    /// Throws ParameterError on n < 1 or k < 1.
    void validate() const;
};

/// Inclusive range of calendar days.
struct DateInterval {
    Date first;
    Date last;

    [[nodiscard]] bool contains(Date d) const { return first <= d && d <= last; }
    [[nodiscard]] int days() const { return static_cast<int>((last - first).count()) + 1; }
};

/// Whole days ahead of a lead time: ceil(lead_h / 24).
[[nodiscard]] int lead_days(int lead_h);

/// Training valid dates for day d: [d - l - n + 1, d - l] with l = lead_days(lead_h).
[[nodiscard]] DateInterval rolling_window(Date d, int lead_h, int window_days);

/// Per-lead index of a dataset ordered by valid date, then station.
/// Keeps a reference to the dataset, which must outlive the index.
class CaseIndex {
public:
    explicit CaseIndex(const Dataset& data);

    [[nodiscard]] const Dataset& dataset() const noexcept { return *data_; }

    /// Cases of `lead_h` whose valid date lies in `window`, in index order.
    /// With `usable_only`, cases missing the observation or any forecast
    /// column present in the dataset are skipped.
    [[nodiscard]] std::vector<const ForecastCase*> window(int lead_h, DateInterval window,
                                                          bool usable_only = true) const;

    /// Cases of `lead_h` initialized on `init_date`.
    [[nodiscard]] std::vector<const ForecastCase*> issued(int lead_h, Date init_date) const;

    [[nodiscard]] bool usable(const ForecastCase& fc) const;

private:
    const Dataset* data_;
    std::map<int, std::vector<std::size_t>> by_lead_;
};

struct StationFeatures {
    std::vector<StationId> stations;             ///< stations with enough data
    std::vector<std::vector<double>> features;   ///< standardized, one row per station
    std::vector<StationId> insufficient;         ///< fewer than quantile_count observations
};

/// Climatology quantiles of the observations followed by the same quantiles
/// of the ensemble-mean errors (mean_ens - obs), each coordinate
/// standardized across stations. Levels are (i - 1/2)/q, i = 1..q.
[[nodiscard]] StationFeatures station_features(std::span<const ForecastCase* const> window_cases,
                                               std::span<const StationId> stations,
                                               int quantile_count);

/// Unstandardized feature vector of one station (quantile blocks only).
[[nodiscard]] std::vector<double> raw_station_features(std::span<const double> obs,
                                                       std::span<const double> errors,
                                                       int quantile_count);

struct KMeansResult {
    std::vector<int> labels;  ///< contiguous from 0, numbered by first appearance
    std::vector<std::vector<double>> centroids;
    double wcss = 0.0;
};

/// Lloyd iterations from k-means++ seeding, best of `restarts` runs by
/// within-cluster sum of squares. Deterministic for a fixed seed.
[[nodiscard]] KMeansResult kmeans_cluster(const std::vector<std::vector<double>>& points, int k,
                                          std::uint64_t seed, int restarts = 10);

struct ClusterAssignment {
    std::map<StationId, int> cluster;
    Date valid_for_day{};
    int clusters = 0;
    bool regional_fallback = false;  ///< no usable features and no previous assignment
};

/// Clusters the stations on features from the training window of (d, lead).
/// Stations lacking data join the cluster most of their previous
/// cluster-mates fall in; without a previous assignment the day falls back
/// to a single regional cluster.
[[nodiscard]] ClusterAssignment cluster_stations(const CaseIndex& index, Date d, int lead_h,
                                                 const TrainingPlan& plan, std::uint64_t seed,
                                                 const ClusterAssignment* previous = nullptr);

struct FitUnit {
    std::string label;  ///< "regional", the station id, or "c<k>"
    std::vector<StationId> stations;
    std::vector<ForecastCase> cases;
    bool below_minimum = false;
};

/// Training sets for day d and one lead time. SemiLocal requires an
/// assignment for the day. Units with fewer than plan.min_cases cases are
/// flagged; the caller falls back to the regional unit for them.
[[nodiscard]] std::vector<FitUnit> assemble(const CaseIndex& index, Date d, int lead_h,
                                            const TrainingPlan& plan,
                                            const ClusterAssignment* assignment = nullptr);

}  // namespace viscal
