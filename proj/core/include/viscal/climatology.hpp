#pragma once

#include "viscal/data_io.hpp"

#include <map>
#include <vector>

namespace viscal {

struct ClimForecast {
    StationId station;
    std::vector<double> members;  ///< ascending valid time
    std::size_t requested = 0;    ///< configured K
    bool short_history = false;   ///< fewer than K observations found

    [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
};

/// Observations per station keyed by valid time, deduplicated across
/// lead times and initializations.
class ObservationHistory {
public:
    explicit ObservationHistory(const Dataset& data);

    [[nodiscard]] const std::map<DateTime, double>* station(const StationId& s) const;

private:
    std::map<StationId, std::map<DateTime, double>> obs_;
};

/// Past observations of `station` with valid dates in [d - l - K + 1, d - l],
/// l = ceil(lead_h / 24). Hour-matched by default: only observations at the
/// UTC hour of the forecast valid time, one per day. With `pooled`, all
/// hours in the window count and the K most recent are kept.
[[nodiscard]] ClimForecast climatology_forecast(const ObservationHistory& history,
                                                const StationId& station, Date d, int lead_h,
                                                std::size_t K, bool pooled = false);

[[nodiscard]] ClimForecast climatology_forecast(const Dataset& data, const StationId& station,
                                                Date d, int lead_h, std::size_t K,
                                                bool pooled = false);

}  // namespace viscal
