#include "viscal/climatology.hpp"

#include "viscal/errors.hpp"
#include "viscal/training.hpp"

#include <algorithm>

namespace viscal {

ObservationHistory::ObservationHistory(const Dataset& data) {
    for (const auto& fc : data.cases) {
        if (fc.obs) obs_[fc.station].emplace(fc.valid_time(), *fc.obs);
    }
}

const std::map<DateTime, double>* ObservationHistory::station(const StationId& s) const {
    const auto it = obs_.find(s);
    return it == obs_.end() ? nullptr : &it->second;
}

ClimForecast climatology_forecast(const ObservationHistory& history, const StationId& station,
                                  Date d, int lead_h, std::size_t K, bool pooled) {
    if (K == 0) throw ParameterError("climatology size must be positive");
    ClimForecast out;
    out.station = station;
    out.requested = K;

    const auto window = rolling_window(d, lead_h, static_cast<int>(K));
    const auto hour = std::chrono::hours(lead_h % 24);
    if (const auto* series = history.station(station)) {
        const DateTime from{window.first};
        const DateTime to{window.last + std::chrono::days(1)};
        std::vector<double> picked;
        for (auto it = series->lower_bound(from); it != series->end() && it->first < to; ++it) {
            if (!pooled && it->first - std::chrono::floor<std::chrono::days>(it->first) != hour) continue;
            picked.push_back(it->second);
        }
        if (picked.size() > K) picked.erase(picked.begin(), picked.end() - static_cast<std::ptrdiff_t>(K));
        out.members = std::move(picked);
    }
    out.short_history = out.members.size() < K;
    return out;
}

ClimForecast climatology_forecast(const Dataset& data, const StationId& station, Date d,
                                  int lead_h, std::size_t K, bool pooled) {
    return climatology_forecast(ObservationHistory(data), station, d, lead_h, K, pooled);
}

}  // namespace viscal
