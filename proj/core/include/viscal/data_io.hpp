#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace viscal {

using Date = std::chrono::sys_days;
using DateTime = std::chrono::sys_time<std::chrono::hours>;

/// Number of exchangeable perturbed members in a complete ensemble.
inline constexpr std::size_t kEnsembleSize = 50;

/// SYNOP station identifier.
struct StationId {
    std::string value;

    auto operator<=>(const StationId&) const = default;
};

struct ForecastCase {
    StationId station;
    Date init_date;
    int lead_h = 0;
    std::optional<double> obs;
    std::optional<double> f_hres;
    std::optional<double> f_ctrl;
    std::vector<double> f_ens;  ///< exactly kEnsembleSize members, or empty when missing
    double x_max = 0.0;

    [[nodiscard]] bool has_ensemble() const noexcept { return !f_ens.empty(); }
    [[nodiscard]] DateTime valid_time() const;
    [[nodiscard]] Date valid_date() const;
};

struct EnsembleStats {
    double mean_ens = 0.0;
    double sd_ens = 0.0;
    int day_of_year = 1;
};

/// A loaded archive. Immutable after load.
struct Dataset {
    std::vector<ForecastCase> cases;
    double x_max = 0.0;
    std::vector<StationId> stations;  ///< sorted, unique
    bool has_hres = false;            ///< f_hres column present in the file
    bool has_ctrl = false;            ///< f_ctrl column present in the file
    std::size_t clamped_values = 0;   ///< values above x_max clamped at load

    /// Distinct lead times, ascending.
    [[nodiscard]] std::vector<int> lead_times() const;
};

/// init_date at 0000 UTC plus lead_h hours.
[[nodiscard]] DateTime valid_time(Date init_date, int lead_h);

/// 1-based day of the year of a date.
[[nodiscard]] int day_of_year(Date date);

/// Parses YYYY-MM-DD; throws DomainError when malformed.
[[nodiscard]] Date parse_date(const std::string& text);
[[nodiscard]] std::string format_date(Date date);

/// Mean, sample sd (divisor n-1) of the exchangeable members and the day of
/// the year of the valid time. Throws MissingForecastError without members.
[[nodiscard]] EnsembleStats ensemble_stats(const ForecastCase& fc);

/// Reads the CSV archive. Values above x_max are clamped to x_max and
/// counted in Dataset::clamped_values.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path, double x_max);
[[nodiscard]] Dataset read_dataset(std::istream& in, double x_max);

/// Writes the archive using the same column layout as load_dataset expects.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
void write_dataset(const Dataset& data, std::ostream& out);

/// Shortest decimal representation that round-trips.
[[nodiscard]] std::string format_number(double value);

}  // namespace viscal
