#pragma once

#include <cstddef>
#include <span>

namespace viscal {

/// Observations are floored at one 10 m reporting increment before scoring,
/// keeping densities with a pole at zero finite.
inline constexpr double kMinScoredObs = 0.01;

/// Log densities are evaluated on max(density, kDensityFloor).
inline constexpr double kDensityFloor = 1e-12;

/// Pairwise (cascade) summation splitting at the midpoint. Summing a
/// sequence concatenated with itself gives exactly twice the sum of the
/// original, so means are invariant under that duplication.
[[nodiscard]] inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t mid = v.size() / 2;
    return pairwise_sum(v.first(mid)) + pairwise_sum(v.subspan(mid));
}

[[nodiscard]] inline double pairwise_mean(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace viscal
