#pragma once

// Synthetic archives for tests and benchmarks: ensembles with known
// generating laws, so fitted models can be checked against the truth.

#include "viscal/bma_model.hpp"
#include "viscal/data_io.hpp"
#include "viscal/mixture_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace viscal::testing {

inline MixtureParams reference_truth() {
    MixtureParams p;
    p.gamma_w = 0.3;
    p.a = {1.0, 0.0, 0.0, 0.5, 0.5, -0.3};
    p.b = {1.0, 0.6};
    p.alpha = {20.0, 0.0, 0.0, 0.4, 2.0, -1.0};
    p.beta = {2.0, 0.5};
    p.has_hres = false;
    p.has_ctrl = true;
    return p;
}

inline std::string station_name(std::size_t i) {
    std::string s = "S";
    if (i < 10) s += '0';
    return s + std::to_string(i);
}

struct EnsembleShape {
    double center_lo = 0.5;
    double center_hi = 40.0;
    double spread_lo = 0.5;
    double spread_hi = 6.0;
};

/// Fills ensemble members (and CTRL/HRES when requested) around a random
/// centre, clipped to [0, x_max].
inline void fill_ensemble(ForecastCase& fc, std::mt19937_64& rng, const EnsembleShape& shape,
                          bool with_hres, bool with_ctrl) {
    std::uniform_real_distribution<double> centre(shape.center_lo, shape.center_hi);
    std::uniform_real_distribution<double> spread(shape.spread_lo, shape.spread_hi);
    std::normal_distribution<double> z(0.0, 1.0);
    const double c = centre(rng);
    const double s = spread(rng);
    auto member = [&] { return std::clamp(c + s * z(rng), 0.0, fc.x_max); };
    fc.f_ens.resize(kEnsembleSize);
    for (auto& m : fc.f_ens) m = member();
    if (with_hres) fc.f_hres = member();
    if (with_ctrl) fc.f_ctrl = member();
}

/// Cases whose observations are drawn from the mixture with `truth`
/// coefficients. Stations cycle over `stations`, one init date per day.
inline std::vector<ForecastCase> simulate_mixture_cases(const MixtureParams& truth, std::size_t n,
                                                        std::uint64_t seed, double x_max = 75.0,
                                                        std::size_t stations = 10,
                                                        int lead_h = 24) {
    std::mt19937_64 rng(seed);
    std::vector<ForecastCase> out;
    out.reserve(n);
    const Date start = std::chrono::sys_days(std::chrono::year{2000} / 1 / 1);
    for (std::size_t i = 0; i < n; ++i) {
        ForecastCase fc;
        fc.station.value = station_name(i % stations);
        fc.init_date = start + std::chrono::days(static_cast<int>(i / stations));
        fc.lead_h = lead_h;
        fc.x_max = x_max;
        fill_ensemble(fc, rng, {}, truth.has_hres, truth.has_ctrl);
        const auto stats = ensemble_stats(fc);
        const auto pred = link(truth, stats, fc.f_hres, fc.f_ctrl, x_max);
        fc.obs = pred.draw(rng);
        out.push_back(std::move(fc));
    }
    return out;
}

/// Cases with observations from a BMA-like law: a point mass at x_max whose
/// probability grows with the ensemble mean, otherwise a beta law centred
/// near a biased ensemble mean.
inline std::vector<ForecastCase> simulate_bma_cases(std::size_t n, std::uint64_t seed,
                                                    double x_max = 75.0, bool with_hres = true,
                                                    bool with_ctrl = true, std::size_t stations = 13) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ForecastCase> out;
    out.reserve(n);
    const Date start = std::chrono::sys_days(std::chrono::year{2000} / 1 / 1);
    EnsembleShape shape;
    shape.center_hi = 70.0;
    for (std::size_t i = 0; i < n; ++i) {
        ForecastCase fc;
        fc.station.value = station_name(i % stations);
        fc.init_date = start + std::chrono::days(static_cast<int>(i / stations));
        fc.lead_h = 24;
        fc.x_max = x_max;
        fill_ensemble(fc, rng, shape, with_hres, with_ctrl);
        const double fbar = ensemble_stats(fc).mean_ens;
        const double p_max = 1.0 / (1.0 + std::exp(-(-6.0 + 0.9 * std::sqrt(fbar))));
        if (u(rng) < p_max) {
            fc.obs = x_max;
        } else {
            const double mean = std::clamp(0.8 * fbar + 2.0, 1.0, x_max - 1.0);
            const double sd = std::min(2.0 + 0.15 * fbar, 0.9 * std::sqrt(mean * (x_max - mean)));
            fc.obs = beta_from_moments(mean, sd, x_max).draw(rng);
        }
        out.push_back(std::move(fc));
    }
    return out;
}

inline std::vector<MixtureCase> to_mixture_cases(const std::vector<ForecastCase>& cases) {
    std::vector<MixtureCase> out;
    out.reserve(cases.size());
    for (const auto& c : cases) out.push_back(make_mixture_case(c));
    return out;
}

}  // namespace viscal::testing
