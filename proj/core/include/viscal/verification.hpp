#pragma once

#include "viscal/bma_model.hpp"
#include "viscal/data_io.hpp"
#include "viscal/distributions.hpp"
#include "viscal/mixture_model.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <random>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace viscal {

/// A finite ensemble used directly as the predictive law (raw ensemble or
/// climatology). Members are kept sorted.
class EmpiricalEnsemble {
public:
    explicit EmpiricalEnsemble(std::vector<double> members);

    [[nodiscard]] std::span<const double> members() const noexcept { return members_; }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
    [[nodiscard]] double cdf(double x) const;
    /// Sample quantile interpolating the order statistics at plotting
    /// positions i/(K+1), so the nominal (K-1)/(K+1) central interval is
    /// the ensemble range.
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] double mean() const;

private:
    std::vector<double> members_;
};

using ProbForecast = std::variant<MixturePredictive, BmaPredictive, EmpiricalEnsemble>;

[[nodiscard]] bool is_parametric(const ProbForecast& f) noexcept;

/// splitmix64 step.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Seed of the per-case random stream, a function of station, valid time
/// and the run seed only.
[[nodiscard]] std::uint64_t case_seed(const StationId& station, DateTime valid,
                                      std::uint64_t base) noexcept;

inline constexpr std::uint64_t kDefaultSeed = 20240101;
inline constexpr std::size_t kDefaultMcSamples = 10000;

/// Exact CRPS of an ensemble: mean|X_i - x| - (1/(2K^2)) sum_ij |X_i - X_j|.
[[nodiscard]] double crps_ensemble(std::span<const double> members, double x);

/// CRPS estimate from an i.i.d. sample of the forecast law, using the
/// unbiased pair term 1/(2N(N-1)) sum_{i != j} |X_i - X_j|.
[[nodiscard]] double crps_from_sample(std::vector<double> sample, double x);

/// Law with a continuous part on [0, x_max) and possibly a point mass at x_max.
template <class Law>
concept CensoredPredictive = requires(const Law& law, double x) {
    { law.cdf(x) } -> std::convertible_to<double>;
    { law.pdf(x).value } -> std::convertible_to<double>;
    { law.cdf_below_max() } -> std::convertible_to<double>;
    { law.x_max() } -> std::convertible_to<double>;
};

template <class Law>
concept InvertibleLaw = requires(const Law& law, double p) {
    { law.quantile(p) } -> std::convertible_to<double>;
};

/// Finite mixture of point-mass-plus-beta components (BMA).
template <class Law>
concept ComponentMixture = requires(const Law& law) {
    { law.components().front().weight } -> std::convertible_to<double>;
    { law.components().front().point_mass } -> std::convertible_to<double>;
    { law.components().front().beta } -> std::convertible_to<BetaOnRange>;
};

namespace detail {

/// One mixture component: (1 - mass) beta on [0, x_max) plus mass at x_max.
struct CensoredBeta {
    const BetaOnRange* beta;
    double mass;

    [[nodiscard]] double cdf(double x) const {
        return x >= beta->x_max() ? 1.0 : (1.0 - mass) * beta->cdf(x);
    }
    [[nodiscard]] MixedDensity pdf(double x) const { return {(1.0 - mass) * beta->pdf(x), false}; }
    [[nodiscard]] double cdf_below_max() const { return 1.0 - mass; }
    [[nodiscard]] double x_max() const { return beta->x_max(); }
};

/// Solves F(x) = u for ascending u, each search starting at the previous root.
/// Safeguarded Newton: bisection whenever a step leaves the bracket.
template <CensoredPredictive Law>
std::vector<double> sweep_quantiles(const Law& law, std::span<const double> u) {
    std::vector<double> out(u.size());
    const double top = law.x_max();
    const double below_max = law.cdf_below_max();
    double prev = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] >= below_max) {
            out[i] = top;
            continue;
        }
        double lo = prev;
        double hi = top;
        double t = prev;
        for (int it = 0; it < 100; ++it) {
            const double f = law.cdf(t);
            if (f < u[i]) lo = t;
            else hi = t;
            if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
            const double dens = t > 0.0 ? law.pdf(t).value : 0.0;
            double next = dens > 0.0 && std::isfinite(dens) ? t + (u[i] - f) / dens : lo;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - t) <= 1e-13 * std::max(1.0, t)) {
                t = next;
                break;
            }
            t = next;
        }
        out[i] = t;
        prev = t;
    }
    return out;
}

}  // namespace detail

/// n draws stratified on the probability scale, one uniform per stratum
/// [i/n, (i+1)/n), mapped through the inverse CDF. Component mixtures map
/// the stretch of u owned by each component through that component's
/// inverse (composition), which keeps the strata and avoids evaluating the
/// full mixture CDF. Laws without an inverse fall back to i.i.d. draws.
template <class Law>
[[nodiscard]] std::vector<double> stratified_sample(const Law& law, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::min((static_cast<double>(i) + unif(rng)) / static_cast<double>(n),
                        std::nextafter(1.0, 0.0));
    }
    if constexpr (ComponentMixture<Law>) {
        std::vector<double> out;
        out.reserve(n);
        const auto& comps = law.components();
        double lo = 0.0;
        std::size_t i = 0;
        std::vector<double> local;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            const double w = comps[k].weight;
            const double hi = k + 1 == comps.size() ? 1.0 : lo + w;
            local.clear();
            for (; i < n && u[i] < hi; ++i) {
                local.push_back(std::clamp((u[i] - lo) / w, 0.0, std::nextafter(1.0, 0.0)));
            }
            if (!local.empty()) {
                const auto q = detail::sweep_quantiles(
                    detail::CensoredBeta{&comps[k].beta, comps[k].point_mass}, local);
                out.insert(out.end(), q.begin(), q.end());
            }
            lo = hi;
        }
        return out;
    } else if constexpr (CensoredPredictive<Law>) {
        return detail::sweep_quantiles(law, u);
    } else if constexpr (InvertibleLaw<Law>) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = law.quantile(std::max(u[i], 1e-300));
        return out;
    } else {
        std::vector<double> out(n);
        for (auto& v : out) v = law.draw(rng);
        return out;
    }
}

/// Monte Carlo CRPS with n draws. Invertible laws are sampled by stratified
/// inverse-CDF draws and scored as an n-member ensemble; other laws use
/// i.i.d. draws and the unbiased pair term.
template <class Law>
[[nodiscard]] double crps_mc(const Law& law, double x, std::size_t n, std::uint64_t seed) {
    if constexpr (ComponentMixture<Law> || CensoredPredictive<Law> || InvertibleLaw<Law>) {
        return crps_ensemble(stratified_sample(law, n, seed), x);
    } else {
        Rng rng(seed);
        std::vector<double> s(n);
        for (auto& v : s) v = law.draw(rng);
        return crps_from_sample(std::move(s), x);
    }
}

struct CrpsOptions {
    std::size_t mc_samples = kDefaultMcSamples;
    std::uint64_t seed = kDefaultSeed;
};

/// Exact for EmpiricalEnsemble, Monte Carlo otherwise.
[[nodiscard]] double crps(const ProbForecast& f, double x, const CrpsOptions& options = {});

/// Negative log predictive density (point-mass probability at x_max),
/// floored at 1e-12; x is floored at 0.01 km first. Throws
/// UnsupportedScoreError for ensembles.
[[nodiscard]] double logs(const ProbForecast& f, double x);

[[nodiscard]] double cdf(const ProbForecast& f, double y);
[[nodiscard]] double quantile(const ProbForecast& f, double p);
[[nodiscard]] double predictive_mean(const ProbForecast& f);

/// (F(y) - 1{x <= y})^2.
[[nodiscard]] double brier(const ProbForecast& f, double x, double y);

/// 1 - mean_score / mean_score_ref; DomainError when the reference is not positive.
[[nodiscard]] double skill_score(double mean_score, double mean_score_ref);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Nominal level (K-1)/(K+1) of a K-member ensemble's central interval.
[[nodiscard]] double nominal_level(std::size_t K);

[[nodiscard]] Interval central_interval(const ProbForecast& f, double level);

struct CoverageWidth {
    double coverage_pct = 0.0;
    double mean_width = 0.0;
};

[[nodiscard]] CoverageWidth coverage_and_width(std::span<const Interval> intervals,
                                               std::span<const double> observations);

/// Randomized PIT: a uniform draw between F(x-) and F(x), so the value is
/// F(x) where F is continuous and uniform on [F(x_max-), 1] at x_max.
[[nodiscard]] double pit(const ProbForecast& f, double x, Rng& rng);

/// Rank of x among the members in 1..K+1, ties broken uniformly at random.
[[nodiscard]] std::size_t verification_rank(std::span<const double> members, double x, Rng& rng);

/// Counts of values in [0,1] over `bins` equal bins (1 goes to the last bin).
[[nodiscard]] std::vector<std::size_t> histogram(std::span<const double> values, std::size_t bins);

struct PointErrors {
    double rmse = 0.0;
    double mae = 0.0;
};

/// RMSE of `mean_forecasts` and MAE of `median_forecasts` against the observations.
[[nodiscard]] PointErrors point_errors(std::span<const double> mean_forecasts,
                                       std::span<const double> median_forecasts,
                                       std::span<const double> observations);
[[nodiscard]] PointErrors point_errors(std::span<const double> forecasts,
                                       std::span<const double> observations);

struct BootstrapOptions {
    std::size_t replicates = 2000;
    double mean_block_len = 0.0;  ///< 0 selects ceil(n^(1/3))
    double level = 0.95;
    std::uint64_t seed = kDefaultSeed;
};

[[nodiscard]] double default_block_length(std::size_t n);

/// Politis-Romano resampling indices: blocks of geometric length with the
/// given mean, starting uniformly, wrapping circularly.
[[nodiscard]] std::vector<std::size_t> stationary_indices(std::size_t n, double mean_block_len,
                                                          Rng& rng);

/// Percentile CI of the mean of a time-ordered series. Needs at least 10 values.
[[nodiscard]] Interval stationary_bootstrap(std::span<const double> series,
                                            const BootstrapOptions& options = {});

/// Percentile CI of 1 - mean(score)/mean(ref), both series resampled with
/// the same blocks.
[[nodiscard]] Interval stationary_bootstrap_skill(std::span<const double> score,
                                                  std::span<const double> ref,
                                                  const BootstrapOptions& options = {});

// ------------------------------------------------------------------ report

struct CaseKey {
    StationId station;
    DateTime valid;
    double obs = 0.0;

    [[nodiscard]] bool same_case(const CaseKey& o) const {
        return station == o.station && valid == o.valid;
    }
};

struct MethodSeries {
    std::string method;
    std::vector<CaseKey> keys;
    std::vector<ProbForecast> forecasts;
};

struct LeadInput {
    int lead_h = 0;
    std::vector<MethodSeries> methods;
    std::size_t excluded = 0;  ///< cases dropped for a missing observation or forecast
};

struct ReportConfig {
    std::vector<double> thresholds{1.0, 3.0, 5.0, 10.0};
    CrpsOptions crps{};
    BootstrapOptions bootstrap{};
    double interval_level = 50.0 / 52.0;  ///< (K-1)/(K+1)
    std::size_t pit_bins = 20;
    std::string reference = "climatology";  ///< skill-score reference
    std::string baseline = "raw";           ///< denominator of the CRPS proportion
};

struct MetricValue {
    std::string name;
    double value = 0.0;
    std::optional<Interval> ci;
};

struct MethodReport {
    std::string method;
    std::vector<MetricValue> metrics;
    std::vector<std::size_t> pit_histogram;   ///< parametric forecasts
    std::vector<std::size_t> rank_histogram;  ///< ensembles
    std::vector<std::string> notices;

    [[nodiscard]] const MetricValue* metric(const std::string& name) const;
};

struct LeadReport {
    int lead_h = 0;
    std::size_t cases = 0;
    std::size_t excluded = 0;
    std::vector<MethodReport> methods;

    [[nodiscard]] const MethodReport* method(const std::string& name) const;
};

struct VerificationReport {
    double interval_level = 0.0;
    std::vector<LeadReport> leads;
    /// Mean CRPS over all leads and cases, in percent of the baseline's.
    std::vector<std::pair<std::string, double>> crps_pct_of_baseline;
};

/// Scores every method on its cases, which must be the same set for all
/// methods of a lead time (DomainError otherwise). Cases are ordered by
/// valid time, then station, before bootstrapping.
[[nodiscard]] VerificationReport build_report(std::vector<LeadInput> leads,
                                              const ReportConfig& config);

}  // namespace viscal
