#pragma once

#include "viscal/data_io.hpp"
#include "viscal/distributions.hpp"
#include "viscal/numeric.hpp"
#include "viscal/simplex.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace viscal {

/// Annual harmonics of the day of the year.
struct SeasonalBasis {
    double b1 = 0.0;  ///< sin(2 pi d / 365)
    double b2 = 1.0;  ///< cos(2 pi d / 365)
};

/// The 365 divisor is kept for leap years too. Throws DomainError outside 1..366.
[[nodiscard]] SeasonalBasis seasonal_basis(int day_of_year);

/// Coefficients of the censored gamma / truncated normal mixture.
///
/// Member weights enter squared (a1^2 f_hres, a3^2 mean_ens, b1^2 sd^2, ...),
/// so the unsquared values are optimized freely. Coefficients of an absent
/// member group (a1, alpha1 without HRES; a2, alpha2 without CTRL) are held
/// at exactly zero and are not part of the free vector.
struct MixtureParams {
    double gamma_w = 0.0;
    std::array<double, 6> a{};
    std::array<double, 2> b{};
    std::array<double, 6> alpha{};
    std::array<double, 2> beta{};
    bool has_hres = false;
    bool has_ctrl = false;

    /// 17 with HRES and CTRL, 15 with only one of them, 13 with neither.
    [[nodiscard]] std::size_t free_count() const noexcept;
    [[nodiscard]] std::vector<double> to_free() const;
    [[nodiscard]] static MixtureParams from_free(std::span<const double> free, bool has_hres,
                                                 bool has_ctrl);
};

/// One training or verification case reduced to the link covariates.
struct MixtureCase {
    EnsembleStats stats;
    std::optional<double> f_hres;
    std::optional<double> f_ctrl;
    double obs = 0.0;  ///< already floored at kMinScoredObs
    double x_max = 0.0;
};

/// Requires ensemble members; obs defaults to x_max when absent (callers
/// that score must filter on ForecastCase::obs first).
[[nodiscard]] MixtureCase make_mixture_case(const ForecastCase& fc);

/// Per-case predictive law: (1 - omega) censored gamma + omega censored
/// zero-truncated normal, both censored at x_max.
class MixturePredictive {
public:
    MixturePredictive(double omega, CensoredLaw<GammaLaw> gamma_part,
                      CensoredLaw<TruncNormalLaw> tnorm_part);

    [[nodiscard]] double omega() const noexcept { return omega_; }
    [[nodiscard]] const CensoredLaw<GammaLaw>& gamma_part() const noexcept { return gamma_; }
    [[nodiscard]] const CensoredLaw<TruncNormalLaw>& tnorm_part() const noexcept { return tnorm_; }
    [[nodiscard]] double x_max() const noexcept { return gamma_.x_max(); }

    [[nodiscard]] MixedDensity pdf(double x) const;
    [[nodiscard]] double cdf(double x) const;
    [[nodiscard]] double cdf_below_max() const noexcept { return 1.0 - point_mass(); }
    /// Combined mass of both components at x_max.
    [[nodiscard]] double point_mass() const noexcept;
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] double mean() const;
    [[nodiscard]] double draw(Rng& rng) const;

private:
    double omega_;
    CensoredLaw<GammaLaw> gamma_;
    CensoredLaw<TruncNormalLaw> tnorm_;
};

/// Evaluates the link functions. Throws InfeasibleLinkError when the gamma
/// mean, gamma variance or normal scale falls below its feasibility floor.
[[nodiscard]] MixturePredictive link(const MixtureParams& params, const EnsembleStats& stats,
                                     std::optional<double> f_hres, std::optional<double> f_ctrl,
                                     double x_max);
[[nodiscard]] MixturePredictive link(const MixtureParams& params, const MixtureCase& mc);

/// Mean negative log predictive density over the cases (point-mass
/// probability at x_max); +inf if any case has an infeasible link.
[[nodiscard]] double logs_objective(const MixtureParams& params, std::span<const MixtureCase> cases);

/// Single-case log score, +inf when the link is infeasible.
[[nodiscard]] double mixture_log_score(const MixtureParams& params, const MixtureCase& mc);

struct MixtureFitOptions {
    std::size_t min_cases = 30;
    SimplexOptions simplex{};
};

struct MixtureFit {
    MixtureParams params;
    double objective = 0.0;
    std::size_t evals = 0;
    bool converged = false;
};

/// Cold-start coefficients derived from training observation moments.
[[nodiscard]] MixtureParams cold_start(std::span<const MixtureCase> cases, bool has_hres,
                                       bool has_ctrl);

/// Minimizes logs_objective by Nelder-Mead with one restart. `init` is a
/// warm start; without one the cold start is used. Throws FitError below
/// min_cases or when no feasible start exists.
[[nodiscard]] MixtureFit fit_mixture(std::span<const MixtureCase> cases, bool has_hres,
                                     bool has_ctrl, const std::optional<MixtureParams>& init = {},
                                     const MixtureFitOptions& options = {});

}  // namespace viscal
