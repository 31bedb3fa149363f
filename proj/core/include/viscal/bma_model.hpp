#pragma once

#include "viscal/data_io.hpp"
#include "viscal/distributions.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace viscal {

/// Ensemble member groups. The 50 exchangeable ENS members share one
/// parameter set and one weight.
enum class MemberGroup { Hres, Ctrl, Ens };

[[nodiscard]] std::string_view to_string(MemberGroup g);
[[nodiscard]] MemberGroup parse_member_group(std::string_view s);

/// Number of member slots a group occupies in the mixture (1 or 50).
[[nodiscard]] std::size_t group_slots(MemberGroup g);

struct BmaGroupParams {
    double pi0 = 0.0;   ///< logit intercept of P(X = x_max)
    double pi1 = 0.0;   ///< logit slope on sqrt(f)
    double rho0 = 0.0;  ///< beta mean intercept, km
    double rho1 = 0.0;  ///< beta mean slope on sqrt(f)
    double weight = 0.0;
};

struct BmaParams {
    std::map<MemberGroup, BmaGroupParams> groups;
    double c0 = 1.0;  ///< common sd intercept
    double c1 = 0.0;  ///< common sd slope on sqrt(f)
    double x_max = 0.0;

    /// HRES + CTRL + 50 * ENS weights; 1 for a fitted model.
    [[nodiscard]] double effective_weight_sum() const;
};

struct LogitPair {
    double forecast = 0.0;
    bool at_max = false;
};

struct LogitCoefficients {
    double pi0 = 0.0;
    double pi1 = 0.0;
};

/// Logistic regression of the x_max indicator on sqrt(forecast) by damped
/// Newton. All-equal labels give pi1 = 0 and the Laplace-smoothed rate
/// (count+1)/(n+2); separable data are clipped so |pi0 + pi1 sqrt(f)| <= 15
/// over the training range.
[[nodiscard]] LogitCoefficients fit_logit(std::span<const LogitPair> pairs);

struct MeanPair {
    double forecast = 0.0;
    double obs = 0.0;
};

struct BetaMeanCoefficients {
    double rho0 = 0.0;
    double rho1 = 0.0;
};

/// Ordinary least squares of obs on sqrt(forecast); callers pass only
/// observations below x_max. A constant predictor gives rho1 = 0.
[[nodiscard]] BetaMeanCoefficients fit_beta_mean(std::span<const MeanPair> pairs);

/// P(X = x_max | f) from the logit model.
[[nodiscard]] double point_mass_probability(const BmaGroupParams& g, double forecast);

/// Point mass and continuous beta law of one member's component, after the
/// mean clamp to [0.5, x_max - 0.5], the 0.1 km sd floor and the 0.95
/// feasibility clamp on the sd.
struct BmaComponentLaw {
    double point_mass = 0.0;
    BetaOnRange beta;
};

[[nodiscard]] BmaComponentLaw component_law(const BmaGroupParams& g, double c0, double c1,
                                            double forecast, double x_max);

[[nodiscard]] MixedDensity component_pdf(const BmaGroupParams& g, double c0, double c1,
                                         double forecast, double x, double x_max);

class BmaPredictive {
public:
    struct Component {
        double weight = 0.0;
        double point_mass = 0.0;
        BetaOnRange beta;
    };

    BmaPredictive(std::vector<Component> components, double x_max);

    [[nodiscard]] const std::vector<Component>& components() const noexcept { return components_; }
    [[nodiscard]] double x_max() const noexcept { return x_max_; }

    [[nodiscard]] MixedDensity pdf(double x) const;
    [[nodiscard]] double log_pdf(double x) const;
    [[nodiscard]] double cdf(double x) const;
    [[nodiscard]] double cdf_below_max() const noexcept { return 1.0 - point_mass_; }
    [[nodiscard]] double point_mass() const noexcept { return point_mass_; }
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] double mean() const;
    [[nodiscard]] double draw(Rng& rng) const;

private:
    std::vector<Component> components_;
    std::vector<double> cumulative_;  // running weight sums for sampling
    double x_max_;
    double point_mass_ = 0.0;
};

/// One component per available member; weights of missing members are
/// dropped and the rest renormalized. Throws when no member is available.
[[nodiscard]] BmaPredictive bma_predict(const BmaParams& params, const ForecastCase& fc);

/// Training case with members canonicalized (ENS sorted ascending), so
/// member order cannot influence a fit.
struct BmaCase {
    double obs = 0.0;
    std::optional<double> hres;
    std::optional<double> ctrl;
    std::vector<double> ens;
};

/// Keeps cases having an observation and every member of `groups`.
[[nodiscard]] std::vector<BmaCase> make_bma_cases(std::span<const ForecastCase> cases,
                                                  std::span<const MemberGroup> groups);

/// Logit and beta-mean sub-fits for every group; ENS pools all 50
/// member/observation pairs per case. Weights are left at zero.
[[nodiscard]] BmaParams fit_bma_subfits(std::span<const BmaCase> cases,
                                        std::span<const MemberGroup> groups, double x_max);

struct EmOptions {
    double rel_tol = 1e-6;        ///< relative log-likelihood change at convergence
    std::size_t max_iter = 500;
    double m_step_tol = 1e-8;     ///< simplex tolerance for (c0, c1)
    std::size_t m_step_max_evals = 400;
};

struct BmaFit {
    BmaParams params;
    std::vector<double> loglik;  ///< observed-data log-likelihood, one entry per iterate
    std::size_t iterations = 0;
    bool converged = false;
};

/// Observed-data log-likelihood of the cases under `params`.
[[nodiscard]] double bma_log_likelihood(const BmaParams& params, std::span<const BmaCase> cases);

/// EM for the weights and the common sd coefficients given the sub-fits in
/// `subfits` (weights there are ignored). Starts from uniform weights,
/// c0 = sd of the continuous observations, c1 = 0.
[[nodiscard]] BmaFit fit_em(std::span<const BmaCase> cases, const BmaParams& subfits,
                            const EmOptions& options = {});

/// Sub-fits followed by EM.
[[nodiscard]] BmaFit fit_bma(std::span<const BmaCase> cases, std::span<const MemberGroup> groups,
                             double x_max, const EmOptions& options = {});

}  // namespace viscal
