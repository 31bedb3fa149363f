#pragma once

#include "viscal/errors.hpp"

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace viscal {

using Rng = std::mt19937_64;

/// Value of a mixed (continuous + point mass) law at a point. When
/// `discrete` is set, `value` is a probability mass, otherwise a density.
struct MixedDensity {
    double value = 0.0;
    bool discrete = false;
};

/// Gamma law with shape kappa and scale theta.
class GammaLaw {
public:
    GammaLaw(double shape, double scale);

    [[nodiscard]] double shape() const noexcept { return shape_; }
    [[nodiscard]] double scale() const noexcept { return scale_; }

    /// Returns +inf at x = 0 when shape < 1.
    [[nodiscard]] double pdf(double x) const;
    [[nodiscard]] double log_pdf(double x) const;
    [[nodiscard]] double cdf(double x) const;
    [[nodiscard]] double sf(double x) const;
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] double mean() const noexcept { return shape_ * scale_; }
    /// E[X; X < c].
    [[nodiscard]] double partial_mean(double c) const;
    [[nodiscard]] double draw(Rng& rng) const;

private:
    double shape_;
    double scale_;
};

/// Normal law N(mu, sigma^2) left-truncated at zero.
class TruncNormalLaw {
public:
    TruncNormalLaw(double location, double scale);

    [[nodiscard]] double location() const noexcept { return mu_; }
    [[nodiscard]] double scale() const noexcept { return sigma_; }

    [[nodiscard]] double pdf(double x) const;
    [[nodiscard]] double log_pdf(double x) const;
    [[nodiscard]] double cdf(double x) const;
    [[nodiscard]] double sf(double x) const;
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] double mean() const;
    [[nodiscard]] double partial_mean(double c) const;
    [[nodiscard]] double draw(Rng& rng) const;

private:
    double mu_;
    double sigma_;
    double lower_z_;     // standardized truncation point -mu/sigma
    double log_norm_;    // log(1 - Phi(lower_z_))
};

/// Beta law rescaled to the support [0, x_max].
class BetaOnRange {
public:
    BetaOnRange(double alpha, double beta, double x_max);

    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double x_max() const noexcept { return x_max_; }

    [[nodiscard]] double pdf(double x) const;
    [[nodiscard]] double log_pdf(double x) const;
    [[nodiscard]] double cdf(double x) const;
    [[nodiscard]] double sf(double x) const { return 1.0 - cdf(x); }
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] double mean() const noexcept { return x_max_ * alpha_ / (alpha_ + beta_); }
    [[nodiscard]] double sd() const noexcept;
    [[nodiscard]] double draw(Rng& rng) const;

private:
    double alpha_;
    double beta_;
    double x_max_;
    double log_norm_;  // log(B(alpha, beta) * x_max)
};

template <class L>
concept ContinuousLaw = requires(const L& law, double x, Rng& rng) {
    { law.pdf(x) } -> std::convertible_to<double>;
    { law.log_pdf(x) } -> std::convertible_to<double>;
    { law.cdf(x) } -> std::convertible_to<double>;
    { law.sf(x) } -> std::convertible_to<double>;
    { law.quantile(x) } -> std::convertible_to<double>;
    { law.partial_mean(x) } -> std::convertible_to<double>;
    { law.draw(rng) } -> std::convertible_to<double>;
};

/// Right-censored version of a law on [0, inf): the mass above x_max is
/// collapsed into a point mass at x_max.
template <ContinuousLaw Base>
class CensoredLaw {
public:
    CensoredLaw(Base base, double x_max) : base_(std::move(base)), x_max_(x_max) {
        if (!(x_max > 0.0) || !std::isfinite(x_max)) {
            throw ParameterError("censored law: x_max must be positive and finite");
        }
        point_mass_ = base_.sf(x_max_);
    }

    [[nodiscard]] const Base& base() const noexcept { return base_; }
    [[nodiscard]] double x_max() const noexcept { return x_max_; }
    [[nodiscard]] double point_mass() const noexcept { return point_mass_; }

    /// Base density below x_max; the point mass at x_max.
    [[nodiscard]] MixedDensity density(double x) const {
        check_support(x);
        if (x == x_max_) return {point_mass_, true};
        return {base_.pdf(x), false};
    }

    [[nodiscard]] double log_density(double x) const {
        check_support(x);
        if (x == x_max_) return std::log(point_mass_);
        return base_.log_pdf(x);
    }

    [[nodiscard]] double cdf(double x) const {
        if (x >= x_max_) return 1.0;
        return base_.cdf(x);
    }

    /// F(x_max^-), the continuous mass.
    [[nodiscard]] double cdf_below_max() const noexcept { return 1.0 - point_mass_; }

    [[nodiscard]] double quantile(double p) const;

    [[nodiscard]] double mean() const {
        return base_.partial_mean(x_max_) + x_max_ * point_mass_;
    }

    [[nodiscard]] double draw(Rng& rng) const {
        const double x = base_.draw(rng);
        return x < x_max_ ? x : x_max_;
    }

private:
    void check_support(double x) const {
        if (!(x >= 0.0) || x > x_max_) {
            throw DomainError("censored law: x outside [0, x_max]");
        }
    }

    Base base_;
    double x_max_;
    double point_mass_ = 0.0;
};

namespace detail {

/// Validates p in (0,1) and throws DomainError otherwise.
void check_probability(double p);

}  // namespace detail

template <ContinuousLaw Base>
double CensoredLaw<Base>::quantile(double p) const {
    detail::check_probability(p);
    if (p > cdf_below_max()) return x_max_;
    return std::fmin(base_.quantile(p), x_max_);
}

/// Inverts a nondecreasing CDF on [0, inf) by bracketed bisection to an
/// absolute tolerance of 1e-9 km. `upper` is an initial bracket guess that
/// is doubled until it covers p.
template <class Cdf>
double bisect_quantile(const Cdf& cdf, double p, double upper) {
    constexpr double kTol = 1e-9;
    double lo = 0.0;
    double hi = upper > 0.0 ? upper : 1.0;
    for (int i = 0; i < 2000 && cdf(hi) < p; ++i) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > kTol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// n i.i.d. draws from any law exposing `draw(Rng&)`; reproducible for a
/// fixed seed.
template <class Law>
std::vector<double> sample(const Law& law, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(law.draw(rng));
    }
    return out;
}

/// Solves the mean/sd equations of a beta law on [0, x_max]. Throws
/// InfeasibleMomentsError when sd^2 >= mean*(x_max - mean).
[[nodiscard]] BetaOnRange beta_from_moments(double mean, double sd, double x_max);

}  // namespace viscal
