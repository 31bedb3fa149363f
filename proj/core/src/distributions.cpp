#include "viscal/distributions.hpp"

#include "viscal/special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace viscal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace

namespace detail {

void check_probability(double p) {
    if (!std::isfinite(p)) {
        throw DomainError("quantile: probability must be finite");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("quantile: probability must lie in (0, 1)");
    }
}

}  // namespace detail

// ---------------------------------------------------------------- gamma

GammaLaw::GammaLaw(double shape, double scale) : shape_(shape), scale_(scale) {
    if (!positive_finite(shape) || !positive_finite(scale)) {
        throw ParameterError("gamma law: shape and scale must be positive and finite");
    }
}

double GammaLaw::log_pdf(double x) const {
    if (x < 0.0) return -kInf;
    if (x == 0.0) {
        if (shape_ < 1.0) return kInf;
        if (shape_ == 1.0) return -std::log(scale_);
        return -kInf;
    }
    return (shape_ - 1.0) * std::log(x) - x / scale_ - std::lgamma(shape_) -
           shape_ * std::log(scale_);
}

double GammaLaw::pdf(double x) const { return std::exp(log_pdf(x)); }

double GammaLaw::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    return special::gamma_p(shape_, x / scale_);
}

double GammaLaw::sf(double x) const {
    if (x <= 0.0) return 1.0;
    return special::gamma_q(shape_, x / scale_);
}

double GammaLaw::quantile(double p) const {
    detail::check_probability(p);
    const double upper = mean() + 10.0 * std::sqrt(shape_) * scale_;
    return bisect_quantile([this](double x) { return cdf(x); }, p, upper);
}

double GammaLaw::partial_mean(double c) const {
    if (c <= 0.0) return 0.0;
    return mean() * special::gamma_p(shape_ + 1.0, c / scale_);
}

double GammaLaw::draw(Rng& rng) const {
    std::gamma_distribution<double> dist(shape_, scale_);
    return dist(rng);
}

// ------------------------------------------------------ truncated normal

TruncNormalLaw::TruncNormalLaw(double location, double scale)
    : mu_(location), sigma_(scale) {
    if (!std::isfinite(location) || !positive_finite(scale)) {
        throw ParameterError("truncated normal: location must be finite and scale positive");
    }
    lower_z_ = -mu_ / sigma_;
    // log_normal_sf stays accurate when the truncation point sits far in the
    // upper tail (location << 0), where 1 - Phi cancels.
    log_norm_ = special::log_normal_sf(lower_z_);
}

double TruncNormalLaw::log_pdf(double x) const {
    if (x < 0.0) return -kInf;
    const double z = (x - mu_) / sigma_;
    return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma_) - log_norm_;
}

double TruncNormalLaw::pdf(double x) const { return std::exp(log_pdf(x)); }

double TruncNormalLaw::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    const double z = (x - mu_) / sigma_;
    if (z < 0.0) {
        const double num = special::normal_cdf(z) - special::normal_cdf(lower_z_);
        return std::fmax(0.0, num / std::exp(log_norm_));
    }
    return 1.0 - sf(x);
}

double TruncNormalLaw::sf(double x) const {
    if (x <= 0.0) return 1.0;
    const double z = (x - mu_) / sigma_;
    if (z < 0.0) return 1.0 - cdf(x);
    return std::fmin(1.0, std::exp(special::log_normal_sf(z) - log_norm_));
}

double TruncNormalLaw::quantile(double p) const {
    detail::check_probability(p);
    const double upper = std::fmax(mu_, 0.0) + 10.0 * sigma_;
    return bisect_quantile([this](double x) { return cdf(x); }, p, upper);
}

double TruncNormalLaw::mean() const {
    const double log_phi = -0.5 * lower_z_ * lower_z_ - 0.5 * std::log(2.0 * std::numbers::pi);
    return mu_ + sigma_ * std::exp(log_phi - log_norm_);
}

double TruncNormalLaw::partial_mean(double c) const {
    if (c <= 0.0) return 0.0;
    const double b = (c - mu_) / sigma_;
    // integral of x phi((x-mu)/sigma)/sigma over [0, c]
    const double mass = lower_z_ > 0.0
                            ? special::normal_sf(lower_z_) - special::normal_sf(b)
                            : special::normal_cdf(b) - special::normal_cdf(lower_z_);
    const double raw = mu_ * mass - sigma_ * (special::normal_pdf(b) - special::normal_pdf(lower_z_));
    return raw / std::exp(log_norm_);
}

double TruncNormalLaw::draw(Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lower_z_ <= 0.5) {
        std::normal_distribution<double> norm(0.0, 1.0);
        for (;;) {
            const double z = norm(rng);
            if (z >= lower_z_) return mu_ + sigma_ * z;
        }
    }
    // Exponential proposal for a far tail (Robert 1995).
    const double rate = 0.5 * (lower_z_ + std::sqrt(lower_z_ * lower_z_ + 4.0));
    for (;;) {
        const double z = lower_z_ - std::log(1.0 - unif(rng)) / rate;
        const double accept = std::exp(-0.5 * (z - rate) * (z - rate));
        if (unif(rng) <= accept) return mu_ + sigma_ * z;
    }
}

// ----------------------------------------------------------------- beta

BetaOnRange::BetaOnRange(double alpha, double beta, double x_max)
    : alpha_(alpha), beta_(beta), x_max_(x_max) {
    if (!positive_finite(alpha) || !positive_finite(beta)) {
        throw ParameterError("beta law: shapes must be positive and finite");
    }
    if (!positive_finite(x_max)) {
        throw ParameterError("beta law: x_max must be positive and finite");
    }
    log_norm_ = special::log_beta(alpha_, beta_) + std::log(x_max_);
}

double BetaOnRange::log_pdf(double x) const {
    if (x < 0.0 || x > x_max_) return -kInf;
    const double u = x / x_max_;
    double lhs = 0.0;
    double rhs = 0.0;
    if (alpha_ != 1.0) {
        lhs = u == 0.0 ? (alpha_ < 1.0 ? kInf : -kInf) : (alpha_ - 1.0) * std::log(u);
    }
    if (beta_ != 1.0) {
        rhs = u == 1.0 ? (beta_ < 1.0 ? kInf : -kInf) : (beta_ - 1.0) * std::log1p(-u);
    }
    return lhs + rhs - log_norm_;
}

double BetaOnRange::pdf(double x) const { return std::exp(log_pdf(x)); }

double BetaOnRange::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= x_max_) return 1.0;
    return special::beta_inc(alpha_, beta_, x / x_max_);
}

double BetaOnRange::quantile(double p) const {
    detail::check_probability(p);
    return bisect_quantile([this](double x) { return cdf(x); }, p, x_max_);
}

double BetaOnRange::sd() const noexcept {
    const double s = alpha_ + beta_;
    return x_max_ * std::sqrt(alpha_ * beta_) / (s * std::sqrt(s + 1.0));
}

double BetaOnRange::draw(Rng& rng) const {
    std::gamma_distribution<double> ga(alpha_, 1.0);
    std::gamma_distribution<double> gb(beta_, 1.0);
    const double a = ga(rng);
    const double b = gb(rng);
    const double total = a + b;
    if (total <= 0.0) return alpha_ >= beta_ ? x_max_ : 0.0;
    return x_max_ * (a / total);
}

BetaOnRange beta_from_moments(double mean, double sd, double x_max) {
    if (!positive_finite(x_max)) {
        throw ParameterError("beta_from_moments: x_max must be positive");
    }
    if (!(mean > 0.0 && mean < x_max)) {
        throw InfeasibleMomentsError("beta_from_moments: mean must lie in (0, x_max)");
    }
    if (!(sd > 0.0)) {
        throw InfeasibleMomentsError("beta_from_moments: sd must be positive");
    }
    const double r = mean / x_max;
    const double v = (sd / x_max) * (sd / x_max);
    const double spread = r * (1.0 - r);
    if (v >= spread) {
        throw InfeasibleMomentsError("beta_from_moments: variance too large for a beta law");
    }
    const double common = spread / v - 1.0;
    return BetaOnRange(r * common, (1.0 - r) * common, x_max);
}

}  // namespace viscal
