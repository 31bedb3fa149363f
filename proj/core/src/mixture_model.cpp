#include "viscal/mixture_model.hpp"

#include "viscal/numeric.hpp"
#include "viscal/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace viscal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinGammaMean = 1e-6;
constexpr double kMinGammaVar = 1e-8;
constexpr double kMinScale = 1e-6;

struct LinkValues {
    double omega = 0.0;
    double m = 0.0;
    double v = 0.0;
    double mu = 0.0;
    double sigma = 0.0;

    [[nodiscard]] bool feasible() const {
        return m > kMinGammaMean && v > kMinGammaVar && sigma > kMinScale && std::isfinite(mu) &&
               std::isfinite(m) && std::isfinite(v) && std::isfinite(sigma);
    }
};

LinkValues link_values(const MixtureParams& p, const EnsembleStats& stats,
                       std::optional<double> f_hres, std::optional<double> f_ctrl) {
    const SeasonalBasis basis = seasonal_basis(stats.day_of_year);
    const double hres = p.has_hres ? f_hres.value_or(0.0) : 0.0;
    const double ctrl = p.has_ctrl ? f_ctrl.value_or(0.0) : 0.0;
    const double mean = stats.mean_ens;
    const double sd = stats.sd_ens;
    LinkValues lv;
    lv.omega = 1.0 / (1.0 + std::exp(-p.gamma_w * mean));
    lv.m = p.a[0] + p.a[1] * p.a[1] * hres + p.a[2] * p.a[2] * ctrl + p.a[3] * p.a[3] * mean +
           p.a[4] * basis.b1 + p.a[5] * basis.b2;
    lv.v = p.b[0] + p.b[1] * p.b[1] * sd * sd;
    lv.mu = p.alpha[0] + p.alpha[1] * p.alpha[1] * hres + p.alpha[2] * p.alpha[2] * ctrl +
            p.alpha[3] * p.alpha[3] * mean + p.alpha[4] * basis.b1 + p.alpha[5] * basis.b2;
    lv.sigma = p.beta[0] + p.beta[1] * p.beta[1] * sd;
    return lv;
}

void require_members(const MixtureParams& p, std::optional<double> f_hres,
                     std::optional<double> f_ctrl) {
    if (p.has_hres && !f_hres) throw MissingForecastError("link: HRES forecast missing");
    if (p.has_ctrl && !f_ctrl) throw MissingForecastError("link: CTRL forecast missing");
}

double log_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

SeasonalBasis seasonal_basis(int day_of_year) {
    if (day_of_year < 1 || day_of_year > 366) {
        throw DomainError("seasonal_basis: day of year must lie in 1..366");
    }
    const double angle = 2.0 * std::numbers::pi * day_of_year / 365.0;
    return {std::sin(angle), std::cos(angle)};
}

// ------------------------------------------------------------ parameters

std::size_t MixtureParams::free_count() const noexcept {
    return 17 - (has_hres ? 0 : 2) - (has_ctrl ? 0 : 2);
}

std::vector<double> MixtureParams::to_free() const {
    std::vector<double> out;
    out.reserve(free_count());
    out.push_back(gamma_w);
    auto push_location = [&](const std::array<double, 6>& c) {
        out.push_back(c[0]);
        if (has_hres) out.push_back(c[1]);
        if (has_ctrl) out.push_back(c[2]);
        out.insert(out.end(), c.begin() + 3, c.end());
    };
    push_location(a);
    out.insert(out.end(), b.begin(), b.end());
    push_location(alpha);
    out.insert(out.end(), beta.begin(), beta.end());
    return out;
}

MixtureParams MixtureParams::from_free(std::span<const double> free, bool has_hres, bool has_ctrl) {
    MixtureParams p;
    p.has_hres = has_hres;
    p.has_ctrl = has_ctrl;
    if (free.size() != p.free_count()) {
        throw ParameterError("MixtureParams::from_free: expected " +
                             std::to_string(p.free_count()) + " values");
    }
    std::size_t i = 0;
    p.gamma_w = free[i++];
    auto pull_location = [&](std::array<double, 6>& c) {
        c[0] = free[i++];
        c[1] = has_hres ? free[i++] : 0.0;
        c[2] = has_ctrl ? free[i++] : 0.0;
        for (std::size_t k = 3; k < 6; ++k) c[k] = free[i++];
    };
    pull_location(p.a);
    p.b[0] = free[i++];
    p.b[1] = free[i++];
    pull_location(p.alpha);
    p.beta[0] = free[i++];
    p.beta[1] = free[i++];
    return p;
}

MixtureCase make_mixture_case(const ForecastCase& fc) {
    MixtureCase mc;
    mc.stats = ensemble_stats(fc);
    mc.f_hres = fc.f_hres;
    mc.f_ctrl = fc.f_ctrl;
    mc.x_max = fc.x_max;
    mc.obs = std::clamp(fc.obs.value_or(fc.x_max), kMinScoredObs, fc.x_max);
    return mc;
}

// ------------------------------------------------------------ predictive

MixturePredictive::MixturePredictive(double omega, CensoredLaw<GammaLaw> gamma_part,
                                     CensoredLaw<TruncNormalLaw> tnorm_part)
    : omega_(omega), gamma_(std::move(gamma_part)), tnorm_(std::move(tnorm_part)) {
    if (!(omega >= 0.0 && omega <= 1.0)) {
        throw ParameterError("mixture: weight must lie in [0, 1]");
    }
    if (gamma_.x_max() != tnorm_.x_max()) {
        throw ParameterError("mixture: components censored at different bounds");
    }
}

MixedDensity MixturePredictive::pdf(double x) const {
    const auto g = gamma_.density(x);
    const auto h = tnorm_.density(x);
    return {(1.0 - omega_) * g.value + omega_ * h.value, g.discrete};
}

double MixturePredictive::cdf(double x) const {
    if (x >= x_max()) return 1.0;
    return (1.0 - omega_) * gamma_.cdf(x) + omega_ * tnorm_.cdf(x);
}

double MixturePredictive::point_mass() const noexcept {
    return (1.0 - omega_) * gamma_.point_mass() + omega_ * tnorm_.point_mass();
}

double MixturePredictive::quantile(double p) const {
    detail::check_probability(p);
    const double below = cdf_below_max();
    if (p > below) return x_max();
    const double xm = x_max();
    auto left_cdf = [&](double x) { return x >= xm ? below : cdf(x); };
    return std::fmin(bisect_quantile(left_cdf, p, xm), xm);
}

double MixturePredictive::mean() const {
    return (1.0 - omega_) * gamma_.mean() + omega_ * tnorm_.mean();
}

double MixturePredictive::draw(Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < omega_) return tnorm_.draw(rng);
    return gamma_.draw(rng);
}

MixturePredictive link(const MixtureParams& params, const EnsembleStats& stats,
                       std::optional<double> f_hres, std::optional<double> f_ctrl, double x_max) {
    require_members(params, f_hres, f_ctrl);
    const LinkValues lv = link_values(params, stats, f_hres, f_ctrl);
    if (!lv.feasible()) {
        std::ostringstream msg;
        msg << "link: infeasible gamma mean " << lv.m << ", variance " << lv.v
            << " or normal scale " << lv.sigma;
        throw InfeasibleLinkError(msg.str());
    }
    const double shape = lv.m * lv.m / lv.v;
    const double scale = lv.v / lv.m;
    return MixturePredictive(lv.omega, CensoredLaw<GammaLaw>(GammaLaw(shape, scale), x_max),
                             CensoredLaw<TruncNormalLaw>(TruncNormalLaw(lv.mu, lv.sigma), x_max));
}

MixturePredictive link(const MixtureParams& params, const MixtureCase& mc) {
    return link(params, mc.stats, mc.f_hres, mc.f_ctrl, mc.x_max);
}

// -------------------------------------------------------------- scoring

double mixture_log_score(const MixtureParams& params, const MixtureCase& mc) {
    const LinkValues lv = link_values(params, mc.stats, mc.f_hres, mc.f_ctrl);
    if (!lv.feasible()) return kInf;
    const double shape = lv.m * lv.m / lv.v;
    const double scale = lv.v / lv.m;
    const GammaLaw gamma(shape, scale);
    const TruncNormalLaw tnorm(lv.mu, lv.sigma);
    double log_density = 0.0;
    if (mc.obs >= mc.x_max) {
        const double mass = (1.0 - lv.omega) * gamma.sf(mc.x_max) + lv.omega * tnorm.sf(mc.x_max);
        log_density = std::log(mass);
    } else {
        const double lg = lv.omega < 1.0 ? std::log1p(-lv.omega) + gamma.log_pdf(mc.obs) : -kInf;
        const double lh = lv.omega > 0.0 ? std::log(lv.omega) + tnorm.log_pdf(mc.obs) : -kInf;
        log_density = log_add(lg, lh);
    }
    return -std::max(log_density, std::log(kDensityFloor));
}

double logs_objective(const MixtureParams& params, std::span<const MixtureCase> cases) {
    if (cases.empty()) {
        throw FitError("logs_objective: empty training set");
    }
    std::vector<double> scores;
    scores.reserve(cases.size());
    for (const auto& mc : cases) {
        const double s = mixture_log_score(params, mc);
        if (!std::isfinite(s)) return kInf;
        scores.push_back(s);
    }
    return pairwise_mean(scores);
}

// --------------------------------------------------------------- fitting

MixtureParams cold_start(std::span<const MixtureCase> cases, bool has_hres, bool has_ctrl) {
    std::vector<double> obs;
    obs.reserve(cases.size());
    for (const auto& c : cases) obs.push_back(c.obs);
    const double mean = pairwise_mean(obs);
    double ss = 0.0;
    for (double o : obs) ss += (o - mean) * (o - mean);
    const double var = obs.size() > 1 ? ss / static_cast<double>(obs.size() - 1) : 0.0;

    MixtureParams p;
    p.has_hres = has_hres;
    p.has_ctrl = has_ctrl;
    p.gamma_w = 0.0;
    p.a = {mean, 0.0, 0.0, 1.0, 0.0, 0.0};
    p.b = {var, 1.0};
    p.alpha = {mean, 0.0, 0.0, 1.0, 0.0, 0.0};
    p.beta = {std::sqrt(var), 1.0};
    return p;
}

namespace {

// Ensemble-free start: moments of the observations only; feasible whenever
// the observations are not all equal.
MixtureParams moment_start(std::span<const MixtureCase> cases, bool has_hres, bool has_ctrl) {
    MixtureParams p = cold_start(cases, has_hres, has_ctrl);
    p.a[3] = 0.0;
    p.alpha[3] = 0.0;
    p.b = {std::max(p.b[0], 1.0), 0.0};
    p.beta = {std::max(p.beta[0], 1.0), 0.0};
    return p;
}

// Gamma component on the observations below the median, truncated normal on
// those above, with the normal weight rising with the ensemble mean. The
// symmetric cold start tends to settle in the basin where the two
// components swap roles.
MixtureParams split_start(std::span<const MixtureCase> cases, bool has_hres, bool has_ctrl) {
    std::vector<double> obs;
    obs.reserve(cases.size());
    for (const auto& c : cases) obs.push_back(c.obs);
    std::sort(obs.begin(), obs.end());
    const auto half = obs.begin() + static_cast<std::ptrdiff_t>(obs.size() / 2);
    auto moments = [](auto first, auto last) {
        const auto n = static_cast<double>(std::distance(first, last));
        if (n < 1.0) return std::pair{0.0, 1.0};
        double sum = 0.0;
        for (auto it = first; it != last; ++it) sum += *it;
        const double mean = sum / n;
        double ss = 0.0;
        for (auto it = first; it != last; ++it) ss += (*it - mean) * (*it - mean);
        return std::pair{mean, std::max(ss / n, 1e-2)};
    };
    const auto [mean_lo, var_lo] = moments(obs.begin(), half);
    const auto [mean_hi, var_hi] = moments(half, obs.end());

    MixtureParams p;
    p.has_hres = has_hres;
    p.has_ctrl = has_ctrl;
    p.gamma_w = 0.1;
    p.a = {std::max(mean_lo, 0.1), 0.0, 0.0, 0.3, 0.0, 0.0};
    p.b = {var_lo, 0.5};
    p.alpha = {mean_hi, 0.0, 0.0, 0.3, 0.0, 0.0};
    p.beta = {std::sqrt(var_hi), 0.5};
    return p;
}

std::vector<double> initial_steps(const std::vector<double>& x) {
    std::vector<double> steps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        steps[i] = std::fabs(x[i]) > 1e-3 ? 0.1 * std::fabs(x[i]) : 0.1;
    }
    steps[0] = std::fabs(x[0]) > 1e-3 ? 0.1 * std::fabs(x[0]) : 0.05;  // omega slope
    return steps;
}

}  // namespace

MixtureFit fit_mixture(std::span<const MixtureCase> cases, bool has_hres, bool has_ctrl,
                       const std::optional<MixtureParams>& init, const MixtureFitOptions& options) {
    if (cases.size() < options.min_cases) {
        throw FitError("fit_mixture: " + std::to_string(cases.size()) +
                       " training cases, at least " + std::to_string(options.min_cases) +
                       " required");
    }
    const auto objective = [&](std::span<const double> x) {
        return logs_objective(MixtureParams::from_free(x, has_hres, has_ctrl), cases);
    };
    auto run_from = [&](const MixtureParams& start) {
        const std::vector<double> x0 = start.to_free();
        const auto result = nelder_mead(objective, x0, initial_steps(x0), options.simplex);
        MixtureFit fit;
        fit.params = MixtureParams::from_free(result.x, has_hres, has_ctrl);
        fit.objective = result.value;
        fit.evals = result.evals;
        fit.converged = result.converged;
        return fit;
    };

    std::ostringstream diag;
    auto feasible = [&](const MixtureParams& start, const char* label) {
        const double f0 = logs_objective(start, cases);
        if (!std::isfinite(f0)) diag << ' ' << label << " start infeasible;";
        return std::isfinite(f0);
    };

    if (init) {
        MixtureParams warm = *init;
        warm.has_hres = has_hres;
        warm.has_ctrl = has_ctrl;
        if (!has_hres) warm.a[1] = warm.alpha[1] = 0.0;
        if (!has_ctrl) warm.a[2] = warm.alpha[2] = 0.0;
        if (feasible(warm, "warm")) return run_from(warm);
    }

    std::optional<MixtureFit> best;
    for (const auto& [start, label] :
         {std::pair{cold_start(cases, has_hres, has_ctrl), "cold"},
          std::pair{split_start(cases, has_hres, has_ctrl), "split"}}) {
        if (!feasible(start, label)) continue;
        auto fit = run_from(start);
        if (!best || fit.objective < best->objective) {
            if (best) fit.evals += best->evals;
            best = std::move(fit);
        } else {
            best->evals += fit.evals;
        }
    }
    if (best) return *best;

    const auto fallback = moment_start(cases, has_hres, has_ctrl);
    if (feasible(fallback, "moment")) return run_from(fallback);
    throw FitError("fit_mixture: no feasible starting point;" + diag.str());
}

}  // namespace viscal
