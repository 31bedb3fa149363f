#include "viscal/bma_model.hpp"

#include "viscal/numeric.hpp"
#include "viscal/simplex.hpp"
#include "viscal/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace viscal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxLinearPredictor = 15.0;
constexpr double kMeanMargin = 0.5;
constexpr double kMinSd = 0.1;
constexpr double kFeasibleShrink = 0.95;

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double log_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double clamp_mean(double mean, double x_max) {
    return std::clamp(mean, kMeanMargin, x_max - kMeanMargin);
}

// sd link with floor and feasibility clamp: sd^2 < mean*(x_max - mean)
double clamp_sd(double sd, double mean, double x_max) {
    sd = std::max(sd, kMinSd);
    const double bound = std::sqrt(mean * (x_max - mean));
    if (sd >= bound) sd = kFeasibleShrink * bound;
    return sd;
}

struct BetaShapes {
    double alpha;
    double beta;
};

BetaShapes shapes_from_moments(double mean, double sd, double x_max) {
    const double r = mean / x_max;
    const double v = (sd / x_max) * (sd / x_max);
    const double common = r * (1.0 - r) / v - 1.0;
    return {r * common, (1.0 - r) * common};
}

}  // namespace

std::string_view to_string(MemberGroup g) {
    switch (g) {
        case MemberGroup::Hres: return "HRES";
        case MemberGroup::Ctrl: return "CTRL";
        case MemberGroup::Ens: return "ENS";
    }
    return "?";
}

MemberGroup parse_member_group(std::string_view s) {
    if (s == "HRES") return MemberGroup::Hres;
    if (s == "CTRL") return MemberGroup::Ctrl;
    if (s == "ENS") return MemberGroup::Ens;
    throw ParameterError("unknown member group '" + std::string(s) + "'");
}

std::size_t group_slots(MemberGroup g) { return g == MemberGroup::Ens ? kEnsembleSize : 1; }

double BmaParams::effective_weight_sum() const {
    double total = 0.0;
    for (const auto& [g, p] : groups) total += static_cast<double>(group_slots(g)) * p.weight;
    return total;
}

// ----------------------------------------------------------- sub-fits

LogitCoefficients fit_logit(std::span<const LogitPair> pairs) {
    if (pairs.empty()) {
        throw FitError("fit_logit: no training pairs");
    }
    const auto n = static_cast<double>(pairs.size());
    double count = 0.0;
    double x_lo = kInf;
    double x_hi = -kInf;
    for (const auto& p : pairs) {
        if (p.forecast < 0.0) throw DomainError("fit_logit: negative forecast");
        count += p.at_max ? 1.0 : 0.0;
        const double x = std::sqrt(p.forecast);
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
    }
    const auto smoothed = [&] { return LogitCoefficients{logit((count + 1.0) / (n + 2.0)), 0.0}; };
    if (count == 0.0 || count == n || x_hi - x_lo <= 0.0) {
        return smoothed();
    }

    auto loglik = [&](double b0, double b1) {
        double ll = 0.0;
        for (const auto& p : pairs) {
            const double eta = b0 + b1 * std::sqrt(p.forecast);
            // log sigma(eta) = -log1p(exp(-eta)); stable for both signs
            const double log_p = eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
            const double log_q = log_p - eta;
            ll += p.at_max ? log_p : log_q;
        }
        return ll;
    };

    double b0 = logit(count / n);
    double b1 = 0.0;
    double ll = loglik(b0, b1);
    for (int iter = 0; iter < 100; ++iter) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (const auto& p : pairs) {
            const double x = std::sqrt(p.forecast);
            const double prob = logistic(b0 + b1 * x);
            const double resid = (p.at_max ? 1.0 : 0.0) - prob;
            const double w = prob * (1.0 - prob);
            g0 += resid;
            g1 += resid * x;
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        if (std::hypot(g0, g1) < 1e-8) break;
        const double det = h00 * h11 - h01 * h01;
        if (!(det > 0.0)) break;
        const double d0 = (h11 * g0 - h01 * g1) / det;
        const double d1 = (-h01 * g0 + h00 * g1) / det;
        double step = 1.0;
        bool improved = false;
        for (int half = 0; half < 30; ++half, step *= 0.5) {
            const double nll = loglik(b0 + step * d0, b1 + step * d1);
            if (nll >= ll) {
                b0 += step * d0;
                b1 += step * d1;
                improved = nll > ll;
                ll = nll;
                break;
            }
        }
        if (!improved) break;
    }

    const double eta_max = std::max(std::fabs(b0 + b1 * x_lo), std::fabs(b0 + b1 * x_hi));
    if (eta_max > kMaxLinearPredictor) {
        const double shrink = kMaxLinearPredictor / eta_max;
        b0 *= shrink;
        b1 *= shrink;
    }
    return {b0, b1};
}

BetaMeanCoefficients fit_beta_mean(std::span<const MeanPair> pairs) {
    if (pairs.empty()) {
        throw FitError("fit_beta_mean: no observations below x_max");
    }
    const auto n = static_cast<double>(pairs.size());
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& p : pairs) {
        sx += std::sqrt(p.forecast);
        sy += p.obs;
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : pairs) {
        const double dx = std::sqrt(p.forecast) - mx;
        sxx += dx * dx;
        sxy += dx * (p.obs - my);
    }
    if (sxx <= 0.0) return {my, 0.0};
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

// --------------------------------------------------------- components

double point_mass_probability(const BmaGroupParams& g, double forecast) {
    return logistic(g.pi0 + g.pi1 * std::sqrt(forecast));
}

BmaComponentLaw component_law(const BmaGroupParams& g, double c0, double c1, double forecast,
                              double x_max) {
    if (forecast < 0.0) throw DomainError("component_law: negative forecast");
    const double root = std::sqrt(forecast);
    const double mean = clamp_mean(g.rho0 + g.rho1 * root, x_max);
    const double sd = clamp_sd(c0 + c1 * root, mean, x_max);
    return {point_mass_probability(g, forecast), beta_from_moments(mean, sd, x_max)};
}

MixedDensity component_pdf(const BmaGroupParams& g, double c0, double c1, double forecast, double x,
                           double x_max) {
    if (!(x >= 0.0) || x > x_max) {
        throw DomainError("component_pdf: x outside [0, x_max]");
    }
    const auto law = component_law(g, c0, c1, forecast, x_max);
    if (x == x_max) return {law.point_mass, true};
    return {(1.0 - law.point_mass) * law.beta.pdf(x), false};
}

// --------------------------------------------------------- predictive

BmaPredictive::BmaPredictive(std::vector<Component> components, double x_max)
    : components_(std::move(components)), x_max_(x_max) {
    if (components_.empty()) {
        throw ParameterError("BMA predictive: no components");
    }
    double total = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight >= 0.0)) throw ParameterError("BMA predictive: negative weight");
        total += c.weight;
    }
    if (!(total > 0.0)) throw ParameterError("BMA predictive: weights sum to zero");
    cumulative_.reserve(components_.size());
    double run = 0.0;
    for (auto& c : components_) {
        c.weight /= total;
        run += c.weight;
        cumulative_.push_back(run);
        point_mass_ += c.weight * c.point_mass;
    }
}

MixedDensity BmaPredictive::pdf(double x) const {
    if (!(x >= 0.0) || x > x_max_) {
        throw DomainError("BMA predictive: x outside [0, x_max]");
    }
    if (x == x_max_) return {point_mass_, true};
    double d = 0.0;
    for (const auto& c : components_) d += c.weight * (1.0 - c.point_mass) * c.beta.pdf(x);
    return {d, false};
}

double BmaPredictive::log_pdf(double x) const {
    if (!(x >= 0.0) || x > x_max_) {
        throw DomainError("BMA predictive: x outside [0, x_max]");
    }
    if (x == x_max_) return std::log(point_mass_);
    double acc = -kInf;
    for (const auto& c : components_) {
        if (c.weight <= 0.0 || c.point_mass >= 1.0) continue;
        acc = log_add(acc, std::log(c.weight) + std::log1p(-c.point_mass) + c.beta.log_pdf(x));
    }
    return acc;
}

double BmaPredictive::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= x_max_) return 1.0;
    double f = 0.0;
    for (const auto& c : components_) f += c.weight * (1.0 - c.point_mass) * c.beta.cdf(x);
    return f;
}

double BmaPredictive::quantile(double p) const {
    detail::check_probability(p);
    const double below = cdf_below_max();
    if (p > below) return x_max_;
    auto left_cdf = [&](double x) { return x >= x_max_ ? below : cdf(x); };
    return std::fmin(bisect_quantile(left_cdf, p, x_max_), x_max_);
}

double BmaPredictive::mean() const {
    double m = 0.0;
    for (const auto& c : components_) {
        m += c.weight * ((1.0 - c.point_mass) * c.beta.mean() + c.point_mass * x_max_);
    }
    return m;
}

double BmaPredictive::draw(Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    const auto& c = components_[static_cast<std::size_t>(it - cumulative_.begin())];
    if (unif(rng) < c.point_mass) return x_max_;
    return c.beta.draw(rng);
}

BmaPredictive bma_predict(const BmaParams& params, const ForecastCase& fc) {
    std::vector<BmaPredictive::Component> comps;
    auto add = [&](MemberGroup g, double f) {
        const auto it = params.groups.find(g);
        if (it == params.groups.end()) return;
        const auto law = component_law(it->second, params.c0, params.c1, f, params.x_max);
        comps.push_back({it->second.weight, law.point_mass, law.beta});
    };
    if (fc.f_hres) add(MemberGroup::Hres, *fc.f_hres);
    if (fc.f_ctrl) add(MemberGroup::Ctrl, *fc.f_ctrl);
    for (double f : fc.f_ens) add(MemberGroup::Ens, f);
    if (comps.empty()) {
        throw MissingForecastError("bma_predict: no ensemble member available");
    }
    return BmaPredictive(std::move(comps), params.x_max);
}

// ------------------------------------------------------------ training

std::vector<BmaCase> make_bma_cases(std::span<const ForecastCase> cases,
                                    std::span<const MemberGroup> groups) {
    const auto wants = [&](MemberGroup g) {
        return std::find(groups.begin(), groups.end(), g) != groups.end();
    };
    std::vector<BmaCase> out;
    out.reserve(cases.size());
    for (const auto& fc : cases) {
        if (!fc.obs) continue;
        if (wants(MemberGroup::Hres) && !fc.f_hres) continue;
        if (wants(MemberGroup::Ctrl) && !fc.f_ctrl) continue;
        if (wants(MemberGroup::Ens) && !fc.has_ensemble()) continue;
        BmaCase bc;
        bc.obs = fc.obs >= fc.x_max ? fc.x_max : std::clamp(*fc.obs, kMinScoredObs, fc.x_max);
        if (wants(MemberGroup::Hres)) bc.hres = fc.f_hres;
        if (wants(MemberGroup::Ctrl)) bc.ctrl = fc.f_ctrl;
        if (wants(MemberGroup::Ens)) {
            bc.ens = fc.f_ens;
            std::sort(bc.ens.begin(), bc.ens.end());
        }
        out.push_back(std::move(bc));
    }
    return out;
}

namespace {

std::vector<double> member_values(const BmaCase& c, MemberGroup g) {
    switch (g) {
        case MemberGroup::Hres: return c.hres ? std::vector<double>{*c.hres} : std::vector<double>{};
        case MemberGroup::Ctrl: return c.ctrl ? std::vector<double>{*c.ctrl} : std::vector<double>{};
        case MemberGroup::Ens: return c.ens;
    }
    return {};
}

}  // namespace

BmaParams fit_bma_subfits(std::span<const BmaCase> cases, std::span<const MemberGroup> groups,
                          double x_max) {
    if (cases.empty()) throw FitError("fit_bma_subfits: empty training set");
    BmaParams params;
    params.x_max = x_max;
    for (const MemberGroup g : groups) {
        std::vector<LogitPair> logit_pairs;
        std::vector<MeanPair> mean_pairs;
        for (const auto& c : cases) {
            const bool at_max = c.obs >= x_max;
            for (double f : member_values(c, g)) {
                logit_pairs.push_back({f, at_max});
                if (!at_max) mean_pairs.push_back({f, c.obs});
            }
        }
        if (logit_pairs.empty()) {
            throw FitError("fit_bma_subfits: no pairs for group " + std::string(to_string(g)));
        }
        BmaGroupParams gp;
        const auto lc = fit_logit(logit_pairs);
        gp.pi0 = lc.pi0;
        gp.pi1 = lc.pi1;
        if (mean_pairs.empty()) {
            gp.rho0 = x_max - kMeanMargin;
        } else {
            const auto mc = fit_beta_mean(mean_pairs);
            gp.rho0 = mc.rho0;
            gp.rho1 = mc.rho1;
        }
        params.groups[g] = gp;
    }
    return params;
}

namespace {

// Flattened per-slot quantities that stay fixed during EM.
class EmData {
public:
    EmData(std::span<const BmaCase> cases, const BmaParams& sub) : x_max_(sub.x_max) {
        for (const auto& [g, gp] : sub.groups) group_list_.push_back(g);
        for (const auto& c : cases) {
            const bool at_max = c.obs >= x_max_;
            const double u = c.obs / x_max_;
            CaseRow row{at_max, at_max ? 0.0 : std::log(u), at_max ? 0.0 : std::log1p(-u),
                        slots_.size(), 0};
            for (std::size_t gi = 0; gi < group_list_.size(); ++gi) {
                const auto& gp = sub.groups.at(group_list_[gi]);
                for (double f : member_values(c, group_list_[gi])) {
                    const double p = point_mass_probability(gp, f);
                    const double root = std::sqrt(f);
                    slots_.push_back(Slot{gi, root, clamp_mean(gp.rho0 + gp.rho1 * root, x_max_),
                                          std::log(p), std::log1p(-p)});
                }
            }
            row.slot_end = slots_.size();
            rows_.push_back(row);
        }
    }

    [[nodiscard]] std::size_t groups() const { return group_list_.size(); }
    [[nodiscard]] MemberGroup group(std::size_t gi) const { return group_list_[gi]; }
    [[nodiscard]] std::size_t slot_count() const { return slots_.size(); }
    [[nodiscard]] std::size_t case_count() const { return rows_.size(); }

    // log h_k(y_i) for every slot.
    void log_components(double c0, double c1, std::vector<double>& out) const {
        out.resize(slots_.size());
        for (const auto& row : rows_) {
            for (std::size_t k = row.slot_begin; k < row.slot_end; ++k) {
                const Slot& s = slots_[k];
                if (row.at_max) {
                    out[k] = s.log_p;
                    continue;
                }
                out[k] = s.log_q + beta_log_pdf(s, c0, c1, row);
            }
        }
    }

    // Expected complete-data log-likelihood terms depending on (c0, c1).
    [[nodiscard]] double q_sd(double c0, double c1, const std::vector<double>& resp) const {
        std::vector<double> terms;
        terms.reserve(rows_.size());
        for (const auto& row : rows_) {
            if (row.at_max) continue;
            double acc = 0.0;
            for (std::size_t k = row.slot_begin; k < row.slot_end; ++k) {
                if (resp[k] <= 0.0) continue;
                acc += resp[k] * beta_log_pdf(slots_[k], c0, c1, row);
            }
            terms.push_back(acc);
        }
        return pairwise_sum(terms);
    }

    // E-step: responsibilities and observed-data log-likelihood.
    double e_step(const std::vector<double>& log_w, const std::vector<double>& log_h,
                  std::vector<double>& resp) const {
        resp.resize(slots_.size());
        std::vector<double> case_ll;
        case_ll.reserve(rows_.size());
        for (const auto& row : rows_) {
            double acc = -kInf;
            for (std::size_t k = row.slot_begin; k < row.slot_end; ++k) {
                resp[k] = log_w[slots_[k].group] + log_h[k];
                acc = log_add(acc, resp[k]);
            }
            for (std::size_t k = row.slot_begin; k < row.slot_end; ++k) {
                resp[k] = std::isfinite(acc) ? std::exp(resp[k] - acc) : 0.0;
            }
            case_ll.push_back(acc);
        }
        return pairwise_sum(case_ll);
    }

    // Mean responsibility per slot of each group (ENS slots tied by averaging).
    [[nodiscard]] std::vector<double> group_weights(const std::vector<double>& resp) const {
        std::vector<double> sums(group_list_.size(), 0.0);
        for (std::size_t k = 0; k < slots_.size(); ++k) sums[slots_[k].group] += resp[k];
        std::vector<double> w(group_list_.size());
        const auto n = static_cast<double>(rows_.size());
        for (std::size_t gi = 0; gi < group_list_.size(); ++gi) {
            w[gi] = sums[gi] / (n * static_cast<double>(group_slots(group_list_[gi])));
        }
        return w;
    }

    [[nodiscard]] double sd_of_continuous(std::span<const BmaCase> cases) const {
        std::vector<double> y;
        for (const auto& c : cases) {
            if (c.obs < x_max_) y.push_back(c.obs);
        }
        if (y.size() < 2) return 1.0;
        const double m = pairwise_mean(y);
        double ss = 0.0;
        for (double v : y) ss += (v - m) * (v - m);
        return std::sqrt(ss / static_cast<double>(y.size() - 1));
    }

private:
    struct Slot {
        std::size_t group;
        double root;   // sqrt(f)
        double mean;   // clamped beta mean
        double log_p;  // log P(X = x_max | f)
        double log_q;  // log P(X < x_max | f)
    };
    struct CaseRow {
        bool at_max;
        double log_u;
        double log_1mu;
        std::size_t slot_begin;
        std::size_t slot_end;
    };

    [[nodiscard]] double beta_log_pdf(const Slot& s, double c0, double c1, const CaseRow& row) const {
        const double sd = clamp_sd(c0 + c1 * s.root, s.mean, x_max_);
        const auto [a, b] = shapes_from_moments(s.mean, sd, x_max_);
        return (a - 1.0) * row.log_u + (b - 1.0) * row.log_1mu - special::log_beta(a, b) -
               std::log(x_max_);
    }

    double x_max_;
    std::vector<MemberGroup> group_list_;
    std::vector<Slot> slots_;
    std::vector<CaseRow> rows_;
};

}  // namespace

double bma_log_likelihood(const BmaParams& params, std::span<const BmaCase> cases) {
    const EmData data(cases, params);
    std::vector<double> log_h;
    data.log_components(params.c0, params.c1, log_h);
    std::vector<double> log_w(data.groups());
    for (std::size_t gi = 0; gi < data.groups(); ++gi) {
        log_w[gi] = std::log(params.groups.at(data.group(gi)).weight);
    }
    std::vector<double> resp;
    return data.e_step(log_w, log_h, resp);
}

BmaFit fit_em(std::span<const BmaCase> cases, const BmaParams& subfits, const EmOptions& options) {
    if (cases.empty()) throw FitError("fit_em: empty training set");
    if (subfits.groups.empty()) throw FitError("fit_em: no member groups");
    const EmData data(cases, subfits);

    std::size_t total_slots = 0;
    for (std::size_t gi = 0; gi < data.groups(); ++gi) total_slots += group_slots(data.group(gi));
    std::vector<double> weights(data.groups(), 1.0 / static_cast<double>(total_slots));
    auto log_weights = [&] {
        std::vector<double> lw(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) lw[i] = std::log(weights[i]);
        return lw;
    };

    const double sd_obs = data.sd_of_continuous(cases);
    double c0 = sd_obs;
    double c1 = 0.0;
    std::vector<double> log_h;
    std::vector<double> resp;
    data.log_components(c0, c1, log_h);
    double ll = data.e_step(log_weights(), log_h, resp);
    if (!std::isfinite(ll)) {
        c0 = 0.5 * sd_obs;
        data.log_components(c0, c1, log_h);
        ll = data.e_step(log_weights(), log_h, resp);
        if (!std::isfinite(ll)) {
            throw FitError("fit_em: log-likelihood is not finite at initialization");
        }
    }

    BmaFit fit;
    fit.loglik.push_back(ll);
    double step0 = std::max(0.1 * std::fabs(c0), 0.05);
    double step1 = 0.05;
    SimplexOptions simplex;
    simplex.rel_tol = options.m_step_tol;
    simplex.abs_tol = 1e-12;
    simplex.max_evals = options.m_step_max_evals;
    simplex.restarts = 0;

    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        weights = data.group_weights(resp);
        const auto q = [&](std::span<const double> c) { return -data.q_sd(c[0], c[1], resp); };
        const auto res = nelder_mead(q, {c0, c1}, {step0, step1}, simplex);
        // the next simplex is scaled to the last move, floored to stay non-degenerate
        step0 = std::max(2.0 * std::fabs(res.x[0] - c0), 1e-4 * std::max(1.0, std::fabs(res.x[0])));
        step1 = std::max(2.0 * std::fabs(res.x[1] - c1), 1e-5);
        c0 = res.x[0];
        c1 = res.x[1];

        data.log_components(c0, c1, log_h);
        const double next = data.e_step(log_weights(), log_h, resp);
        fit.loglik.push_back(next);
        fit.iterations = iter + 1;
        const double change = std::fabs(next - ll) / std::max(std::fabs(ll), 1e-300);
        ll = next;
        if (change < options.rel_tol) {
            fit.converged = true;
            break;
        }
    }

    fit.params = subfits;
    fit.params.c0 = c0;
    fit.params.c1 = c1;
    for (std::size_t gi = 0; gi < data.groups(); ++gi) {
        fit.params.groups.at(data.group(gi)).weight = weights[gi];
    }
    return fit;
}

BmaFit fit_bma(std::span<const BmaCase> cases, std::span<const MemberGroup> groups, double x_max,
               const EmOptions& options) {
    return fit_em(cases, fit_bma_subfits(cases, groups, x_max), options);
}

}  // namespace viscal
