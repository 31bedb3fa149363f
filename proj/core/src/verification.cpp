#include "viscal/verification.hpp"

#include "viscal/errors.hpp"
#include "viscal/numeric.hpp"

#include <cmath>
#include <map>
#include <numeric>

namespace viscal {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

double sorted_quantile7(std::span<const double> sorted, double p) {
    detail::check_probability(p);
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// sum_i sum_j |x_i - x_j| over a sorted sample, halved.
double half_pair_sum(std::span<const double> sorted) {
    const auto n = static_cast<double>(sorted.size());
    std::vector<double> terms(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        terms[i] = (2.0 * static_cast<double>(i + 1) - n - 1.0) * sorted[i];
    }
    return pairwise_sum(terms);
}

double mean_abs_dev(std::span<const double> v, double x) {
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = std::abs(v[i] - x);
    return pairwise_mean(d);
}

Interval percentile_interval(std::vector<double> stats, double level) {
    std::sort(stats.begin(), stats.end());
    const double a = (1.0 - level) / 2.0;
    return {sorted_quantile7(stats, a), sorted_quantile7(stats, 1.0 - a)};
}

void check_bootstrap(std::size_t n, const BootstrapOptions& o) {
    if (o.mean_block_len != 0.0 && !(o.mean_block_len >= 1.0)) {
        throw ParameterError("bootstrap: mean block length must be at least 1");
    }
    if (n < 10) throw DomainError("bootstrap: series needs at least 10 values");
    if (o.replicates < 2) throw ParameterError("bootstrap: need at least 2 replicates");
    if (!(o.level > 0.0 && o.level < 1.0)) throw ParameterError("bootstrap: level outside (0,1)");
}

double block_length(std::size_t n, const BootstrapOptions& o) {
    return o.mean_block_len == 0.0 ? default_block_length(n) : o.mean_block_len;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

// ------------------------------------------------------------ ensemble

EmpiricalEnsemble::EmpiricalEnsemble(std::vector<double> members) : members_(std::move(members)) {
    if (members_.empty()) throw ParameterError("empirical ensemble must have members");
    std::sort(members_.begin(), members_.end());
}

double EmpiricalEnsemble::cdf(double x) const {
    const auto k = std::upper_bound(members_.begin(), members_.end(), x) - members_.begin();
    return static_cast<double>(k) / static_cast<double>(members_.size());
}

double EmpiricalEnsemble::quantile(double p) const {
    detail::check_probability(p);
    // Weibull plotting positions i/(K+1): the nominal (K-1)/(K+1) interval is the ensemble range.
    const double h = static_cast<double>(members_.size() + 1) * p;
    if (h <= 1.0) return members_.front();
    if (h >= static_cast<double>(members_.size())) return members_.back();
    const auto i = static_cast<std::size_t>(std::floor(h));
    return members_[i - 1] + (h - static_cast<double>(i)) * (members_[i] - members_[i - 1]);
}

double EmpiricalEnsemble::mean() const { return pairwise_mean(members_); }

bool is_parametric(const ProbForecast& f) noexcept {
    return !std::holds_alternative<EmpiricalEnsemble>(f);
}

std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t case_seed(const StationId& station, DateTime valid, std::uint64_t base) noexcept {
    const auto hours = static_cast<std::uint64_t>(valid.time_since_epoch().count());
    return mix_seed(mix_seed(base ^ fnv1a(station.value)) ^ hours);
}

// -------------------------------------------------------------- scores

double crps_ensemble(std::span<const double> members, double x) {
    if (members.empty()) throw ParameterError("crps: empty ensemble");
    std::vector<double> s(members.begin(), members.end());
    std::sort(s.begin(), s.end());
    const auto k = static_cast<double>(s.size());
    return mean_abs_dev(s, x) - half_pair_sum(s) / (k * k);
}

double crps_from_sample(std::vector<double> sample, double x) {
    if (sample.empty()) throw ParameterError("crps: empty sample");
    if (sample.size() == 1) return std::abs(sample.front() - x);
    std::sort(sample.begin(), sample.end());
    const auto n = static_cast<double>(sample.size());
    return mean_abs_dev(sample, x) - half_pair_sum(sample) / (n * (n - 1.0));
}

double crps(const ProbForecast& f, double x, const CrpsOptions& options) {
    return std::visit(Overloaded{
                          [&](const EmpiricalEnsemble& e) { return crps_ensemble(e.members(), x); },
                          [&](const auto& law) {
                              return crps_mc(law, x, options.mc_samples, options.seed);
                          },
                      },
                      f);
}

double logs(const ProbForecast& f, double x) {
    return std::visit(Overloaded{
                          [](const EmpiricalEnsemble&) -> double {
                              throw UnsupportedScoreError("LogS is undefined for an ensemble");
                          },
                          [&](const auto& law) {
                              const double xs = std::min(std::max(x, kMinScoredObs), law.x_max());
                              return -std::log(std::max(law.pdf(xs).value, kDensityFloor));
                          },
                      },
                      f);
}

double cdf(const ProbForecast& f, double y) {
    return std::visit([&](const auto& law) { return law.cdf(y); }, f);
}

double quantile(const ProbForecast& f, double p) {
    return std::visit([&](const auto& law) { return law.quantile(p); }, f);
}

double predictive_mean(const ProbForecast& f) {
    return std::visit([](const auto& law) { return law.mean(); }, f);
}

double brier(const ProbForecast& f, double x, double y) {
    const double ind = x <= y ? 1.0 : 0.0;
    const double d = cdf(f, y) - ind;
    return d * d;
}

double skill_score(double mean_score, double mean_score_ref) {
    if (!(mean_score_ref > 0.0)) throw DomainError("skill score undefined for a zero reference");
    return 1.0 - mean_score / mean_score_ref;
}

double nominal_level(std::size_t K) {
    if (K == 0) throw ParameterError("nominal level needs K >= 1");
    const auto k = static_cast<double>(K);
    return (k - 1.0) / (k + 1.0);
}

Interval central_interval(const ProbForecast& f, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ParameterError("interval level outside (0,1)");
    const double a = (1.0 - level) / 2.0;
    return {quantile(f, a), quantile(f, 1.0 - a)};
}

CoverageWidth coverage_and_width(std::span<const Interval> intervals,
                                 std::span<const double> observations) {
    if (intervals.size() != observations.size()) {
        throw DomainError("coverage: interval and observation counts differ");
    }
    if (intervals.empty()) throw DomainError("coverage: no cases");
    std::vector<double> inside(intervals.size());
    std::vector<double> width(intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto& iv = intervals[i];
        inside[i] = iv.lo <= observations[i] && observations[i] <= iv.hi ? 1.0 : 0.0;
        width[i] = iv.hi - iv.lo;
    }
    return {100.0 * pairwise_mean(inside), pairwise_mean(width)};
}

double pit(const ProbForecast& f, double x, Rng& rng) {
    double lo = 0.0;
    double hi = 0.0;
    std::visit(Overloaded{
                   [&](const EmpiricalEnsemble& e) {
                       const auto m = e.members();
                       const auto below = std::lower_bound(m.begin(), m.end(), x) - m.begin();
                       const auto upto = std::upper_bound(m.begin(), m.end(), x) - m.begin();
                       lo = static_cast<double>(below) / static_cast<double>(m.size());
                       hi = static_cast<double>(upto) / static_cast<double>(m.size());
                   },
                   [&](const auto& law) {
                       if (x >= law.x_max()) {
                           lo = law.cdf_below_max();
                           hi = 1.0;
                       } else {
                           lo = hi = law.cdf(x);
                       }
                   },
               },
               f);
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t verification_rank(std::span<const double> members, double x, Rng& rng) {
    if (members.empty()) throw ParameterError("rank: empty ensemble");
    std::size_t below = 0;
    std::size_t ties = 0;
    for (double m : members) {
        if (m < x) ++below;
        else if (m == x) ++ties;
    }
    const std::size_t extra = ties == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, ties)(rng);
    return below + extra + 1;
}

std::vector<std::size_t> histogram(std::span<const double> values, std::size_t bins) {
    if (bins == 0) throw ParameterError("histogram needs at least one bin");
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        const double c = std::clamp(v, 0.0, 1.0) * static_cast<double>(bins);
        counts[std::min(static_cast<std::size_t>(c), bins - 1)]++;
    }
    return counts;
}

PointErrors point_errors(std::span<const double> mean_forecasts,
                         std::span<const double> median_forecasts,
                         std::span<const double> observations) {
    if (observations.empty()) throw DomainError("point errors: no cases");
    if (mean_forecasts.size() != observations.size() ||
        median_forecasts.size() != observations.size()) {
        throw DomainError("point errors: forecast and observation counts differ");
    }
    std::vector<double> sq(observations.size());
    std::vector<double> ab(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const double e = mean_forecasts[i] - observations[i];
        sq[i] = e * e;
        ab[i] = std::abs(median_forecasts[i] - observations[i]);
    }
    return {std::sqrt(pairwise_mean(sq)), pairwise_mean(ab)};
}

PointErrors point_errors(std::span<const double> forecasts, std::span<const double> observations) {
    return point_errors(forecasts, forecasts, observations);
}

// ----------------------------------------------------------- bootstrap

double default_block_length(std::size_t n) {
    return std::max(1.0, std::ceil(std::cbrt(static_cast<double>(n))));
}

std::vector<std::size_t> stationary_indices(std::size_t n, double mean_block_len, Rng& rng) {
    if (!(mean_block_len >= 1.0)) throw ParameterError("bootstrap: mean block length must be at least 1");
    if (n == 0) return {};
    std::uniform_int_distribution<std::size_t> start(0, n - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double p_new = 1.0 / mean_block_len;
    std::vector<std::size_t> idx(n);
    idx[0] = start(rng);
    for (std::size_t i = 1; i < n; ++i) {
        idx[i] = u(rng) < p_new ? start(rng) : (idx[i - 1] + 1) % n;
    }
    return idx;
}

Interval stationary_bootstrap(std::span<const double> series, const BootstrapOptions& options) {
    check_bootstrap(series.size(), options);
    const double L = block_length(series.size(), options);
    Rng rng(options.seed);
    std::vector<double> stats(options.replicates);
    std::vector<double> buf(series.size());
    for (auto& s : stats) {
        const auto idx = stationary_indices(series.size(), L, rng);
        for (std::size_t i = 0; i < idx.size(); ++i) buf[i] = series[idx[i]];
        s = pairwise_mean(buf);
    }
    return percentile_interval(std::move(stats), options.level);
}

Interval stationary_bootstrap_skill(std::span<const double> score, std::span<const double> ref,
                                    const BootstrapOptions& options) {
    if (score.size() != ref.size()) throw DomainError("bootstrap: unpaired score series");
    check_bootstrap(score.size(), options);
    const double L = block_length(score.size(), options);
    Rng rng(options.seed);
    std::vector<double> stats;
    stats.reserve(options.replicates);
    std::vector<double> a(score.size());
    std::vector<double> b(score.size());
    for (std::size_t r = 0; r < options.replicates; ++r) {
        const auto idx = stationary_indices(score.size(), L, rng);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            a[i] = score[idx[i]];
            b[i] = ref[idx[i]];
        }
        const double mr = pairwise_mean(b);
        if (mr > 0.0) stats.push_back(1.0 - pairwise_mean(a) / mr);
    }
    if (stats.size() < 2) throw DomainError("bootstrap: reference mean vanishes in resamples");
    return percentile_interval(std::move(stats), options.level);
}

// --------------------------------------------------------------- report

const MetricValue* MethodReport::metric(const std::string& name) const {
    for (const auto& m : metrics) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

const MethodReport* LeadReport::method(const std::string& name) const {
    for (const auto& m : methods) {
        if (m.method == name) return &m;
    }
    return nullptr;
}

namespace {

struct CaseScores {
    std::vector<double> crps;
    std::vector<double> logs;  // empty unless every forecast is parametric
    std::vector<std::vector<double>> brier;
    std::vector<Interval> intervals;
    std::vector<double> obs;
    std::vector<double> means;
    std::vector<double> medians;
    std::vector<double> pits;
    std::vector<std::size_t> ranks;
    std::size_t rank_k = 0;
    bool parametric = true;
};

CaseScores score_series(const MethodSeries& m, const ReportConfig& cfg,
                        std::vector<std::string>& notices) {
    CaseScores s;
    const std::size_t n = m.keys.size();
    s.parametric = std::all_of(m.forecasts.begin(), m.forecasts.end(),
                               [](const ProbForecast& f) { return is_parametric(f); });
    s.brier.assign(cfg.thresholds.size(), std::vector<double>(n));
    std::size_t rank_skipped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& key = m.keys[i];
        const auto& f = m.forecasts[i];
        const std::uint64_t cs = case_seed(key.station, key.valid, cfg.crps.seed);
        s.crps.push_back(crps(f, key.obs, {cfg.crps.mc_samples, cs}));
        if (s.parametric) s.logs.push_back(logs(f, key.obs));
        for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
            s.brier[t][i] = brier(f, key.obs, cfg.thresholds[t]);
        }
        s.intervals.push_back(central_interval(f, cfg.interval_level));
        s.obs.push_back(key.obs);
        s.means.push_back(predictive_mean(f));
        s.medians.push_back(quantile(f, 0.5));
        Rng rng(mix_seed(cs ^ 0x5851f42d4c957f2dULL));
        if (const auto* e = std::get_if<EmpiricalEnsemble>(&f)) {
            if (s.rank_k == 0) s.rank_k = e->size();
            if (e->size() == s.rank_k) {
                s.ranks.push_back(verification_rank(e->members(), key.obs, rng));
            } else {
                ++rank_skipped;
            }
        } else {
            s.pits.push_back(pit(f, key.obs, rng));
        }
    }
    if (!s.parametric) notices.emplace_back("logs skipped: undefined for ensemble forecasts");
    if (rank_skipped > 0) {
        notices.push_back("rank histogram skips " + std::to_string(rank_skipped) +
                          " cases with a different ensemble size");
    }
    return s;
}

void order_cases(MethodSeries& m) {
    if (m.keys.size() != m.forecasts.size()) {
        throw DomainError("report: method " + m.method + " has unequal key and forecast counts");
    }
    std::vector<std::size_t> idx(m.keys.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (m.keys[a].valid != m.keys[b].valid) return m.keys[a].valid < m.keys[b].valid;
        return m.keys[a].station < m.keys[b].station;
    });
    std::vector<CaseKey> keys;
    std::vector<ProbForecast> fc;
    keys.reserve(idx.size());
    fc.reserve(idx.size());
    for (auto i : idx) {
        keys.push_back(std::move(m.keys[i]));
        fc.push_back(std::move(m.forecasts[i]));
    }
    m.keys = std::move(keys);
    m.forecasts = std::move(fc);
}

// Percentile intervals need not contain the point estimate; widen so they do.
Interval containing(Interval ci, double point) {
    return {std::min(ci.lo, point), std::max(ci.hi, point)};
}

}  // namespace

VerificationReport build_report(std::vector<LeadInput> leads, const ReportConfig& config) {
    VerificationReport report;
    report.interval_level = config.interval_level;
    std::sort(leads.begin(), leads.end(),
              [](const LeadInput& a, const LeadInput& b) { return a.lead_h < b.lead_h; });

    std::map<std::string, std::vector<double>> all_crps;
    std::vector<std::string> method_order;

    for (auto& lead : leads) {
        if (lead.methods.empty()) continue;
        for (auto& m : lead.methods) order_cases(m);
        const auto& first = lead.methods.front();
        for (const auto& m : lead.methods) {
            const bool paired =
                m.keys.size() == first.keys.size() &&
                std::equal(m.keys.begin(), m.keys.end(), first.keys.begin(),
                           [](const CaseKey& a, const CaseKey& b) {
                               return a.same_case(b) && a.obs == b.obs;
                           });
            if (!paired) {
                throw DomainError("report: lead " + std::to_string(lead.lead_h) + ": method " +
                                  m.method + " is not scored on the same cases as " + first.method);
            }
        }

        LeadReport lr;
        lr.lead_h = lead.lead_h;
        lr.cases = first.keys.size();
        lr.excluded = lead.excluded;

        std::vector<CaseScores> scores;
        for (const auto& m : lead.methods) {
            MethodReport mr;
            mr.method = m.method;
            scores.push_back(score_series(m, config, mr.notices));
            lr.methods.push_back(std::move(mr));
        }
        const CaseScores* ref = nullptr;
        for (std::size_t j = 0; j < lead.methods.size(); ++j) {
            if (lead.methods[j].method == config.reference) ref = &scores[j];
        }

        auto boot = config.bootstrap;
        boot.seed = mix_seed(config.bootstrap.seed ^ static_cast<std::uint64_t>(lead.lead_h));
        const bool can_boot = lr.cases >= 10;

        for (std::size_t j = 0; j < lead.methods.size(); ++j) {
            const auto& s = scores[j];
            auto& mr = lr.methods[j];
            if (lr.cases == 0) {
                mr.notices.emplace_back("no cases");
                continue;
            }
            if (!can_boot) mr.notices.emplace_back("confidence intervals skipped: fewer than 10 cases");

            auto add_mean = [&](const std::string& name, const std::vector<double>& v) {
                MetricValue mv{name, pairwise_mean(v), std::nullopt};
                if (can_boot) mv.ci = containing(stationary_bootstrap(v, boot), mv.value);
                mr.metrics.push_back(std::move(mv));
            };
            auto add_skill = [&](const std::string& name, const std::vector<double>& v,
                                 const std::vector<double>& r) {
                try {
                    MetricValue mv{name, skill_score(pairwise_mean(v), pairwise_mean(r)), std::nullopt};
                    if (can_boot) {
                        mv.ci = containing(stationary_bootstrap_skill(v, r, boot), mv.value);
                    }
                    mr.metrics.push_back(std::move(mv));
                } catch (const DomainError& e) {
                    mr.notices.push_back(name + " skipped: " + e.what());
                }
            };

            add_mean("crps", s.crps);
            if (s.parametric) add_mean("logs", s.logs);
            for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
                add_mean("bs_" + format_number(config.thresholds[t]), s.brier[t]);
            }
            const auto cw = coverage_and_width(s.intervals, s.obs);
            mr.metrics.push_back({"coverage", cw.coverage_pct, std::nullopt});
            mr.metrics.push_back({"width", cw.mean_width, std::nullopt});
            const auto pe = point_errors(s.means, s.medians, s.obs);
            mr.metrics.push_back({"rmse", pe.rmse, std::nullopt});
            mr.metrics.push_back({"mae", pe.mae, std::nullopt});
            if (ref != nullptr) {
                add_skill("crpss", s.crps, ref->crps);
                for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
                    add_skill("bss_" + format_number(config.thresholds[t]), s.brier[t], ref->brier[t]);
                }
            } else {
                mr.notices.push_back("skill scores skipped: reference '" + config.reference +
                                     "' not scored");
            }
            if (!s.pits.empty()) mr.pit_histogram = histogram(s.pits, config.pit_bins);
            if (!s.ranks.empty()) {
                mr.rank_histogram.assign(s.rank_k + 1, 0);
                for (auto r : s.ranks) mr.rank_histogram[r - 1]++;
            }

            auto& acc = all_crps[mr.method];
            if (acc.empty() && std::find(method_order.begin(), method_order.end(), mr.method) ==
                                   method_order.end()) {
                method_order.push_back(mr.method);
            }
            acc.insert(acc.end(), s.crps.begin(), s.crps.end());
        }
        report.leads.push_back(std::move(lr));
    }

    const auto base = all_crps.find(config.baseline);
    if (base != all_crps.end() && !base->second.empty()) {
        const double denom = pairwise_mean(base->second);
        if (denom > 0.0) {
            for (const auto& name : method_order) {
                report.crps_pct_of_baseline.emplace_back(
                    name, 100.0 * (pairwise_mean(all_crps[name]) / denom));
            }
        }
    }
    return report;
}

}  // namespace viscal
