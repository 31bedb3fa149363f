#include <doctest.h>

#include "viscal/errors.hpp"
#include "viscal/verification.hpp"
#include "support/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace viscal;
using namespace std::chrono;

namespace {

BmaPredictive single_beta(double a, double b, double point_mass = 0.0) {
    return BmaPredictive({{1.0, point_mass, BetaOnRange(a, b, 75.0)}}, 75.0);
}

BmaPredictive two_betas() {
    return BmaPredictive({{0.6, 0.05, BetaOnRange(2.0, 8.0, 75.0)}, {0.4, 0.2, BetaOnRange(5.0, 3.0, 75.0)}},
                         75.0);
}

MixturePredictive some_mixture() {
    return MixturePredictive(0.3, CensoredLaw<GammaLaw>(GammaLaw(2.0, 9.0), 75.0),
                             CensoredLaw<TruncNormalLaw>(TruncNormalLaw(55.0, 15.0), 75.0));
}

// integral of the Brier score over thresholds in [0, x_max]
double brier_integral(const ProbForecast& f, double x, int n = 200000) {
    const double h = 75.0 / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += brier(f, x, (i + 0.5) * h);
    return s * h;
}

}  // namespace

TEST_CASE("ensemble crps") {
    CHECK(crps_ensemble(std::vector<double>{4.0}, 4.0) == 0.0);
    CHECK(crps_ensemble(std::vector<double>(5, 4.0), 4.0) == 0.0);
    CHECK(crps_ensemble(std::vector<double>{0.0, 1.0}, 0.0) == doctest::Approx(0.25));
    CHECK(crps(EmpiricalEnsemble({1.0, 0.0}), 0.0) == doctest::Approx(0.25));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 75.0);
    std::vector<double> m(51);
    for (auto& v : m) v = u(rng);
    EmpiricalEnsemble e(m);
    for (double x : {0.0, 12.3, 40.0, 75.0}) {
        const double c = crps(e, x);
        CHECK(c > 0.0);
        CHECK(brier_integral(e, x) == doctest::Approx(c).epsilon(0.01));
    }
}

TEST_CASE("monte carlo crps") {
    struct StdNormal {
        double quantile(double p) const {
            // bisection on the erfc cdf
            double lo = -40.0, hi = 40.0;
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (lo + hi);
                (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
    };
    const double exact = 2.0 / std::sqrt(2.0 * std::numbers::pi) - 1.0 / std::sqrt(std::numbers::pi);
    CHECK(exact == doctest::Approx(0.23370).epsilon(1e-4));
    CHECK(crps_mc(StdNormal{}, 0.0, kDefaultMcSamples, kDefaultSeed) == doctest::Approx(exact).epsilon(0.01));

    // draw-only laws use i.i.d. samples and the unbiased pair term
    struct Drawn {
        double draw(Rng& rng) const { return std::normal_distribution<double>(0.0, 1.0)(rng); }
    };
    CHECK(crps_mc(Drawn{}, 0.0, 40000, 3) == doctest::Approx(exact).epsilon(0.03));

    ProbForecast mix = some_mixture();
    const double c = crps(mix, 20.0);
    CHECK(brier_integral(mix, 20.0) == doctest::Approx(c).epsilon(0.01));
    CHECK(crps(mix, 20.0) == c);
    CrpsOptions other;
    other.seed = 99;
    CHECK(crps(mix, 20.0, other) != c);
    CHECK(crps(mix, 20.0, other) == doctest::Approx(c).epsilon(0.01));
}

TEST_CASE("component mixture crps") {
    ProbForecast two = two_betas();
    for (double x : {2.0, 30.0, 75.0}) CHECK(crps(two, x) == doctest::Approx(brier_integral(two, x, 20000)).epsilon(1e-3));

    // many narrow components, some with no weight
    std::vector<BmaPredictive::Component> comps;
    for (int k = 0; k < 52; ++k) {
        const double w = k < 2 ? 0.0 : 1.0 / 50.0;
        comps.push_back({w, 0.01 * (k % 5), BetaOnRange(20.0 + k, 200.0 - 2.0 * k, 75.0)});
    }
    ProbForecast many = BmaPredictive(comps, 75.0);
    for (double x : {5.0, 14.0, 75.0}) CHECK(crps(many, x) == doctest::Approx(brier_integral(many, x, 20000)).epsilon(1e-3));
}

TEST_CASE("log score") {
    ProbForecast uni = single_beta(1.0, 1.0);
    CHECK(logs(uni, 30.0) == doctest::Approx(std::log(75.0)));
    CHECK(logs(uni, 30.0) == doctest::Approx(4.3175).epsilon(1e-4));
    ProbForecast top = single_beta(2.0, 2.0, 1.0);
    CHECK(logs(top, 75.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)logs(EmpiricalEnsemble({1.0, 2.0}), 1.0), UnsupportedScoreError);

    const auto m = some_mixture();
    for (double x : {0.5, 3.0, 40.0, 74.0, 75.0}) CHECK(logs(m, x) == doctest::Approx(-std::log(m.pdf(x).value)).epsilon(1e-12));
    // observations are floored at one reporting increment
    CHECK(logs(m, 0.0) == logs(m, kMinScoredObs));
}

TEST_CASE("brier and skill") {
    ProbForecast uni = single_beta(1.0, 1.0);
    // F(22.5) = 0.3, event happened
    CHECK(brier(uni, 10.0, 22.5) == doctest::Approx(0.49));
    CHECK(brier(uni, 30.0, 22.5) == doctest::Approx(0.09));
    CHECK(brier(EmpiricalEnsemble({4.0, 4.0}), 4.0, 3.0) == 0.0);
    CHECK(brier(EmpiricalEnsemble({4.0, 4.0}), 4.0, 5.0) == 0.0);

    CHECK(skill_score(2.0, 2.0) == 0.0);
    CHECK(skill_score(0.5, 1.0) == doctest::Approx(0.5));
    CHECK(skill_score(0.0, 1.0) == 1.0);
    CHECK_THROWS_AS((void)skill_score(1.0, 0.0), DomainError);
}

TEST_CASE("intervals") {
    CHECK(nominal_level(51) * 100.0 == doctest::Approx(96.15).epsilon(1e-4));
    CHECK(nominal_level(52) * 100.0 == doctest::Approx(96.23).epsilon(1e-4));
    auto iv = central_interval(single_beta(1.0, 1.0), 0.9);
    CHECK(iv.lo == doctest::Approx(3.75).epsilon(1e-9));
    CHECK(iv.hi == doctest::Approx(71.25).epsilon(1e-9));

    // the nominal interval of an ensemble is its range
    std::vector<double> m(51);
    std::iota(m.begin(), m.end(), 10.0);
    auto er = central_interval(EmpiricalEnsemble(m), nominal_level(51));
    CHECK(er.lo == doctest::Approx(10.0));
    CHECK(er.hi == doctest::Approx(60.0));
    CHECK(EmpiricalEnsemble(m).quantile(0.5) == doctest::Approx(35.0));

    std::vector<Interval> ivs{{0.0, 2.0}, {1.0, 5.0}};
    auto cw = coverage_and_width(ivs, std::vector<double>{1.0, 1.0});
    CHECK(cw.coverage_pct == 100.0);
    CHECK(cw.mean_width == doctest::Approx(3.0));
    CHECK(coverage_and_width(ivs, std::vector<double>{9.0, 9.0}).coverage_pct == 0.0);
    CHECK_THROWS((void)coverage_and_width(ivs, std::vector<double>{1.0}));

    // self-consistent forecasts hit their nominal level
    const auto law = single_beta(2.0, 5.0);
    const double level = nominal_level(51);
    const auto ci = central_interval(law, level);
    Rng rng(10);
    std::vector<Interval> many(100000, ci);
    std::vector<double> obs(many.size());
    for (auto& o : obs) o = law.draw(rng);
    CHECK(std::abs(coverage_and_width(many, obs).coverage_pct - 100.0 * level) < 1.0);
}

TEST_CASE("pit") {
    Rng rng(5);
    auto law = single_beta(3.0, 3.0);
    CHECK(pit(law, 37.5, rng) == doctest::Approx(0.5));

    auto atom = single_beta(2.0, 2.0, 0.1);
    double s = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = pit(atom, 75.0, rng);
        CHECK(v >= 0.9);
        s += v;
    }
    CHECK(std::abs(s / n - 0.95) < 3.0 * (0.1 / std::sqrt(12.0)) / std::sqrt(n));

    const auto mix = two_betas();
    std::vector<double> u(20000);
    for (auto& v : u) v = pit(mix, mix.draw(rng), rng);
    CHECK(testing::ks_uniform_pvalue(u) > 0.01);
    auto h = histogram(u, 20);
    CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == u.size());
    CHECK(testing::chi_square_uniform_pvalue(h) > 0.01);
}

TEST_CASE("rank") {
    Rng rng(8);
    std::vector<double> m(51);
    std::iota(m.begin(), m.end(), 1.0);
    CHECK(verification_rank(m, 100.0, rng) == 52);
    CHECK(verification_rank(m, 0.0, rng) == 1);
    CHECK(verification_rank(m, 1.5, rng) == 2);

    std::vector<double> tied(10, 5.0);
    std::vector<std::size_t> counts(11, 0);
    for (int i = 0; i < 100000; ++i) ++counts[verification_rank(tied, 5.0, rng) - 1];
    CHECK(testing::chi_square_uniform_pvalue(counts) > 0.01);

    CHECK(histogram(std::vector<double>{0.0, 0.5, 1.0}, 2) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("point errors") {
    std::vector<double> obs{1.0, 2.0, 3.0};
    auto same = point_errors(obs, obs);
    CHECK(same.rmse == 0.0);
    CHECK(same.mae == 0.0);
    auto shifted = point_errors(std::vector<double>{3.0, 4.0, 5.0}, obs);
    CHECK(shifted.rmse == doctest::Approx(2.0));
    CHECK(shifted.mae == doctest::Approx(2.0));
    auto e = point_errors(std::vector<double>{-3.0, 4.0}, std::vector<double>{0.0, 0.0});
    CHECK(e.mae == doctest::Approx(3.5));
    CHECK(e.rmse == doctest::Approx(3.5355).epsilon(1e-4));
    // mean forecasts for RMSE, medians for MAE
    auto split = point_errors(std::vector<double>{1.0}, std::vector<double>{3.0}, std::vector<double>{0.0});
    CHECK(split.rmse == doctest::Approx(1.0));
    CHECK(split.mae == doctest::Approx(3.0));
}

TEST_CASE("stationary bootstrap") {
    CHECK(default_block_length(1000) == doctest::Approx(10.0));
    CHECK(default_block_length(1001) == doctest::Approx(11.0));

    std::vector<double> flat(50, 2.5);
    auto ci = stationary_bootstrap(flat);
    CHECK(ci.lo == 2.5);
    CHECK(ci.hi == 2.5);

    BootstrapOptions bad;
    bad.mean_block_len = 0.5;
    CHECK_THROWS_AS((void)stationary_bootstrap(std::vector<double>(20, 1.0), bad), ParameterError);
    CHECK_THROWS((void)stationary_bootstrap(std::vector<double>(5, 1.0)));

    Rng rng(3);
    auto idx = stationary_indices(100, 5.0, rng);
    CHECK(idx.size() == 100);
    CHECK(std::all_of(idx.begin(), idx.end(), [](std::size_t i) { return i < 100; }));

    // iid series, block length 1: the interval covers the true mean about 95% of the time
    std::mt19937_64 gen(77);
    std::exponential_distribution<double> ex(1.0);
    int covered = 0;
    const int trials = 300;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> s(200);
        for (auto& v : s) v = ex(gen);
        BootstrapOptions o;
        o.mean_block_len = 1.0;
        o.replicates = 1000;
        o.seed = 1000 + t;
        auto c = stationary_bootstrap(s, o);
        covered += c.lo <= 1.0 && 1.0 <= c.hi;
    }
    CHECK(std::abs(covered / static_cast<double>(trials) - 0.95) < 0.04);

    // skill interval from jointly resampled series contains the point estimate
    std::vector<double> a(100), b(100);
    for (std::size_t i = 0; i < 100; ++i) {
        b[i] = 1.0 + ex(gen);
        a[i] = 0.7 * b[i] + 0.1 * ex(gen);
    }
    auto sk = stationary_bootstrap_skill(a, b);
    const double point = 1.0 - std::accumulate(a.begin(), a.end(), 0.0) / std::accumulate(b.begin(), b.end(), 0.0);
    CHECK(sk.lo <= point);
    CHECK(point <= sk.hi);
    auto self = stationary_bootstrap_skill(b, b);
    CHECK(self.lo == 0.0);
    CHECK(self.hi == 0.0);
}

TEST_CASE("report") {
    const Date d0 = sys_days(year{2021} / 1 / 1);
    Rng rng(4);
    const auto law = two_betas();
    LeadInput in;
    in.lead_h = 24;
    MethodSeries model{"model", {}, {}}, raw{"raw", {}, {}}, clim{"climatology", {}, {}};
    for (int i = 0; i < 300; ++i) {
        // stored out of order; the report sorts by valid time, then station
        CaseKey k{{i % 2 ? "B" : "A"}, DateTime(d0 + days{299 - i / 2}) + hours{24}, law.draw(rng)};
        model.keys.push_back(k);
        model.forecasts.emplace_back(law);
        std::vector<double> m(50);
        for (auto& v : m) v = law.draw(rng);
        raw.keys.push_back(k);
        raw.forecasts.emplace_back(EmpiricalEnsemble(m));
        clim.keys.push_back(k);
        clim.forecasts.emplace_back(EmpiricalEnsemble(std::vector<double>(m.begin(), m.begin() + 20)));
    }
    in.methods = {model, raw, clim};
    in.excluded = 2;

    ReportConfig cfg;
    cfg.bootstrap.replicates = 300;
    cfg.crps.mc_samples = 2000;
    auto rep = build_report({in}, cfg);
    REQUIRE(rep.leads.size() == 1);
    const auto& lead = rep.leads[0];
    CHECK(lead.cases == 300);
    CHECK(lead.excluded == 2);

    const auto* m = lead.method("model");
    REQUIRE(m != nullptr);
    CHECK(m->metric("logs") != nullptr);
    CHECK(m->metric("crps")->ci.has_value());
    CHECK(m->metric("bs_5") != nullptr);
    CHECK(m->pit_histogram.size() == 20);
    CHECK(testing::chi_square_uniform_pvalue(m->pit_histogram) > 0.01);

    const auto* r = lead.method("raw");
    CHECK(r->metric("logs") == nullptr);
    CHECK(r->rank_histogram.size() == 51);
    CHECK_FALSE(r->notices.empty());

    const auto* c = lead.method("climatology");
    CHECK(c->metric("crpss")->value == 0.0);
    CHECK(c->metric("bss_1")->value == 0.0);

    for (const auto& [name, pct] : rep.crps_pct_of_baseline) {
        if (name == "raw") CHECK(pct == doctest::Approx(100.0));
    }

    // unpaired cases are refused
    auto broken = in;
    broken.methods[1].keys[3].station.value = "C";
    CHECK_THROWS_AS((void)build_report({broken}, cfg), DomainError);
}
