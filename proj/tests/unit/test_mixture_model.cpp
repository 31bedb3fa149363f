#include <doctest.h>

#include "viscal/errors.hpp"
#include "viscal/mixture_model.hpp"
#include "support/synthetic.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <initializer_list>
#include <numbers>
#include <random>

using namespace viscal;

namespace {

EnsembleStats stats_of(double mean, double sd, int doy = 100) {
    EnsembleStats s;
    s.mean_ens = mean;
    s.sd_ens = sd;
    s.day_of_year = doy;
    return s;
}

MixtureParams gamma_only(double a0, double b0) {
    MixtureParams p;
    p.has_ctrl = true;
    p.a[0] = a0;
    p.b[0] = b0;
    p.alpha[0] = 10.0;
    p.beta[0] = 3.0;
    return p;
}

double continuous_mass(const MixturePredictive& m) {
    using boost::math::quadrature::gauss_kronrod;
    auto f = [&](double x) { return m.pdf(x).value; };
    // x = u^(1/k) on [0, 1] removes the x^(k-1) pole of a gamma with shape k < 1
    const double k = std::min(1.0, m.gamma_part().base().shape());
    const auto& g = m.gamma_part().base();
    auto near_zero = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double x = std::pow(u, 1.0 / k);
        // x * gamma pdf written through log u, so it survives x underflowing to 0
        const double xg = std::exp(g.shape() / k * std::log(u) - x / g.scale() -
                                   std::lgamma(g.shape()) - g.shape() * std::log(g.scale()));
        const double xt = x > 0.0 ? m.tnorm_part().base().pdf(x) * x : 0.0;
        return ((1.0 - m.omega()) * xg + m.omega() * xt) / (k * u);
    };
    return gauss_kronrod<double, 61>::integrate(near_zero, 0.0, 1.0, 20, 1e-12) +
           gauss_kronrod<double, 61>::integrate(f, 1.0, m.x_max(), 15, 1e-12);
}

}  // namespace

TEST_CASE("seasonal basis") {
    auto b = seasonal_basis(365);
    CHECK(std::abs(b.b1) < 1e-12);
    CHECK(b.b2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(seasonal_basis(91).b1 == doctest::Approx(std::sin(182.0 * std::numbers::pi / 365.0)));
    CHECK(seasonal_basis(183).b2 == doctest::Approx(std::cos(366.0 * std::numbers::pi / 365.0)));
    CHECK(seasonal_basis(183).b2 < -0.9999);
    CHECK_NOTHROW((void)seasonal_basis(366));
    CHECK_THROWS_AS((void)seasonal_basis(0), DomainError);
    CHECK_THROWS_AS((void)seasonal_basis(367), DomainError);
}

TEST_CASE("link") {
    auto p = testing::reference_truth();
    p.gamma_w = 0.0;
    for (double m : {0.5, 10.0, 60.0}) CHECK(link(p, stats_of(m, 2.0), {}, 3.0, 75.0).omega() == 0.5);

    auto q = gamma_only(2.0, 4.0);
    auto g = link(q, stats_of(30.0, 5.0), {}, 1.0, 75.0).gamma_part().base();
    CHECK(g.shape() == doctest::Approx(1.0));
    CHECK(g.scale() == doctest::Approx(2.0));

    q = gamma_only(5.0, 4.0);
    for (double m : {1.0, 40.0}) {
        auto h = link(q, stats_of(m, m / 3.0, 200), {}, 9.0, 75.0).gamma_part().base();
        CHECK(h.shape() == doctest::Approx(6.25));
        CHECK(h.scale() == doctest::Approx(0.8));
    }

    // squared member weights: negative a3 still adds a3^2 * mean
    q.a[3] = -2.0;
    CHECK(link(q, stats_of(1.0, 0.0), {}, 0.0, 75.0).gamma_part().base().mean() == doctest::Approx(9.0));

    CHECK_THROWS_AS((void)link(gamma_only(-1.0, 4.0), stats_of(1.0, 0.0), {}, 0.0, 75.0), InfeasibleLinkError);
    CHECK_THROWS_AS((void)link(gamma_only(1.0, -4.0), stats_of(1.0, 0.0), {}, 0.0, 75.0), InfeasibleLinkError);
    auto r = gamma_only(1.0, 1.0);
    r.beta[0] = -1.0;
    CHECK_THROWS_AS((void)link(r, stats_of(1.0, 0.0), {}, 0.0, 75.0), InfeasibleLinkError);
}

TEST_CASE("mixture density and cdf") {
    CensoredLaw<GammaLaw> g(GammaLaw(2.0, 8.0), 75.0);
    CensoredLaw<TruncNormalLaw> t(TruncNormalLaw(50.0, 20.0), 75.0);
    MixturePredictive only_g(0.0, g, t);
    MixturePredictive only_t(1.0, g, t);
    for (double x : {0.3, 14.0, 75.0}) {
        CHECK(only_g.pdf(x).value == doctest::Approx(g.density(x).value));
        CHECK(only_t.pdf(x).value == doctest::Approx(t.density(x).value));
    }
    CHECK(only_g.quantile(0.37) == doctest::Approx(g.quantile(0.37)).epsilon(1e-9));


    MixturePredictive m(0.3, g, t);
    CHECK(m.cdf(75.0) == 1.0);
    CHECK(m.pdf(75.0).discrete);
    CHECK(m.pdf(75.0).value == doctest::Approx(0.7 * g.point_mass() + 0.3 * t.point_mass()));
    CHECK_THROWS_AS((void)m.pdf(80.0), DomainError);
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double c = m.cdf(75.0 * i / 1000.0);
        CHECK(c >= prev);
        prev = c;
    }

    // point-mass frequency of draws
    const std::size_t n = 100000;
    Rng rng(17);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += m.draw(rng) == 75.0;
    const double pm = m.point_mass();
    CHECK(std::abs(static_cast<double>(hits) / n - pm) < 3.0 * std::sqrt(pm * (1.0 - pm) / n));
}

TEST_CASE("normalization for random feasible parameters") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto base = testing::reference_truth();
    int checked = 0;
    while (checked < 100) {
        auto p = base;
        p.gamma_w = 0.2 * z(rng);
        for (auto& a : p.a) a += 0.5 * z(rng);
        for (auto& a : p.alpha) a += 3.0 * z(rng);
        for (auto& b : p.b) b += 0.5 * z(rng);
        for (auto& b : p.beta) b += 0.5 * z(rng);
        p.a[1] = p.alpha[1] = 0.0;
        try {
            auto m = link(p, stats_of(40.0 * u(rng), 5.0 * u(rng), 1 + static_cast<int>(365 * u(rng))),
                          {}, 40.0 * u(rng), 75.0);
            CHECK(continuous_mass(m) + m.point_mass() == doctest::Approx(1.0).epsilon(1e-6));
            ++checked;
        } catch (const InfeasibleLinkError&) {
        }
    }
}

TEST_CASE("log score objective") {
    auto p = testing::reference_truth();
    auto cases = testing::simulate_mixture_cases(p, 200, 4);
    std::vector<MixtureCase> mc;
    for (const auto& fc : cases) mc.push_back(make_mixture_case(fc));

    MixtureCase top = mc.front();
    top.obs = 75.0;
    const double pm = link(p, top).point_mass();
    CHECK(mixture_log_score(p, top) == doctest::Approx(-std::log(std::max(pm, kDensityFloor))));
    CHECK(logs_objective(p, std::span(&top, 1)) == doctest::Approx(-std::log(std::max(pm, kDensityFloor))));

    // a case with a visible point mass
    auto wide = gamma_only(60.0, 400.0);
    wide.gamma_w = -10.0;
    const double wpm = link(wide, top).point_mass();
    CHECK(wpm > 0.05);
    CHECK(logs_objective(wide, std::span(&top, 1)) == doctest::Approx(-std::log(wpm)));

    auto doubled = mc;
    doubled.insert(doubled.end(), mc.begin(), mc.end());
    CHECK(logs_objective(p, doubled) == doctest::Approx(logs_objective(p, mc)).epsilon(1e-12));

    auto bad = p;
    bad.b[0] = -1e6;
    CHECK(std::isinf(logs_objective(bad, mc)));
    CHECK_THROWS((void)logs_objective(p, std::span<const MixtureCase>{}));

    // floor on the observation keeps shape < 1 densities finite
    auto zero = mc.front();
    zero = make_mixture_case([&] {
        auto fc = cases.front();
        fc.obs = 0.0;
        return fc;
    }());
    CHECK(zero.obs == kMinScoredObs);
}

TEST_CASE("fit") {
    const auto truth = testing::reference_truth();
    auto cases = testing::simulate_mixture_cases(truth, 1500, 21);
    std::vector<MixtureCase> mc;
    for (const auto& fc : cases) mc.push_back(make_mixture_case(fc));

    auto fit = fit_mixture(mc, false, true);
    CHECK(fit.params.a[1] == 0.0);
    CHECK(fit.params.alpha[1] == 0.0);
    CHECK(fit.objective <= logs_objective(cold_start(mc, false, true), mc));
    CHECK(fit.objective == doctest::Approx(logs_objective(fit.params, mc)));

    auto warm = fit_mixture(mc, false, true, fit.params);
    CHECK(warm.objective <= fit.objective + 1e-6);

    auto doubled = mc;
    doubled.insert(doubled.end(), mc.begin(), mc.end());
    auto fit2 = fit_mixture(doubled, false, true);
    CHECK(std::abs(fit2.objective - fit.objective) < 1e-9 + 1e-6 * std::abs(fit.objective));

    // near-stationary: central differences shrink relative to the cold start
    auto grad_norm = [&](const MixtureParams& p) {
        auto x = p.to_free();
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
            auto up = x, dn = x;
            up[i] += h;
            dn[i] -= h;
            const double d = (logs_objective(MixtureParams::from_free(up, false, true), mc) -
                              logs_objective(MixtureParams::from_free(dn, false, true), mc)) / (2.0 * h);
            s += d * d;
        }
        return std::sqrt(s);
    };
    CHECK(grad_norm(fit.params) < 1e-2 * grad_norm(cold_start(mc, false, true)));

    CHECK_THROWS_AS((void)fit_mixture(std::span(mc).first(10), false, true), FitError);
}

TEST_CASE("constant ensemble reduces to a gamma regression") {
    std::mt19937_64 rng(5);
    std::gamma_distribution<double> g(3.0, 4.0);
    std::vector<MixtureCase> mc;
    double total = 0.0;
    for (int i = 0; i < 5000; ++i) {
        MixtureCase c;
        c.stats = stats_of(10.0, 0.0, 1 + i % 365);
        c.f_ctrl = 10.0;
        c.x_max = 75.0;
        c.obs = std::max(g(rng), kMinScoredObs);
        total += c.obs;
        mc.push_back(c);
    }
    auto fit = fit_mixture(mc, false, true);
    double mean = 0.0;
    for (const auto& c : mc) mean += link(fit.params, c).mean();
    CHECK(mean / 5000.0 == doctest::Approx(total / 5000.0).epsilon(0.05));
}
