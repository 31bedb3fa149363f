#include <doctest.h>

#include "viscal/distributions.hpp"
#include "viscal/errors.hpp"
#include "support/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <numeric>

using namespace viscal;

namespace {

template <class Base>
double total_mass(const CensoredLaw<Base>& law) {
    using boost::math::quadrature::gauss_kronrod;
    const double c = gauss_kronrod<double, 61>::integrate(
        [&](double x) { return law.base().pdf(x); }, 0.0, law.x_max(), 15, 1e-12);
    return c + law.point_mass();
}

}  // namespace

TEST_CASE("densities") {
    CHECK(TruncNormalLaw(0.0, 1.0).pdf(0.0) == doctest::Approx(0.7978845608).epsilon(1e-10));
    CHECK(TruncNormalLaw(0.0, 1.0).pdf(-0.1) == 0.0);
    CHECK(GammaLaw(1.0, 2.0).pdf(0.0) == doctest::Approx(0.5));
    BetaOnRange u(1.0, 1.0, 75.0);
    for (double x : {0.0, 12.0, 74.9}) CHECK(u.pdf(x) == doctest::Approx(1.0 / 75.0));
    CHECK(std::isinf(GammaLaw(0.5, 1.0).pdf(0.0)));
    CHECK_THROWS_AS(GammaLaw(-1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(TruncNormalLaw(0.0, 0.0), ParameterError);
}

TEST_CASE("cdfs") {
    CHECK(GammaLaw(1.0, 10.0).cdf(75.0) == doctest::Approx(1.0 - std::exp(-7.5)).epsilon(1e-13));
    CHECK(TruncNormalLaw(0.0, 1.0).cdf(INFINITY) == 1.0);
    CHECK(BetaOnRange(1.0, 1.0, 75.0).cdf(30.0) == doctest::Approx(0.4));
    // deep truncation keeps a proper normalizer
    TruncNormalLaw deep(-20.0, 1.0);
    CHECK(deep.cdf(0.05) == doctest::Approx(1.0 - std::erfc(20.05 / std::numbers::sqrt2) / std::erfc(20.0 / std::numbers::sqrt2)).epsilon(1e-10));
}

TEST_CASE("censored density") {
    CensoredLaw<GammaLaw> c(GammaLaw(1.0, 10.0), 75.0);
    auto at_max = c.density(75.0);
    CHECK(at_max.discrete);
    CHECK(at_max.value == doctest::Approx(std::exp(-7.5)).epsilon(1e-10));
    CHECK(c.density(20.0).value == doctest::Approx(GammaLaw(1.0, 10.0).pdf(20.0)));
    CHECK_FALSE(c.density(20.0).discrete);
    CHECK_THROWS_AS((void)c.density(75.5), DomainError);

    CensoredLaw<TruncNormalLaw> tight(TruncNormalLaw(1.0, 0.1), 75.0);
    CHECK(tight.point_mass() == 0.0);
}

TEST_CASE("censored laws integrate to one") {
    CHECK(total_mass(CensoredLaw<GammaLaw>(GammaLaw(2.0, 20.0), 75.0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(total_mass(CensoredLaw<GammaLaw>(GammaLaw(0.7, 30.0), 75.0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(total_mass(CensoredLaw<TruncNormalLaw>(TruncNormalLaw(60.0, 15.0), 75.0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(total_mass(CensoredLaw<TruncNormalLaw>(TruncNormalLaw(-3.0, 4.0), 75.0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("quantiles") {
    CHECK(BetaOnRange(1.0, 1.0, 75.0).quantile(0.5) == doctest::Approx(37.5).epsilon(1e-9));
    CHECK(GammaLaw(1.0, 10.0).quantile(0.5) == doctest::Approx(10.0 * std::numbers::ln2).epsilon(1e-9));
    CensoredLaw<GammaLaw> c(GammaLaw(1.0, 10.0), 75.0);
    CHECK(c.quantile(0.9999) == 75.0);
    CHECK_THROWS_AS((void)c.quantile(NAN), DomainError);

    // quantile(cdf(x)) = x inside the support
    GammaLaw g(2.3, 4.0);
    TruncNormalLaw t(3.0, 5.0);
    BetaOnRange b(2.0, 5.0, 75.0);
    for (double x : {0.5, 3.0, 11.0, 40.0}) {
        CHECK(g.quantile(g.cdf(x)) == doctest::Approx(x).epsilon(1e-6));
        CHECK(b.quantile(b.cdf(x)) == doctest::Approx(x).epsilon(1e-6));
    }
    for (double x : {0.5, 3.0, 11.0, 20.0}) CHECK(t.quantile(t.cdf(x)) == doctest::Approx(x).epsilon(1e-6));
}

TEST_CASE("sampling") {
    const auto s = sample(GammaLaw(2.0, 3.0), 1000000, 7);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    // sd of the mean: sqrt(k) theta / sqrt(n)
    CHECK(std::abs(mean - 6.0) < 3.0 * std::sqrt(2.0) * 3.0 / 1000.0);

    CensoredLaw<TruncNormalLaw> c(TruncNormalLaw(70.0, 10.0), 75.0);
    const auto cs = sample(c, 10000, 3);
    CHECK(*std::max_element(cs.begin(), cs.end()) == 75.0);
    CHECK(sample(c, 100, 11) == sample(c, 100, 11));

    // draws agree with the cdf
    GammaLaw g(1.7, 5.0);
    auto gs = sample(g, 100000, 5);
    std::vector<double> u(gs.size());
    std::transform(gs.begin(), gs.end(), u.begin(), [&](double x) { return g.cdf(x); });
    CHECK(testing::ks_uniform_statistic(u) < 0.01);
    TruncNormalLaw t(2.0, 3.0);
    auto ts = sample(t, 100000, 6);
    std::transform(ts.begin(), ts.end(), u.begin(), [&](double x) { return t.cdf(x); });
    CHECK(testing::ks_uniform_statistic(u) < 0.01);
}

TEST_CASE("beta from moments") {
    auto u = beta_from_moments(37.5, 75.0 / std::sqrt(12.0), 75.0);
    CHECK(u.alpha() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(u.beta() == doctest::Approx(1.0).epsilon(1e-12));

    auto narrow = beta_from_moments(37.5, 1e-4, 75.0);
    CHECK(narrow.alpha() > 1e7);
    CHECK(narrow.alpha() / narrow.beta() == doctest::Approx(1.0));

    auto b = beta_from_moments(25.0, 10.0, 75.0);
    CHECK(b.mean() == doctest::Approx(25.0).epsilon(1e-10));
    CHECK(b.sd() == doctest::Approx(10.0).epsilon(1e-10));

    CHECK_THROWS_AS((void)beta_from_moments(37.5, 40.0, 75.0), InfeasibleMomentsError);
}
