#include <doctest.h>

#include "viscal/simplex.hpp"

#include <cmath>
#include <limits>

using namespace viscal;

TEST_CASE("rosenbrock") {
    auto f = [](std::span<const double> x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    SimplexOptions opt;
    opt.rel_tol = 1e-14;
    opt.abs_tol = 1e-16;
    auto r = nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5}, opt);
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("quadratic in ten dimensions") {
    auto f = [](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * std::pow(x[i] - 0.1 * i, 2);
        return s;
    };
    SimplexOptions opt;
    opt.rel_tol = 1e-12;
    auto r = nelder_mead(f, std::vector<double>(10, 1.0), std::vector<double>(10, 0.3), opt);
    CHECK(r.value < 1e-6);
}

TEST_CASE("infeasible region is a barrier") {
    // minimum at x = -1 lies outside the feasible half-line
    auto f = [](std::span<const double> x) {
        if (x[0] <= 0.0) return std::numeric_limits<double>::quiet_NaN();
        return (x[0] + 1.0) * (x[0] + 1.0);
    };
    auto r = nelder_mead(f, {3.0}, {1.0});
    CHECK(r.x[0] > 0.0);
    CHECK(r.x[0] < 1e-3);
}

TEST_CASE("never worse than the start") {
    auto f = [](std::span<const double> x) { return std::abs(x[0]) + std::abs(x[1]); };
    auto r = nelder_mead(f, {0.0, 0.0}, {1.0, 1.0});
    CHECK(r.value == 0.0);
    SimplexOptions tiny;
    tiny.max_evals = 3;
    auto s = nelder_mead(f, {2.0, -1.0}, {5.0, 5.0}, tiny);
    CHECK(s.value <= 3.0);
}
