#include "viscal/simplex.hpp"

#include "viscal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace viscal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vertex {
    std::vector<double> x;
    double f = kInf;
};

class Run {
public:
    Run(const Objective& f, const SimplexOptions& opt, std::size_t& evals)
        : f_(f), opt_(opt), evals_(evals) {}

    double eval(std::span<const double> x) {
        ++evals_;
        const double v = f_(x);
        return std::isfinite(v) ? v : kInf;
    }

    bool budget_left() const { return evals_ < opt_.max_evals; }

    // Returns true when the spread criterion was met.
    bool minimize(std::vector<Vertex>& simplex) {
        const std::size_t n = simplex.size() - 1;
        const double dn = static_cast<double>(n);
        // adaptive coefficients reduce to the classic (1, 2, 1/2, 1/2) at n = 2
        const double da = static_cast<double>(std::max<std::size_t>(n, 2));
        const double reflect = 1.0;
        const double expand = 1.0 + 2.0 / da;
        const double contract = 0.75 - 1.0 / (2.0 * da);
        const double shrink = 1.0 - 1.0 / da;

        std::vector<double> centroid(n);
        std::vector<double> trial(n);
        auto point = [&](double coef, const Vertex& worst, std::vector<double>& out) {
            for (std::size_t j = 0; j < n; ++j) {
                out[j] = centroid[j] + coef * (centroid[j] - worst.x[j]);
            }
        };

        for (;;) {
            std::stable_sort(simplex.begin(), simplex.end(),
                             [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
            const double best = simplex.front().f;
            const double worst = simplex.back().f;
            if (std::isfinite(worst) &&
                2.0 * std::fabs(worst - best) <=
                    opt_.rel_tol * (std::fabs(worst) + std::fabs(best)) + opt_.abs_tol) {
                return true;
            }
            if (!budget_left()) return false;

            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i].x[j];
            }
            for (double& c : centroid) c /= dn;

            Vertex& w = simplex.back();
            const double second_worst = simplex[n - 1].f;

            point(reflect, w, trial);
            const double fr = eval(trial);
            if (fr < best) {
                std::vector<double> exp_pt(n);
                point(reflect * expand, w, exp_pt);
                const double fe = eval(exp_pt);
                if (fe < fr) {
                    w.x = std::move(exp_pt);
                    w.f = fe;
                } else {
                    w.x = trial;
                    w.f = fr;
                }
                continue;
            }
            if (fr < second_worst) {
                w.x = trial;
                w.f = fr;
                continue;
            }
            // contraction, outside or inside
            const bool outside = fr < w.f;
            std::vector<double> con(n);
            point(outside ? reflect * contract : -contract, w, con);
            const double fc = eval(con);
            if (fc < (outside ? fr : w.f)) {
                w.x = std::move(con);
                w.f = fc;
                continue;
            }
            // shrink toward the best vertex
            for (std::size_t i = 1; i <= n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    simplex[i].x[j] =
                        simplex[0].x[j] + shrink * (simplex[i].x[j] - simplex[0].x[j]);
                }
                simplex[i].f = eval(simplex[i].x);
                if (!budget_left()) break;
            }
        }
    }

private:
    const Objective& f_;
    const SimplexOptions& opt_;
    std::size_t& evals_;
};

std::vector<Vertex> build_simplex(Run& run, const Vertex& start, const std::vector<double>& steps) {
    const std::size_t n = start.x.size();
    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    simplex.push_back(start);
    for (std::size_t i = 0; i < n; ++i) {
        Vertex v{start.x, kInf};
        v.x[i] += steps[i];
        v.f = run.eval(v.x);
        if (!std::isfinite(v.f)) {
            // try the opposite direction before giving up on this edge
            v.x[i] = start.x[i] - steps[i];
            v.f = run.eval(v.x);
        }
        simplex.push_back(std::move(v));
    }
    return simplex;
}

}  // namespace

SimplexResult nelder_mead(const Objective& f, std::vector<double> start, std::vector<double> steps,
                          const SimplexOptions& options) {
    if (start.empty()) {
        throw ParameterError("nelder_mead: empty parameter vector");
    }
    if (steps.size() != start.size()) {
        throw ParameterError("nelder_mead: steps and start differ in length");
    }
    SimplexResult result;
    Run run(f, options, result.evals);
    Vertex best{std::move(start), kInf};
    best.f = run.eval(best.x);

    bool converged = false;
    for (std::size_t round = 0; round <= options.restarts; ++round) {
        auto simplex = build_simplex(run, best, steps);
        converged = run.minimize(simplex);
        const auto it = std::min_element(simplex.begin(), simplex.end(),
                                         [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        if (it->f <= best.f) best = *it;
        if (!run.budget_left()) break;
    }
    result.x = std::move(best.x);
    result.value = best.f;
    result.converged = converged;
    return result;
}

}  // namespace viscal
