#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace viscal {

struct SimplexOptions {
    double rel_tol = 1e-6;         ///< relative spread of vertex values at convergence
    double abs_tol = 1e-12;        ///< added to the relative criterion for near-zero optima
    std::size_t max_evals = 10000;
    std::size_t restarts = 1;      ///< rebuilds of the simplex around the best point
};

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evals = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Derivative-free Nelder-Mead minimization with dimension-adaptive
/// coefficients. `steps` gives the initial simplex edge per coordinate.
/// Non-finite objective values are treated as +inf, so an infeasible region
/// acts as a barrier. The best vertex never gets worse than `start`.
[[nodiscard]] SimplexResult nelder_mead(const Objective& f, std::vector<double> start,
                                        std::vector<double> steps,
                                        const SimplexOptions& options = {});

}  // namespace viscal
