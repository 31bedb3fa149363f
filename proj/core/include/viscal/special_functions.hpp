#pragma once

namespace viscal::special {

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
/// Series for x < a + 1, Lentz continued fraction for Q otherwise.
[[nodiscard]] double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// without cancellation in the upper tail.
[[nodiscard]] double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b) for a, b > 0, x in [0, 1].
[[nodiscard]] double beta_inc(double a, double b, double x);

/// log B(a, b).
[[nodiscard]] double log_beta(double a, double b);

/// Standard normal CDF.
[[nodiscard]] double normal_cdf(double z);

/// Standard normal upper tail 1 - Phi(z), accurate for large z.
[[nodiscard]] double normal_sf(double z);

/// log(1 - Phi(z)); finite for all finite z.
[[nodiscard]] double log_normal_sf(double z);

/// Standard normal density.
[[nodiscard]] double normal_pdf(double z);

}  // namespace viscal::special
