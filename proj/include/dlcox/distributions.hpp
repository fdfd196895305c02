#pragma once

namespace dlcox::dist {

double normal_cdf(double x);
/// Upper tail 1 - Phi(x), computed without cancellation.
double normal_sf(double x);
/// Inverse of the standard normal CDF (Wichura's AS 241, ~1e-16 relative).
double normal_quantile(double prob);
/// z_a: the upper a-th quantile, P(Z > z_a) = a.
double normal_upper_quantile(double a);
/// Two-sided p-value 2 * (1 - Phi(|z|)).
double two_sided_p(double z);

/// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chisq_cdf(double x, double df);
double chisq_sf(double x, double df);
/// Upper alpha-th percentile: P(chi2_df > q) = alpha.
double chisq_upper_quantile(double alpha, double df);

}  // namespace dlcox::dist
