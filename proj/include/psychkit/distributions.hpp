#pragma once

// Special functions and distribution tails used by the test statistics.
// Continued fractions are evaluated with the modified Lentz method to a
// relative tolerance of 1e-15.

namespace psychkit::dist {

double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);
/// I_x(a, b).
double regularized_beta(double x, double a, double b);

double normal_pdf(double x);
double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate far into the tail.
double normal_sf(double x);
double normal_quantile(double p);

double chi2_sf(double x, double df);
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);
/// CDF of the noncentral F distribution with noncentrality `lambda`.
double noncentral_f_cdf(double x, double df1, double df2, double lambda);
/// Upper quantile: returns x with P(F > x) = p.
double f_isf(double p, double df1, double df2);

}  // namespace psychkit::dist
