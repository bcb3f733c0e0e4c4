#pragma once

// Standard-normal helpers and the bivariate upper tail used for
// copula-censoring survival functions. No external numerics libraries:
// the CDF goes through erfc and the quantile is Wichura's AS 241
// (PPND16) rational approximation, accurate to ~1e-16 over (0,1).

namespace winstat {

double norm_pdf(double x);

// P(Z <= x) via 0.5 * erfc(-x / sqrt(2)).
double norm_cdf(double x);

// P(Z > x), accurate in the upper tail.
double norm_cdf_upper(double x);

// Inverse CDF (AS 241, PPND16). Requires 0 < p < 1.
double norm_quantile(double p);

// P(Z1 > za, Z2 > zb) for (Z1, Z2) standard bivariate normal with
// correlation rho, by adaptive quadrature of the conditional normal tail
// (absolute tolerance ~1e-11). Infinite arguments give the marginal or
// trivial limits; |rho| within 1e-12 of 1 uses the comonotone or
// antithetic closed form.
double bvn_upper_tail(double za, double zb, double rho);

}  // namespace winstat
