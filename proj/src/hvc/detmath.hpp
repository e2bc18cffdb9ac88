#pragma once

// Deterministic scalar math used on every path that must be bit-reproducible
// across platforms (prior/posterior evaluation, PMF construction, synthetic
// data). libm transcendentals vary between implementations, so everything
// here is built from IEEE basic operations only (+,-,*,/,sqrt,floor,ldexp),
// which are correctly rounded everywhere.

namespace hvc::detmath {

double dm_exp(double x);
double dm_log(double x);    // x <= 0 -> -inf (0) / NaN (<0)
double dm_log1p(double x);
double dm_log2(double x);
double dm_tanh(double x);
double dm_erf(double x);
double dm_erfc(double x);

// Standard normal CDF, PDF and inverse CDF.
double norm_cdf(double x);
double norm_pdf(double x);
double norm_icdf(double p); // p in (0,1)

// Half-away-from-zero rounding (the single tie rule used everywhere).
double round_half_away(double x);

} // namespace hvc::detmath
