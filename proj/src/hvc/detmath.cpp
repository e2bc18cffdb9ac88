#include "hvc/detmath.hpp"

#include <cmath>
#include <limits>

namespace hvc::detmath {

namespace {

constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kInvLn2 = 1.44269504088896338700e+00;
constexpr double kInvSqrt2 = 7.07106781186547524401e-01;
constexpr double kInvSqrtPi = 5.64189583547756286948e-01;
constexpr double kInvSqrt2Pi = 3.98942280401432677940e-01;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

} // namespace

double dm_exp(double x) {
    if (std::isnan(x)) return kNan;
    if (x > 709.782712893384) return kInf;
    if (x < -745.2) return 0.0;
    // x = k*ln2 + r with |r| <= ln2/2, exp(x) = 2^k * exp(r).
    double kd = std::floor(x * kInvLn2 + 0.5);
    double r = (x - kd * kLn2Hi) - kd * kLn2Lo;
    // Taylor series to r^13; truncation < 5e-18 on |r| <= 0.347.
    double s = 1.0 / 6227020800.0; // 1/13!
    s = s * r + 1.0 / 479001600.0;
    s = s * r + 1.0 / 39916800.0;
    s = s * r + 1.0 / 3628800.0;
    s = s * r + 1.0 / 362880.0;
    s = s * r + 1.0 / 40320.0;
    s = s * r + 1.0 / 5040.0;
    s = s * r + 1.0 / 720.0;
    s = s * r + 1.0 / 120.0;
    s = s * r + 1.0 / 24.0;
    s = s * r + 1.0 / 6.0;
    s = s * r + 0.5;
    s = s * r + 1.0;
    s = s * r + 1.0;
    return std::ldexp(s, static_cast<int>(kd));
}

namespace {

// 2*atanh(s) = 2s * (1 + s^2/3 + s^4/5 + ...). Converges fast for |s| < 0.18.
double atanh2_poly(double s) {
    double s2 = s * s;
    double p = 1.0 / 23.0;
    p = p * s2 + 1.0 / 21.0;
    p = p * s2 + 1.0 / 19.0;
    p = p * s2 + 1.0 / 17.0;
    p = p * s2 + 1.0 / 15.0;
    p = p * s2 + 1.0 / 13.0;
    p = p * s2 + 1.0 / 11.0;
    p = p * s2 + 1.0 / 9.0;
    p = p * s2 + 1.0 / 7.0;
    p = p * s2 + 1.0 / 5.0;
    p = p * s2 + 1.0 / 3.0;
    return 2.0 * s + 2.0 * s * (s2 * p);
}

} // namespace

double dm_log(double x) {
    if (std::isnan(x) || x < 0.0) return kNan;
    if (x == 0.0) return -kInf;
    if (std::isinf(x)) return kInf;
    int e = 0;
    double m = std::frexp(x, &e); // m in [0.5, 1)
    if (m < kInvSqrt2) {
        m *= 2.0;
        e -= 1;
    }
    double s = (m - 1.0) / (m + 1.0);
    double ed = static_cast<double>(e);
    return ed * kLn2Hi + (atanh2_poly(s) + ed * kLn2Lo);
}

double dm_log1p(double x) {
    if (std::isnan(x) || x < -1.0) return kNan;
    if (x == -1.0) return -kInf;
    if (x > -0.25 && x < 0.25) {
        // log(1+x) = 2*atanh(x / (2 + x)), no cancellation for small x.
        return atanh2_poly(x / (2.0 + x));
    }
    return dm_log(1.0 + x);
}

double dm_log2(double x) { return dm_log(x) * kInvLn2; }

double dm_tanh(double x) {
    if (std::isnan(x)) return kNan;
    double a = x < 0.0 ? -x : x;
    if (a > 19.0) return x < 0.0 ? -1.0 : 1.0;
    double e = dm_exp(2.0 * a);
    double t = 1.0 - 2.0 / (e + 1.0);
    return x < 0.0 ? -t : t;
}

namespace {

// erf on [0, 2.5]: non-alternating scaled series
//   erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_{n>=0} x * (2x^2)^n / (2n+1)!!
double erf_series(double x) {
    double x2 = x * x;
    double term = x;
    double sum = x;
    double denom = 1.0;
    for (int n = 1; n <= 64; ++n) {
        denom = 2.0 * n + 1.0;
        term = term * (2.0 * x2) / denom;
        double prev = sum;
        sum += term;
        if (sum == prev) break;
    }
    return 2.0 * kInvSqrtPi * dm_exp(-x2) * sum;
}

// erfc on [2.5, inf): Laplace continued fraction, evaluated by backward
// recurrence with a fixed depth (deterministic).
//   erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
double erfc_cf(double x) {
    double f = 0.0;
    for (int n = 64; n >= 1; --n) {
        f = (0.5 * n) / (x + f);
    }
    return dm_exp(-x * x) * kInvSqrtPi / (x + f);
}

} // namespace

double dm_erf(double x) {
    if (std::isnan(x)) return kNan;
    double a = x < 0.0 ? -x : x;
    double r;
    if (a <= 2.5) {
        r = erf_series(a);
    } else if (a >= 6.5) {
        r = 1.0;
    } else {
        r = 1.0 - erfc_cf(a);
    }
    return x < 0.0 ? -r : r;
}

double dm_erfc(double x) {
    if (std::isnan(x)) return kNan;
    if (x >= 2.5) {
        if (x > 27.3) return 0.0; // exp(-x^2) underflows near here
        return erfc_cf(x);
    }
    if (x >= 0.0) return 1.0 - erf_series(x);
    // erfc(-a) = 2 - erfc(a); benign since erfc(a) > 6e-4 below the crossover.
    return 2.0 - dm_erfc(-x);
}

double norm_cdf(double x) { return 0.5 * dm_erfc(-x * kInvSqrt2); }

double norm_pdf(double x) { return kInvSqrt2Pi * dm_exp(-0.5 * x * x); }

double norm_icdf(double p) {
    if (!(p > 0.0 && p < 1.0)) return kNan;
    // Crude tail estimate (Abramowitz-Stegun 26.2.22, |err| < 4.5e-4),
    // then Newton iterations against the accurate CDF above.
    double q = p < 0.5 ? p : 1.0 - p;
    double t = std::sqrt(-2.0 * dm_log(q));
    double x = t - (2.30753 + 0.27061 * t) / (1.0 + t * (0.99229 + 0.04481 * t));
    if (p < 0.5) x = -x;
    for (int i = 0; i < 3; ++i) {
        double err = norm_cdf(x) - p;
        double d = norm_pdf(x);
        if (d <= 0.0) break;
        x -= err / d;
    }
    return x;
}

double round_half_away(double x) {
    return x >= 0.0 ? std::floor(x + 0.5) : -std::floor(-x + 0.5);
}

} // namespace hvc::detmath
