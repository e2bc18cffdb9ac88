#include <doctest.h>

#include <cmath>

#include "hvc/detmath.hpp"
#include "hvc/rng.hpp"

using namespace hvc;
using namespace hvc::detmath;

TEST_CASE("exp/log/tanh agree with libm to high accuracy") {
    Rng rng(7);
    for (int i = 0; i < 20000; ++i) {
        double x = rng.uniform(-40.0, 40.0);
        double e = dm_exp(x);
        CHECK(std::fabs(e - std::exp(x)) <= 1e-13 * std::exp(x) + 1e-300);
        double t = dm_tanh(x);
        CHECK(std::fabs(t - std::tanh(x)) <= 1e-13);
    }
    for (int i = 0; i < 20000; ++i) {
        double x = std::exp(rng.uniform(-300.0, 300.0));
        double l = dm_log(x);
        CHECK(std::fabs(l - std::log(x)) <= 1e-12 * std::max(1.0, std::fabs(std::log(x))));
    }
    for (int i = 0; i < 5000; ++i) {
        double u = rng.uniform(-0.2, 0.2);
        CHECK(std::fabs(dm_log1p(u) - std::log1p(u)) <= 1e-15 * std::max(1.0, std::fabs(std::log1p(u))) + 1e-18);
    }
}

TEST_CASE("exp edge cases") {
    CHECK(dm_exp(0.0) == 1.0);
    CHECK(dm_exp(-1000.0) == 0.0);
    CHECK(std::isinf(dm_exp(1000.0)));
    CHECK(std::isnan(dm_exp(std::nan(""))));
    CHECK(dm_log(0.0) == -std::numeric_limits<double>::infinity());
    CHECK(std::isnan(dm_log(-1.0)));
}

TEST_CASE("erf/erfc accuracy against libm") {
    Rng rng(11);
    for (int i = 0; i < 20000; ++i) {
        double x = rng.uniform(-8.0, 8.0);
        CHECK(std::fabs(dm_erf(x) - std::erf(x)) <= 2e-14);
        double rel = std::fabs(dm_erfc(x) - std::erfc(x)) / std::max(std::erfc(x), 1e-300);
        CHECK(rel <= 1e-11);
    }
    // fixed spot checks
    CHECK(dm_erf(0.0) == 0.0);
    CHECK(std::fabs(dm_erf(1.0) - 0.8427007929497149) < 1e-14);
    CHECK(std::fabs(dm_erfc(2.0) - 0.004677734981063127) < 5e-14);
    CHECK(std::fabs(dm_erfc(5.0) - 1.5374597944280351e-12) < 1e-24);
}

TEST_CASE("normal cdf/pdf/icdf consistency") {
    Rng rng(13);
    CHECK(std::fabs(norm_cdf(0.0) - 0.5) < 1e-15);
    for (int i = 0; i < 2000; ++i) {
        double x = rng.uniform(-6.0, 6.0);
        // cdf is within [0,1] and monotone via icdf round-trip
        double p = norm_cdf(x);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        double xr = norm_icdf(p);
        CHECK(std::fabs(xr - x) < 2e-8 * std::max(1.0, std::fabs(x)));
    }
    // pdf matches the derivative of cdf numerically
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(-4.0, 4.0);
        double h = 1e-6;
        double d = (norm_cdf(x + h) - norm_cdf(x - h)) / (2 * h);
        CHECK(std::fabs(d - norm_pdf(x)) < 1e-8);
    }
}

TEST_CASE("round_half_away tie rule") {
    CHECK(round_half_away(0.5) == 1.0);
    CHECK(round_half_away(-0.5) == -1.0);
    CHECK(round_half_away(2.5) == 3.0);
    CHECK(round_half_away(-2.5) == -3.0);
    CHECK(round_half_away(0.4) == 0.0);
    CHECK(round_half_away(0.6) == 1.0);
    CHECK(round_half_away(-0.4) == 0.0);
}

TEST_CASE("rng determinism and distribution bounds") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng r(99);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::fabs(sum / 100000.0 - 0.5) < 0.01);
    for (int i = 0; i < 1000; ++i) {
        CHECK(std::fabs(r.trunc_normal(0.02)) <= 0.04);
    }
}
