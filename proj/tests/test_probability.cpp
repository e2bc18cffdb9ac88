#include <doctest.h>

#include <cmath>

#include "hvc/detmath.hpp"
#include "hvc/graph.hpp"
#include "hvc/io.hpp"
#include "hvc/prob.hpp"
#include "hvc/rng.hpp"

using namespace hvc;

namespace {

// Independent oracle: composite-Simpson integration of the standard normal
// density over (lo, hi).
double simpson_normal_mass(double lo, double hi, int n = 4000) {
    double h = (hi - lo) / n;
    double s = detmath::norm_pdf(lo) + detmath::norm_pdf(hi);
    for (int i = 1; i < n; ++i) {
        double x = lo + h * i;
        s += detmath::norm_pdf(x) * (i % 2 ? 4.0 : 2.0);
    }
    return s * h / 3.0;
}

} // namespace

TEST_CASE("likelihood at the center matches numerical integration") {
    double oracle = simpson_normal_mass(-0.5, 0.5);
    CHECK(oracle == doctest::Approx(0.3829249).epsilon(1e-6));
    CHECK(gc_likelihood(0.0, 0.0, 1.0) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(gc_likelihood(3.0, 3.0, 1.0) == doctest::Approx(0.3829249).epsilon(1e-6));
}

TEST_CASE("likelihood tail clamps at p_min and is symmetric") {
    CHECK(gc_likelihood(10.0, 0.0, 0.2) == coding::kPMin);
    Rng rng(31);
    for (int i = 0; i < 1000; ++i) {
        double a = rng.uniform(-8.0, 8.0);
        double sg = rng.uniform(0.11, 64.0);
        // around mu = 0 the offsets are exactly representable: bitwise equal
        CHECK(gc_likelihood(a, 0.0, sg) == gc_likelihood(-a, 0.0, sg));
        // around an arbitrary mu the inputs themselves carry rounding noise
        double mu = rng.uniform(-3.0, 3.0);
        double lhs = gc_likelihood(mu + a, mu, sg);
        double rhs = gc_likelihood(mu - a, mu, sg);
        CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(lhs, rhs));
    }
    CHECK_THROWS_AS(gc_likelihood(std::nan(""), 0.0, 1.0), Error);
    CHECK_THROWS_AS(gc_likelihood(0.0, 0.0, 0.0), Error);
}

TEST_CASE("likelihood sums to 1 over a wide symbol window") {
    for (double sg : {0.11, 0.37, 1.0, 3.0, 17.0, 64.0}) {
        double sum = 0.0;
        for (int s = -1000; s <= 1000; ++s) {
            double b = std::fabs(static_cast<double>(s));
            sum += detmath::norm_cdf((-b + 0.5) / sg) - detmath::norm_cdf((-b - 0.5) / sg);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("rate at the center and additivity") {
    CHECK(gc_rate_bits(0.0, 0.0, 1.0) == doctest::Approx(1.3850).epsilon(1e-4));
    // minimized over z at z = mu
    for (double dz : {0.25, 0.5, 1.0, 2.0}) {
        CHECK(gc_rate_bits(dz, 0.0, 1.0) > gc_rate_bits(0.0, 0.0, 1.0));
        CHECK(gc_rate_bits(-dz, 0.0, 1.0) > gc_rate_bits(0.0, 0.0, 1.0));
    }
    // doubling identical elements doubles the summed rate
    Graph g;
    Tensor z1 = Tensor::full({1, 1, 1, 1}, 0.3, Dtype::F64);
    Tensor z2 = Tensor::full({1, 1, 1, 2}, 0.3, Dtype::F64);
    Tensor m1 = Tensor::zeros({1, 1, 1, 1}, Dtype::F64);
    Tensor m2 = Tensor::zeros({1, 1, 1, 2}, Dtype::F64);
    Tensor s1 = Tensor::full({1, 1, 1, 1}, 0.8, Dtype::F64);
    Tensor s2 = Tensor::full({1, 1, 1, 2}, 0.8, Dtype::F64);
    double r1 = g.val(g.sum_all(g.rate_bits(g.leaf(z1), g.leaf(m1), g.leaf(s1), coding::kPMin))).at(0);
    double r2 = g.val(g.sum_all(g.rate_bits(g.leaf(z2), g.leaf(m2), g.leaf(s2), coding::kPMin))).at(0);
    CHECK(r2 == doctest::Approx(2.0 * r1).epsilon(1e-12));
}

TEST_CASE("quantize_train_rate: support, mean, determinism, mode guard") {
    Graph g;
    Rng rng(41);
    Tensor mu = Tensor::zeros({1, 1, 100, 100}, Dtype::F64);
    for (int64_t i = 0; i < mu.numel(); ++i) mu.set(i, rng.uniform(-3.0, 3.0));
    Var mv = g.leaf(mu);

    Rng noise_a(77);
    Var qa = quantize_train_rate(g, mv, noise_a, true);
    for (int64_t i = 0; i < mu.numel(); ++i) {
        CHECK(std::fabs(g.val(qa).at(i) - mu.at(i)) <= 0.5);
    }
    Rng noise_b(77);
    Var qb = quantize_train_rate(g, g.leaf(mu), noise_b, true);
    for (int64_t i = 0; i < mu.numel(); ++i) CHECK(g.val(qa).at(i) == g.val(qb).at(i));

    // Monte-Carlo mean of the noise over 1e6 draws
    Tensor flat = Tensor::zeros({1, 1, 1000, 1000}, Dtype::F64);
    Rng noise_c(123);
    Var qc = quantize_train_rate(g, g.leaf(flat), noise_c, true);
    double m2 = 0.0;
    for (int64_t i = 0; i < flat.numel(); ++i) m2 += g.val(qc).at(i);
    CHECK(std::fabs(m2 / static_cast<double>(flat.numel())) < 0.002);

    Rng noise_d(1);
    CHECK_THROWS_AS(quantize_train_rate(g, mv, noise_d, false), Error);
}

TEST_CASE("quantize_train_recon rounding rules") {
    Graph g;
    Tensor mu = Tensor::from_values({1, 1, 1, 4}, {0.4, 0.6, 0.5, -0.5}, Dtype::F64);
    Var q = quantize_train_recon(g, g.leaf(mu));
    CHECK(g.val(q).at(0) == 0.0);
    CHECK(g.val(q).at(1) == 1.0);
    CHECK(g.val(q).at(2) == 1.0);  // half away from zero
    CHECK(g.val(q).at(3) == -1.0); // half away from zero
}

TEST_CASE("residual_round arithmetic, idempotence and clamping") {
    Tensor mu = Tensor::from_values({1, 1, 1, 3}, {2.7, 1.25, -0.3}, Dtype::F64);
    Tensor mu_hat = Tensor::from_values({1, 1, 1, 3}, {2.2, 1.25, -0.3}, Dtype::F64);
    ResidualRoundResult r = residual_round(mu, mu_hat);
    CHECK(r.symbols[0] == 1); // round(0.5) half-away
    CHECK(r.z.at(0) == doctest::Approx(3.2).epsilon(1e-15));
    CHECK(r.symbols[1] == 0);
    CHECK(r.z.at(1) == 1.25);
    CHECK(r.clamped == 0);

    // mu_hat integer-valued -> z integer-valued
    Tensor m2 = Tensor::from_values({1, 1, 1, 2}, {3.4, -2.8}, Dtype::F64);
    Tensor h2 = Tensor::from_values({1, 1, 1, 2}, {3.0, -2.0}, Dtype::F64);
    ResidualRoundResult r2 = residual_round(m2, h2);
    for (int64_t i = 0; i < 2; ++i) {
        CHECK(r2.z.at(i) == std::floor(r2.z.at(i)));
        CHECK(std::fabs(r2.z.at(i) - m2.at(i)) <= 0.5);
    }

    // idempotent: applying it to its own output returns the same z and
    // all-zero symbols
    ResidualRoundResult r4 = residual_round(r2.z, r2.z);
    CHECK(r4.z.at(0) == r2.z.at(0));
    CHECK(r4.z.at(1) == r2.z.at(1));
    CHECK(r4.symbols[0] == 0);
    CHECK(r4.symbols[1] == 0);

    // out-of-range residuals clamp and count
    Tensor big = Tensor::from_values({1, 1, 1, 2}, {500.0, -500.0}, Dtype::F64);
    Tensor zero = Tensor::zeros({1, 1, 1, 2}, Dtype::F64);
    ResidualRoundResult r5 = residual_round(big, zero);
    CHECK(r5.clamped == 2);
    CHECK(r5.symbols[0] == coding::kSymbolMax);
    CHECK(r5.symbols[1] == coding::kSymbolMin);
}

TEST_CASE("sigma grid endpoints and quantizer monotonicity") {
    const auto& grid = sigma_grid();
    CHECK(grid.front() == coding::kSigmaMin);
    CHECK(grid.back() == coding::kSigmaMax);
    CHECK(quantize_sigma_index(coding::kSigmaMin) == 0);
    CHECK(quantize_sigma_index(coding::kSigmaMax) == coding::kSigmaGridSize - 1);
    CHECK(quantize_sigma_index(0.0001) == 0);
    CHECK(quantize_sigma_index(1e6) == coding::kSigmaGridSize - 1);
    int prev = 0;
    for (double s = coding::kSigmaMin; s <= coding::kSigmaMax; s *= 1.07) {
        int idx = quantize_sigma_index(s);
        CHECK(idx >= prev);
        CHECK(std::fabs(detmath::dm_log(grid[static_cast<size_t>(idx)] / s)) < 0.07);
        prev = idx;
    }
}

TEST_CASE("pmf tables: normalization, uniform limit, sigma_min concentration") {
    Rng rng(51);
    for (int i = 0; i < 1000; ++i) {
        double sg = std::exp(rng.uniform(std::log(0.11), std::log(256.0)));
        PmfTable t = build_pmf(sg);
        uint64_t sum = 0;
        for (uint32_t f : t.freq) {
            CHECK(f >= 1);
            sum += f;
        }
        CHECK(sum == coding::kFreqTotal);
        CHECK(t.cum.back() == coding::kFreqTotal);
    }

    // sigma = 64: near-uniform over the central range [-32, 31]
    const PmfTable& t64 = pmf_for_sigma_index(quantize_sigma_index(64.0));
    uint32_t fmin = ~0u, fmax = 0;
    for (int s = -32; s <= 31; ++s) {
        uint32_t f = t64.freq[static_cast<size_t>(s - coding::kSymbolMin)];
        fmin = std::min(fmin, f);
        fmax = std::max(fmax, f);
    }
    CHECK(static_cast<double>(fmax) / fmin < 1.5);

    // sigma at the clamp floor: symbol 0 carries > 99% of the mass
    const PmfTable& tmin = pmf_for_sigma_index(0);
    double p0 = static_cast<double>(tmin.freq[static_cast<size_t>(-coding::kSymbolMin)]) /
                coding::kFreqTotal;
    CHECK(p0 > 0.99);
}

TEST_CASE("pmf determinism: serialize-rebuild gives byte-identical tables") {
    Rng rng(61);
    Tensor mu = Tensor::zeros({1, 2, 3, 3}, Dtype::F32);
    Tensor sg = Tensor::zeros({1, 2, 3, 3}, Dtype::F32);
    for (int64_t i = 0; i < sg.numel(); ++i) {
        mu.set(i, rng.uniform(-2.0, 2.0));
        sg.set(i, std::exp(rng.uniform(std::log(0.11), std::log(256.0))));
    }
    ByteWriter w;
    for (int64_t i = 0; i < sg.numel(); ++i) {
        w.f32(static_cast<float>(mu.at(i)));
        w.f32(static_cast<float>(sg.at(i)));
    }
    ByteReader r(w.data());
    std::vector<int32_t> idx_a = sigma_indices(sg);
    Tensor sg2 = Tensor::zeros(sg.shape(), Dtype::F32);
    for (int64_t i = 0; i < sg.numel(); ++i) {
        r.f32(); // mu: tables depend only on sigma
        sg2.set(i, r.f32());
    }
    std::vector<int32_t> idx_b = sigma_indices(sg2);
    CHECK(idx_a == idx_b);
    for (size_t i = 0; i < idx_a.size(); ++i) {
        const PmfTable& ta = pmf_for_sigma_index(idx_a[i]);
        const PmfTable& tb = pmf_for_sigma_index(idx_b[i]);
        CHECK(ta.freq == tb.freq);
        CHECK(ta.cum == tb.cum);
    }
}
