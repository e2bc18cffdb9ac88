#include "hvc/prob.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "hvc/detmath.hpp"

namespace hvc {

using detmath::dm_log;
using detmath::dm_log2;
using detmath::norm_cdf;
using detmath::round_half_away;

double gc_likelihood(double z, double mu_hat, double sigma_hat) {
    check(std::isfinite(z) && std::isfinite(mu_hat) && std::isfinite(sigma_hat) &&
              sigma_hat > 0.0,
          ErrorKind::Numeric, "gc_likelihood: non-finite input or non-positive sigma");
    double b = std::fabs(z - mu_hat);
    double p = norm_cdf((-b + 0.5) / sigma_hat) - norm_cdf((-b - 0.5) / sigma_hat);
    return p < coding::kPMin ? coding::kPMin : p;
}

double gc_rate_bits(double z, double mu_hat, double sigma_hat) {
    return -dm_log2(gc_likelihood(z, mu_hat, sigma_hat));
}

Var quantize_train_rate(Graph& g, Var mu, Rng& rng, bool training) {
    check(training, ErrorKind::Usage, "quantize_train_rate called in inference mode");
    const Tensor& mv = g.val(mu);
    Tensor noise = Tensor::zeros(mv.shape(), mv.dtype());
    for (int64_t i = 0; i < noise.numel(); ++i) noise.set(i, rng.uniform01() - 0.5);
    return g.add(mu, g.leaf(std::move(noise)));
}

Var quantize_train_recon(Graph& g, Var mu) { return g.ste_round(mu); }

ResidualRoundResult residual_round(const Tensor& mu, const Tensor& mu_hat) {
    check(mu.shape() == mu_hat.shape(), ErrorKind::Config,
          "residual_round: shape mismatch " + shape_str(mu.shape()) + " vs " +
              shape_str(mu_hat.shape()));
    ResidualRoundResult r;
    r.z = Tensor::zeros(mu.shape(), mu.dtype());
    r.symbols.resize(static_cast<size_t>(mu.numel()));
    for (int64_t i = 0; i < mu.numel(); ++i) {
        double m = mu.at(i);
        double mh = mu_hat.at(i);
        double s = round_half_away(m - mh);
        if (s < coding::kSymbolMin) {
            s = coding::kSymbolMin;
            ++r.clamped;
        } else if (s > coding::kSymbolMax) {
            s = coding::kSymbolMax;
            ++r.clamped;
        }
        r.symbols[static_cast<size_t>(i)] = static_cast<int32_t>(s);
        r.z.set(i, mh + s);
    }
    return r;
}

// --------------------------------------------------------------------------
// PMF tables

const std::array<double, coding::kSigmaGridSize>& sigma_grid() {
    static const std::array<double, coding::kSigmaGridSize> grid = [] {
        std::array<double, coding::kSigmaGridSize> g{};
        double log_ratio = dm_log(coding::kSigmaMax / coding::kSigmaMin);
        for (int i = 0; i < coding::kSigmaGridSize; ++i) {
            double t = static_cast<double>(i) / (coding::kSigmaGridSize - 1);
            g[static_cast<size_t>(i)] = coding::kSigmaMin * detmath::dm_exp(t * log_ratio);
        }
        g[0] = coding::kSigmaMin;
        g[coding::kSigmaGridSize - 1] = coding::kSigmaMax;
        return g;
    }();
    return grid;
}

int quantize_sigma_index(double sigma_hat) {
    check(std::isfinite(sigma_hat) && sigma_hat > 0.0, ErrorKind::Numeric,
          "quantize_sigma_index: bad sigma");
    double t = dm_log(sigma_hat / coding::kSigmaMin) /
               dm_log(coding::kSigmaMax / coding::kSigmaMin);
    int idx = static_cast<int>(round_half_away(t * (coding::kSigmaGridSize - 1)));
    return std::clamp(idx, 0, coding::kSigmaGridSize - 1);
}

namespace {

PmfTable build_pmf_from_grid_sigma(double sigma_q) {
    PmfTable t;
    t.freq.assign(coding::kNumSymbols, 0);
    // Raw mass per symbol; tail mass beyond the range folds into the edges.
    std::vector<double> raw(coding::kNumSymbols);
    for (int s = coding::kSymbolMin; s <= coding::kSymbolMax; ++s) {
        double hi = s == coding::kSymbolMax ? 1.0 : norm_cdf((s + 0.5) / sigma_q);
        double lo = s == coding::kSymbolMin ? 0.0 : norm_cdf((s - 0.5) / sigma_q);
        raw[static_cast<size_t>(s - coding::kSymbolMin)] = hi - lo;
    }
    uint64_t total = coding::kFreqTotal;
    uint64_t assigned = 0;
    for (int i = 0; i < coding::kNumSymbols; ++i) {
        double f = std::floor(raw[static_cast<size_t>(i)] * static_cast<double>(total));
        uint32_t fi = static_cast<uint32_t>(std::max(1.0, f));
        t.freq[static_cast<size_t>(i)] = fi;
        assigned += fi;
    }
    // Deficit or excess after flooring goes to the most probable symbol.
    size_t best = 0;
    for (size_t i = 1; i < t.freq.size(); ++i) {
        if (t.freq[i] > t.freq[best]) best = i;
    }
    int64_t delta = static_cast<int64_t>(total) - static_cast<int64_t>(assigned);
    int64_t adjusted = static_cast<int64_t>(t.freq[best]) + delta;
    check(adjusted >= 1, ErrorKind::Internal, "pmf normalization underflow");
    t.freq[best] = static_cast<uint32_t>(adjusted);
    t.cum.assign(coding::kNumSymbols + 1, 0);
    for (int i = 0; i < coding::kNumSymbols; ++i) {
        t.cum[static_cast<size_t>(i) + 1] = t.cum[static_cast<size_t>(i)] + t.freq[static_cast<size_t>(i)];
    }
    check(t.cum.back() == coding::kFreqTotal, ErrorKind::Internal, "pmf normalization failed");
    return t;
}

} // namespace

const PmfTable& pmf_for_sigma_index(int idx) {
    static const std::vector<PmfTable> tables = [] {
        std::vector<PmfTable> v;
        v.reserve(coding::kSigmaGridSize);
        for (int i = 0; i < coding::kSigmaGridSize; ++i) {
            v.push_back(build_pmf_from_grid_sigma(sigma_grid()[static_cast<size_t>(i)]));
        }
        return v;
    }();
    check(idx >= 0 && idx < coding::kSigmaGridSize, ErrorKind::Internal, "sigma index range");
    return tables[static_cast<size_t>(idx)];
}

PmfTable build_pmf(double sigma_hat) {
    return build_pmf_from_grid_sigma(sigma_grid()[static_cast<size_t>(quantize_sigma_index(sigma_hat))]);
}

std::vector<int32_t> sigma_indices(const Tensor& sigma_hat) {
    std::vector<int32_t> idx(static_cast<size_t>(sigma_hat.numel()));
    for (int64_t i = 0; i < sigma_hat.numel(); ++i) {
        idx[static_cast<size_t>(i)] = quantize_sigma_index(sigma_hat.at(i));
    }
    return idx;
}

double table_cross_entropy_bits(const std::vector<int32_t>& symbols,
                                const std::vector<int32_t>& sigma_idx) {
    check(symbols.size() == sigma_idx.size(), ErrorKind::Internal,
          "cross entropy: size mismatch");
    double bits = 0.0;
    for (size_t i = 0; i < symbols.size(); ++i) {
        const PmfTable& t = pmf_for_sigma_index(sigma_idx[i]);
        uint32_t f = t.freq[static_cast<size_t>(symbols[i] - t.symbol_min)];
        bits -= dm_log2(static_cast<double>(f) / static_cast<double>(t.total));
    }
    return bits;
}

} // namespace hvc
