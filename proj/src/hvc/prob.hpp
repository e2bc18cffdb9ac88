#pragma once

// Coding probability model: uniform posteriors, Gaussian-convolved-uniform
// priors, the train/test quantization modes, and the quantized PMF tables
// the range coder consumes. Table construction is a pure function of the
// quantized scale, so encoder and decoder always rebuild identical tables.

#include <array>
#include <cstdint>
#include <vector>

#include "hvc/graph.hpp"
#include "hvc/rng.hpp"
#include "hvc/tensor.hpp"

namespace hvc {

// Fixed coding constants. Changing any of these is a bitstream format change.
namespace coding {
constexpr double kSigmaMin = 0.11;
constexpr double kSigmaMax = 256.0;
constexpr double kPMin = 0x1p-16; // likelihood floor in the training rate
constexpr int kSymbolMin = -64;
constexpr int kSymbolMax = 63;
constexpr int kNumSymbols = kSymbolMax - kSymbolMin + 1;
constexpr int kSigmaGridSize = 64; // log-spaced over [kSigmaMin, kSigmaMax]
constexpr uint32_t kFreqTotal = 1u << 16;
} // namespace coding

struct PriorParams {
    Tensor mu_hat;
    Tensor sigma_hat; // clamped to [kSigmaMin, kSigmaMax]
};

struct PosteriorParams {
    Tensor mu;
};

// Per-symbol integer frequencies over [symbol_min, symbol_max], summing to
// total exactly, every entry >= 1.
struct PmfTable {
    int symbol_min = coding::kSymbolMin;
    int symbol_max = coding::kSymbolMax;
    std::vector<uint32_t> freq; // size kNumSymbols
    std::vector<uint32_t> cum;  // size kNumSymbols+1, cum[0]=0, cum.back()=total
    uint32_t total = coding::kFreqTotal;
};

// P(z) for z ~ N(mu,sigma^2) * U(-1/2,1/2), floored at kPMin.
// Symmetric in (z - mu) <-> (mu - z) by construction.
double gc_likelihood(double z, double mu_hat, double sigma_hat);

// Scalar convenience used by tests: -log2 gc_likelihood summed later.
double gc_rate_bits(double z, double mu_hat, double sigma_hat);

// --- training-time quantization -------------------------------------------

// mu + u, u ~ U(-1/2,1/2) elementwise; gradient passes through unchanged.
// `training` guards against calling this in inference code paths.
Var quantize_train_rate(Graph& g, Var mu, Rng& rng, bool training);

// Forward nearest-integer rounding (half away from zero), identity gradient.
Var quantize_train_recon(Graph& g, Var mu);

// --- inference-time quantization ------------------------------------------

struct ResidualRoundResult {
    Tensor z;                      // mu_hat + symbol, same dtype as inputs
    std::vector<int32_t> symbols;  // round(mu - mu_hat), clamped to symbol range
    int64_t clamped = 0;           // how many symbols hit the range clamp
};

// z = mu_hat + round(mu - mu_hat); symbols outside the coding range are
// clamped and counted.
ResidualRoundResult residual_round(const Tensor& mu, const Tensor& mu_hat);

// --- PMF tables -------------------------------------------------------------

// The 64-entry logarithmic sigma grid and its quantizer.
const std::array<double, coding::kSigmaGridSize>& sigma_grid();
int quantize_sigma_index(double sigma_hat);

// Table for one grid entry (precomputed once, deterministic).
const PmfTable& pmf_for_sigma_index(int idx);

// Per-element table indices for a whole prior tensor.
std::vector<int32_t> sigma_indices(const Tensor& sigma_hat);

// Ideal code length (bits) of `symbols` under their tables; the range coder
// must land within 1% + flush overhead of this.
double table_cross_entropy_bits(const std::vector<int32_t>& symbols,
                                const std::vector<int32_t>& sigma_idx);

// Builds a table directly from an arbitrary (already clamped) sigma value,
// including the grid quantization step. Used by tests; the codec goes
// through pmf_for_sigma_index.
PmfTable build_pmf(double sigma_hat);

} // namespace hvc
