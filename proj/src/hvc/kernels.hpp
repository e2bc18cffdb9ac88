#pragma once

// Raw forward/backward compute kernels. No graph logic here; the autodiff
// layer (graph.hpp) wraps these. All kernels use fixed loop orders so that
// results and gradient accumulations are reproducible bit-for-bit.

#include <cstdint>

#include "hvc/tensor.hpp"

namespace hvc {

struct ConvSpec {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    int64_t kh = 1;
    int64_t kw = 1;
    int64_t stride = 1;
    int64_t padding = 0;
    int64_t groups = 1; // 1 or in_channels (depthwise)
};

// Resolved per-call geometry.
struct ConvDims {
    int64_t n, cin, h, w;
    int64_t cout, kh, kw, stride, pad, groups;
    int64_t ho, wo;
};

// Validates x/w/b against spec and computes output dims. Throws
// ErrorKind::Config with expected-vs-actual shapes on mismatch.
ConvDims conv_check(const Shape& x, const Shape& w, const Shape& b, const ConvSpec& spec);

namespace kern {

template <class S>
void conv2d_fwd(const S* x, const S* w, const S* b, S* y, const ConvDims& d);
template <class S>
void conv2d_bwd_x(const S* w, const S* dy, S* dx_acc, const ConvDims& d);
template <class S>
void conv2d_bwd_w(const S* x, const S* dy, S* dw_acc, S* db_acc, const ConvDims& d);

// x: (N, C*r*r, H, W) -> y: (N, C, H*r, W*r); inverse=true applies the
// transposed permutation (used for the backward pass).
template <class S>
void pixel_shuffle(const S* x, S* y, int64_t n, int64_t c_out, int64_t h, int64_t w, int64_t r,
                   bool inverse);

// Normalization across the channel dim at every (n, h, w) position.
template <class S>
void layer_norm_fwd(const S* x, const S* gamma, const S* beta, S* y, double* mean, double* rstd,
                    int64_t n, int64_t c, int64_t hw, double eps);
template <class S>
void layer_norm_bwd(const S* x, const S* gamma, const S* dy, const double* mean,
                    const double* rstd, S* dx_acc, S* dgamma_acc, S* dbeta_acc, int64_t n,
                    int64_t c, int64_t hw);

template <class S> void gelu_fwd(const S* x, S* y, int64_t n);
template <class S> void gelu_bwd(const S* x, const S* dy, S* dx_acc, int64_t n);

template <class S> void softplus_fwd(const S* x, S* y, int64_t n);
template <class S> void softplus_bwd(const S* x, const S* dy, S* dx_acc, int64_t n);

// Discretized-Gaussian coding cost in bits per element:
//   bits_i = -log2(max(Phi((z-mu+1/2)/sigma) - Phi((z-mu-1/2)/sigma), p_min))
template <class S>
void rate_bits_fwd(const S* z, const S* mu, const S* sigma, S* bits, int64_t n, double p_min);
template <class S>
void rate_bits_bwd(const S* z, const S* mu, const S* sigma, const S* dbits, S* dz_acc, S* dmu_acc,
                   S* dsigma_acc, int64_t n, double p_min);

} // namespace kern

} // namespace hvc
