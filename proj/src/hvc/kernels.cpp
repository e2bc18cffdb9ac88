#include "hvc/kernels.hpp"

#include <cmath>
#include <vector>

#include "hvc/detmath.hpp"

namespace hvc {

ConvDims conv_check(const Shape& x, const Shape& w, const Shape& b, const ConvSpec& spec) {
    check(x.size() == 4, ErrorKind::Config, "conv2d input must be NCHW, got " + shape_str(x));
    check(spec.stride >= 1 && spec.kh >= 1 && spec.kw >= 1, ErrorKind::Config,
          "conv2d: stride and kernel dims must be >= 1");
    check(spec.groups == 1 || spec.groups == spec.in_channels, ErrorKind::Config,
          "conv2d: groups must be 1 or in_channels");
    check(spec.out_channels % spec.groups == 0, ErrorKind::Config,
          "conv2d: out_channels not divisible by groups");
    ConvDims d;
    d.n = x[0];
    d.cin = x[1];
    d.h = x[2];
    d.w = x[3];
    d.cout = spec.out_channels;
    d.kh = spec.kh;
    d.kw = spec.kw;
    d.stride = spec.stride;
    d.pad = spec.padding;
    d.groups = spec.groups;
    check(d.cin == spec.in_channels, ErrorKind::Config,
          "conv2d: expected " + std::to_string(spec.in_channels) + " input channels, got " +
              shape_str(x));
    Shape wexp{spec.out_channels, spec.in_channels / spec.groups, spec.kh, spec.kw};
    check(w == wexp, ErrorKind::Config,
          "conv2d: expected weight " + shape_str(wexp) + ", got " + shape_str(w));
    Shape bexp{spec.out_channels};
    check(b == bexp, ErrorKind::Config,
          "conv2d: expected bias " + shape_str(bexp) + ", got " + shape_str(b));
    int64_t eh = d.h + 2 * d.pad - d.kh;
    int64_t ew = d.w + 2 * d.pad - d.kw;
    check(eh >= 0 && ew >= 0 && eh % d.stride == 0 && ew % d.stride == 0, ErrorKind::Config,
          "conv2d: input " + shape_str(x) + " incompatible with kernel " +
              std::to_string(d.kh) + "x" + std::to_string(d.kw) + " stride " +
              std::to_string(d.stride) + " pad " + std::to_string(d.pad));
    d.ho = eh / d.stride + 1;
    d.wo = ew / d.stride + 1;
    return d;
}

namespace kern {

namespace {

// cols is (cin*kh*kw) x (ho*wo), row-major.
template <class S>
void im2col(const S* x, S* cols, const ConvDims& d) {
    const int64_t P = d.ho * d.wo;
    for (int64_t c = 0; c < d.cin; ++c) {
        const S* xc = x + c * d.h * d.w;
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                S* row = cols + ((c * d.kh + u) * d.kw + v) * P;
                for (int64_t oi = 0; oi < d.ho; ++oi) {
                    int64_t ii = oi * d.stride - d.pad + u;
                    S* out = row + oi * d.wo;
                    if (ii < 0 || ii >= d.h) {
                        for (int64_t oj = 0; oj < d.wo; ++oj) out[oj] = S(0);
                        continue;
                    }
                    const S* xr = xc + ii * d.w;
                    for (int64_t oj = 0; oj < d.wo; ++oj) {
                        int64_t jj = oj * d.stride - d.pad + v;
                        out[oj] = (jj >= 0 && jj < d.w) ? xr[jj] : S(0);
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_acc(const S* cols, S* x_acc, const ConvDims& d) {
    const int64_t P = d.ho * d.wo;
    for (int64_t c = 0; c < d.cin; ++c) {
        S* xc = x_acc + c * d.h * d.w;
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                const S* row = cols + ((c * d.kh + u) * d.kw + v) * P;
                for (int64_t oi = 0; oi < d.ho; ++oi) {
                    int64_t ii = oi * d.stride - d.pad + u;
                    if (ii < 0 || ii >= d.h) continue;
                    S* xr = xc + ii * d.w;
                    const S* in = row + oi * d.wo;
                    for (int64_t oj = 0; oj < d.wo; ++oj) {
                        int64_t jj = oj * d.stride - d.pad + v;
                        if (jj >= 0 && jj < d.w) xr[jj] += in[oj];
                    }
                }
            }
        }
    }
}

template <class S>
void dw_fwd_sample(const S* x, const S* w, const S* b, S* y, const ConvDims& d) {
    // depthwise, any stride; inner loops kept contiguous over output columns
    for (int64_t c = 0; c < d.cin; ++c) {
        const S* xc = x + c * d.h * d.w;
        const S* wc = w + c * d.kh * d.kw;
        S* yc = y + c * d.ho * d.wo;
        for (int64_t i = 0; i < d.ho * d.wo; ++i) yc[i] = b[c];
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                S wv = wc[u * d.kw + v];
                for (int64_t oi = 0; oi < d.ho; ++oi) {
                    int64_t ii = oi * d.stride - d.pad + u;
                    if (ii < 0 || ii >= d.h) continue;
                    const S* xr = xc + ii * d.w;
                    S* yr = yc + oi * d.wo;
                    int64_t oj0 = 0, oj1 = d.wo;
                    if (d.stride == 1) {
                        // valid output column range for this tap
                        oj0 = std::max<int64_t>(0, d.pad - v);
                        oj1 = std::min<int64_t>(d.wo, d.w + d.pad - v);
                        const S* xs = xr - d.pad + v;
                        for (int64_t oj = oj0; oj < oj1; ++oj) yr[oj] += wv * xs[oj];
                    } else {
                        for (int64_t oj = oj0; oj < oj1; ++oj) {
                            int64_t jj = oj * d.stride - d.pad + v;
                            if (jj >= 0 && jj < d.w) yr[oj] += wv * xr[jj];
                        }
                    }
                }
            }
        }
    }
}

template <class S>
void dw_bwd_sample(const S* x, const S* w, const S* dy, S* dx_acc, S* dw_acc, S* db_acc,
                   const ConvDims& d) {
    for (int64_t c = 0; c < d.cin; ++c) {
        const S* xc = x ? x + c * d.h * d.w : nullptr;
        const S* wc = w ? w + c * d.kh * d.kw : nullptr;
        const S* dyc = dy + c * d.ho * d.wo;
        S* dxc = dx_acc ? dx_acc + c * d.h * d.w : nullptr;
        S* dwc = dw_acc ? dw_acc + c * d.kh * d.kw : nullptr;
        if (db_acc) {
            S s = S(0);
            for (int64_t i = 0; i < d.ho * d.wo; ++i) s += dyc[i];
            db_acc[c] += s;
        }
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                S wv = wc ? wc[u * d.kw + v] : S(0);
                S dwv = S(0);
                for (int64_t oi = 0; oi < d.ho; ++oi) {
                    int64_t ii = oi * d.stride - d.pad + u;
                    if (ii < 0 || ii >= d.h) continue;
                    const S* dyr = dyc + oi * d.wo;
                    for (int64_t oj = 0; oj < d.wo; ++oj) {
                        int64_t jj = oj * d.stride - d.pad + v;
                        if (jj < 0 || jj >= d.w) continue;
                        if (dxc) dxc[ii * d.w + jj] += wv * dyr[oj];
                        if (dwc) dwv += dyr[oj] * xc[ii * d.w + jj];
                    }
                }
                if (dwc) dwc[u * d.kw + v] += dwv;
            }
        }
    }
}

} // namespace

template <class S>
void conv2d_fwd(const S* x, const S* w, const S* b, S* y, const ConvDims& d) {
    if (d.groups == d.cin && d.cin == d.cout) {
        for (int64_t n = 0; n < d.n; ++n) {
            dw_fwd_sample(x + n * d.cin * d.h * d.w, w, b, y + n * d.cout * d.ho * d.wo, d);
        }
        return;
    }
    const int64_t K = d.cin * d.kh * d.kw;
    const int64_t P = d.ho * d.wo;
    std::vector<S> cols(static_cast<size_t>(K * P));
    for (int64_t n = 0; n < d.n; ++n) {
        im2col(x + n * d.cin * d.h * d.w, cols.data(), d);
        S* yn = y + n * d.cout * P;
        for (int64_t co = 0; co < d.cout; ++co) {
            S* yr = yn + co * P;
            for (int64_t p = 0; p < P; ++p) yr[p] = b[co];
            const S* wr = w + co * K;
            for (int64_t k = 0; k < K; ++k) {
                S wv = wr[k];
                if (wv == S(0)) continue;
                const S* cr = cols.data() + k * P;
                for (int64_t p = 0; p < P; ++p) yr[p] += wv * cr[p];
            }
        }
    }
}

template <class S>
void conv2d_bwd_x(const S* w, const S* dy, S* dx_acc, const ConvDims& d) {
    if (d.groups == d.cin && d.cin == d.cout) {
        for (int64_t n = 0; n < d.n; ++n) {
            dw_bwd_sample<S>(nullptr, w, dy + n * d.cout * d.ho * d.wo,
                             dx_acc + n * d.cin * d.h * d.w, nullptr, nullptr, d);
        }
        return;
    }
    const int64_t K = d.cin * d.kh * d.kw;
    const int64_t P = d.ho * d.wo;
    std::vector<S> dcols(static_cast<size_t>(K * P));
    for (int64_t n = 0; n < d.n; ++n) {
        for (auto& v : dcols) v = S(0);
        const S* dyn = dy + n * d.cout * P;
        for (int64_t co = 0; co < d.cout; ++co) {
            const S* dyr = dyn + co * P;
            const S* wr = w + co * K;
            for (int64_t k = 0; k < K; ++k) {
                S wv = wr[k];
                if (wv == S(0)) continue;
                S* cr = dcols.data() + k * P;
                for (int64_t p = 0; p < P; ++p) cr[p] += wv * dyr[p];
            }
        }
        col2im_acc(dcols.data(), dx_acc + n * d.cin * d.h * d.w, d);
    }
}

template <class S>
void conv2d_bwd_w(const S* x, const S* dy, S* dw_acc, S* db_acc, const ConvDims& d) {
    if (d.groups == d.cin && d.cin == d.cout) {
        for (int64_t n = 0; n < d.n; ++n) {
            dw_bwd_sample(x + n * d.cin * d.h * d.w, static_cast<const S*>(nullptr),
                          dy + n * d.cout * d.ho * d.wo, static_cast<S*>(nullptr), dw_acc, db_acc,
                          d);
        }
        return;
    }
    const int64_t K = d.cin * d.kh * d.kw;
    const int64_t P = d.ho * d.wo;
    std::vector<S> cols(static_cast<size_t>(K * P));
    for (int64_t n = 0; n < d.n; ++n) {
        im2col(x + n * d.cin * d.h * d.w, cols.data(), d);
        const S* dyn = dy + n * d.cout * P;
        for (int64_t co = 0; co < d.cout; ++co) {
            const S* dyr = dyn + co * P;
            S* dwr = dw_acc + co * K;
            for (int64_t k = 0; k < K; ++k) {
                const S* cr = cols.data() + k * P;
                S s = S(0);
                for (int64_t p = 0; p < P; ++p) s += dyr[p] * cr[p];
                dwr[k] += s;
            }
            S s = S(0);
            for (int64_t p = 0; p < P; ++p) s += dyr[p];
            db_acc[co] += s;
        }
    }
}

template <class S>
void pixel_shuffle(const S* x, S* y, int64_t n, int64_t c_out, int64_t h, int64_t w, int64_t r,
                   bool inverse) {
    // forward: x (N, c_out*r*r, h, w) -> y (N, c_out, h*r, w*r)
    const int64_t cin = c_out * r * r;
    for (int64_t nn = 0; nn < n; ++nn) {
        const S* xn = x + nn * cin * h * w;
        S* yn = y + nn * cin * h * w; // same element count
        for (int64_t c = 0; c < c_out; ++c) {
            for (int64_t di = 0; di < r; ++di) {
                for (int64_t dj = 0; dj < r; ++dj) {
                    const int64_t ci = (c * r + di) * r + dj;
                    for (int64_t i = 0; i < h; ++i) {
                        for (int64_t j = 0; j < w; ++j) {
                            int64_t src = (ci * h + i) * w + j;
                            int64_t dst = (c * (h * r) + (i * r + di)) * (w * r) + (j * r + dj);
                            if (!inverse) {
                                yn[dst] = xn[src];
                            } else {
                                yn[src] = xn[dst];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class S>
void layer_norm_fwd(const S* x, const S* gamma, const S* beta, S* y, double* mean, double* rstd,
                    int64_t n, int64_t c, int64_t hw, double eps) {
    for (int64_t nn = 0; nn < n; ++nn) {
        const S* xn = x + nn * c * hw;
        S* yn = y + nn * c * hw;
        for (int64_t p = 0; p < hw; ++p) {
            double m = 0.0;
            for (int64_t cc = 0; cc < c; ++cc) m += static_cast<double>(xn[cc * hw + p]);
            m /= static_cast<double>(c);
            double v = 0.0;
            for (int64_t cc = 0; cc < c; ++cc) {
                double t = static_cast<double>(xn[cc * hw + p]) - m;
                v += t * t;
            }
            v /= static_cast<double>(c);
            double rs = 1.0 / std::sqrt(v + eps);
            mean[nn * hw + p] = m;
            rstd[nn * hw + p] = rs;
            for (int64_t cc = 0; cc < c; ++cc) {
                double xh = (static_cast<double>(xn[cc * hw + p]) - m) * rs;
                yn[cc * hw + p] =
                    static_cast<S>(xh * static_cast<double>(gamma[cc]) + static_cast<double>(beta[cc]));
            }
        }
    }
}

template <class S>
void layer_norm_bwd(const S* x, const S* gamma, const S* dy, const double* mean,
                    const double* rstd, S* dx_acc, S* dgamma_acc, S* dbeta_acc, int64_t n,
                    int64_t c, int64_t hw) {
    for (int64_t nn = 0; nn < n; ++nn) {
        const S* xn = x + nn * c * hw;
        const S* dyn = dy + nn * c * hw;
        S* dxn = dx_acc + nn * c * hw;
        for (int64_t p = 0; p < hw; ++p) {
            const double m = mean[nn * hw + p];
            const double rs = rstd[nn * hw + p];
            double sum_g = 0.0, sum_gx = 0.0;
            for (int64_t cc = 0; cc < c; ++cc) {
                double xh = (static_cast<double>(xn[cc * hw + p]) - m) * rs;
                double g = static_cast<double>(dyn[cc * hw + p]) * static_cast<double>(gamma[cc]);
                sum_g += g;
                sum_gx += g * xh;
                dgamma_acc[cc] += static_cast<S>(static_cast<double>(dyn[cc * hw + p]) * xh);
                dbeta_acc[cc] += dyn[cc * hw + p];
            }
            const double inv_c = 1.0 / static_cast<double>(c);
            for (int64_t cc = 0; cc < c; ++cc) {
                double xh = (static_cast<double>(xn[cc * hw + p]) - m) * rs;
                double g = static_cast<double>(dyn[cc * hw + p]) * static_cast<double>(gamma[cc]);
                double dx = rs * (g - inv_c * sum_g - xh * inv_c * sum_gx);
                dxn[cc * hw + p] += static_cast<S>(dx);
            }
        }
    }
}

namespace {
constexpr double kGeluC0 = 0.7978845608028653559; // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;
} // namespace

template <class S> void gelu_fwd(const S* x, S* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        double xv = static_cast<double>(x[i]);
        double t = detmath::dm_tanh(kGeluC0 * (xv + kGeluC1 * xv * xv * xv));
        y[i] = static_cast<S>(0.5 * xv * (1.0 + t));
    }
}

template <class S> void gelu_bwd(const S* x, const S* dy, S* dx_acc, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        double xv = static_cast<double>(x[i]);
        double u = kGeluC0 * (xv + kGeluC1 * xv * xv * xv);
        double t = detmath::dm_tanh(u);
        double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * xv * xv);
        double g = 0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t * t) * du;
        dx_acc[i] += static_cast<S>(static_cast<double>(dy[i]) * g);
    }
}

template <class S> void softplus_fwd(const S* x, S* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        double xv = static_cast<double>(x[i]);
        double r = xv >= 0.0 ? xv + detmath::dm_log1p(detmath::dm_exp(-xv))
                             : detmath::dm_log1p(detmath::dm_exp(xv));
        y[i] = static_cast<S>(r);
    }
}

template <class S> void softplus_bwd(const S* x, const S* dy, S* dx_acc, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        double xv = static_cast<double>(x[i]);
        double sg = xv >= 0.0 ? 1.0 / (1.0 + detmath::dm_exp(-xv))
                              : [&] {
                                    double e = detmath::dm_exp(xv);
                                    return e / (1.0 + e);
                                }();
        dx_acc[i] += static_cast<S>(static_cast<double>(dy[i]) * sg);
    }
}

namespace {

// P(z | mu, sigma) under N(mu, sigma^2) convolved with U(-1/2, 1/2),
// evaluated through |z - mu| so the result is symmetric by construction.
inline double gc_prob_raw(double z, double mu, double sigma) {
    double b = std::fabs(z - mu);
    double hi = (-b + 0.5) / sigma;
    double lo = (-b - 0.5) / sigma;
    return detmath::norm_cdf(hi) - detmath::norm_cdf(lo);
}

constexpr double kInvLn2d = 1.44269504088896338700e+00;

} // namespace

template <class S>
void rate_bits_fwd(const S* z, const S* mu, const S* sigma, S* bits, int64_t n, double p_min) {
    for (int64_t i = 0; i < n; ++i) {
        double p = gc_prob_raw(static_cast<double>(z[i]), static_cast<double>(mu[i]),
                               static_cast<double>(sigma[i]));
        if (p < p_min) p = p_min;
        bits[i] = static_cast<S>(-detmath::dm_log2(p));
    }
}

template <class S>
void rate_bits_bwd(const S* z, const S* mu, const S* sigma, const S* dbits, S* dz_acc, S* dmu_acc,
                   S* dsigma_acc, int64_t n, double p_min) {
    for (int64_t i = 0; i < n; ++i) {
        double zv = static_cast<double>(z[i]);
        double mv = static_cast<double>(mu[i]);
        double sv = static_cast<double>(sigma[i]);
        double a = zv - mv;
        double b = std::fabs(a);
        double hi = (-b + 0.5) / sv;
        double lo = (-b - 0.5) / sv;
        double p_raw = detmath::norm_cdf(hi) - detmath::norm_cdf(lo);
        double p = p_raw < p_min ? p_min : p_raw;
        double g = static_cast<double>(dbits[i]);
        double dldp = -g * kInvLn2d / p;
        // When the floor is active, pass gradient only if it pushes p upward
        // (otherwise the floor would move and nothing would change).
        if (p_raw < p_min && dldp >= 0.0) continue;
        double phi_hi = detmath::norm_pdf(hi);
        double phi_lo = detmath::norm_pdf(lo);
        double sgn = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
        double dpda = sgn * (phi_lo - phi_hi) / sv;
        double dpds = -(phi_hi * hi - phi_lo * lo) / sv;
        if (dz_acc) dz_acc[i] += static_cast<S>(dldp * dpda);
        if (dmu_acc) dmu_acc[i] += static_cast<S>(-dldp * dpda);
        if (dsigma_acc) dsigma_acc[i] += static_cast<S>(dldp * dpds);
    }
}

#define HVC_INSTANTIATE(S)                                                                        \
    template void conv2d_fwd<S>(const S*, const S*, const S*, S*, const ConvDims&);               \
    template void conv2d_bwd_x<S>(const S*, const S*, S*, const ConvDims&);                       \
    template void conv2d_bwd_w<S>(const S*, const S*, S*, S*, const ConvDims&);                   \
    template void pixel_shuffle<S>(const S*, S*, int64_t, int64_t, int64_t, int64_t, int64_t,    \
                                   bool);                                                         \
    template void layer_norm_fwd<S>(const S*, const S*, const S*, S*, double*, double*, int64_t, \
                                    int64_t, int64_t, double);                                    \
    template void layer_norm_bwd<S>(const S*, const S*, const S*, const double*, const double*,   \
                                    S*, S*, S*, int64_t, int64_t, int64_t);                       \
    template void gelu_fwd<S>(const S*, S*, int64_t);                                             \
    template void gelu_bwd<S>(const S*, const S*, S*, int64_t);                                   \
    template void softplus_fwd<S>(const S*, S*, int64_t);                                         \
    template void softplus_bwd<S>(const S*, const S*, S*, int64_t);                               \
    template void rate_bits_fwd<S>(const S*, const S*, const S*, S*, int64_t, double);            \
    template void rate_bits_bwd<S>(const S*, const S*, const S*, const S*, S*, S*, S*, int64_t,   \
                                   double);

HVC_INSTANTIATE(float)
HVC_INSTANTIATE(double)
#undef HVC_INSTANTIATE

} // namespace kern

} // namespace hvc
