#include "hvc/net.hpp"

#include <cmath>

namespace hvc {

Var ConvLayer::fwd(Graph& g, Var x) const { return g.conv2d(x, g.param(w), g.param(b), spec); }

Var NormLayer::fwd(Graph& g, Var x) const {
    return g.layer_norm_channels(x, g.param(gamma), g.param(beta), 1e-6);
}

Var ConvNeXtBlock::fwd(Graph& g, Var x) const {
    Var h = dw.fwd(g, x);
    h = norm.fwd(g, h);
    h = pw1.fwd(g, h);
    h = g.gelu(h);
    h = pw2.fwd(g, h);
    return g.add(x, h);
}

Var ResStack::fwd(Graph& g, Var x) const {
    for (const ConvNeXtBlock& b : blocks) x = b.fwd(g, x);
    return x;
}

Var Upsampler::fwd(Graph& g, Var x) const {
    Var h = proj.fwd(g, x);
    return ratio > 1 ? g.pixel_shuffle_up(h, ratio) : h;
}

TemporalContext make_context(const std::vector<const FrameLatents*>& history,
                             int64_t num_scales) {
    TemporalContext ctx;
    ctx.slots.resize(static_cast<size_t>(num_scales));
    size_t n = history.size();
    for (int64_t l = 0; l < num_scales; ++l) {
        auto& s = ctx.slots[static_cast<size_t>(l)];
        if (n == 0) continue; // both slots stay undefined -> biases
        const FrameLatents& newest = *history[n - 1];
        const FrameLatents& older = n >= 2 ? *history[n - 2] : newest;
        s[0] = newest[static_cast<size_t>(l)];
        s[1] = older[static_cast<size_t>(l)];
    }
    return ctx;
}

TemporalContext make_context_tensors(Graph& g,
                                     const std::vector<const std::vector<Tensor>*>& history,
                                     int64_t num_scales) {
    TemporalContext ctx;
    ctx.slots.resize(static_cast<size_t>(num_scales));
    size_t n = history.size();
    if (n == 0) return ctx;
    for (int64_t l = 0; l < num_scales; ++l) {
        auto& s = ctx.slots[static_cast<size_t>(l)];
        const std::vector<Tensor>& newest = *history[n - 1];
        const std::vector<Tensor>& older = n >= 2 ? *history[n - 2] : newest;
        s[0] = g.leaf(newest[static_cast<size_t>(l)]);
        s[1] = g.leaf(older[static_cast<size_t>(l)]);
    }
    return ctx;
}

// --------------------------------------------------------------------------
// construction

namespace {

class Builder {
  public:
    Builder(ParamStore& store, Dtype dt, uint64_t seed) : store_(store), dt_(dt), rng_(seed) {}

    ConvLayer conv(const std::string& name, int64_t cin, int64_t cout, int64_t k, int64_t stride,
                   int64_t pad, int64_t groups = 1) {
        ConvLayer c;
        c.spec = ConvSpec{cin, cout, k, k, stride, pad, groups};
        Tensor w = Tensor::zeros({cout, cin / groups, k, k}, dt_);
        for (int64_t i = 0; i < w.numel(); ++i) w.set(i, rng_.trunc_normal(0.02));
        c.w = store_.add(name + ".w", std::move(w));
        c.b = store_.add(name + ".b", Tensor::zeros({cout}, dt_));
        return c;
    }

    NormLayer norm(const std::string& name, int64_t c) {
        NormLayer n;
        n.gamma = store_.add(name + ".g", Tensor::full({c}, 1.0, dt_));
        n.beta = store_.add(name + ".b", Tensor::zeros({c}, dt_));
        return n;
    }

    ConvNeXtBlock convnext(const std::string& name, int64_t c) {
        ConvNeXtBlock b;
        b.dw = conv(name + ".dw", c, c, 7, 1, 3, c);
        b.norm = norm(name + ".ln", c);
        b.pw1 = conv(name + ".pw1", c, 4 * c, 1, 1, 0);
        b.pw2 = conv(name + ".pw2", 4 * c, c, 1, 1, 0);
        return b;
    }

    ResStack stack(const std::string& name, int64_t c, int count) {
        ResStack s;
        for (int i = 0; i < count; ++i) {
            s.blocks.push_back(convnext(name + ".res" + std::to_string(i), c));
        }
        return s;
    }

    Upsampler upsampler(const std::string& name, int64_t cin, int64_t cout, int64_t ratio) {
        Upsampler u;
        u.ratio = ratio;
        u.proj = conv(name, cin, cout * ratio * ratio, 1, 1, 0);
        return u;
    }

    ParamId bias_vec(const std::string& name, int64_t c) {
        return store_.add(name, Tensor::zeros({c}, dt_));
    }

  private:
    ParamStore& store_;
    Dtype dt_;
    Rng rng_;
};

} // namespace

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Builder bld(store_, cfg_.precision, seed);
    const int64_t L = cfg_.num_scales();
    const int rb = cfg_.res_blocks;

    // bottom-up stages (created coarse-first for stable naming; executed
    // fine-first)
    bu_.resize(static_cast<size_t>(L));
    for (int64_t l = 0; l < L; ++l) {
        const ScaleSpec& s = cfg_.scales[static_cast<size_t>(l)];
        std::string base = "bu." + std::to_string(l);
        int64_t cin;
        int64_t ratio;
        if (l == L - 1) {
            cin = 3; // finest stage reads the input frame
            ratio = s.downsample_factor;
        } else {
            const ScaleSpec& finer = cfg_.scales[static_cast<size_t>(l) + 1];
            cin = finer.channels;
            ratio = s.downsample_factor / finer.downsample_factor;
        }
        BottomUpStage& st = bu_[static_cast<size_t>(l)];
        if (ratio > 1) {
            st.down = bld.conv(base + ".down", cin, s.channels, ratio, ratio, 0);
        } else {
            st.down = bld.conv(base + ".down", cin, s.channels, 1, 1, 0);
        }
        st.res = bld.stack(base, s.channels, rb);
    }

    f0_bias_ = bld.bias_vec("f0_bias", cfg_.scales[0].channels);
    if (cfg_.decoding_fusion) d0_bias_ = bld.bias_vec("d0_bias", cfg_.scales[0].channels);

    blocks_.resize(static_cast<size_t>(L));
    for (int64_t l = 0; l < L; ++l) {
        const ScaleSpec& s = cfg_.scales[static_cast<size_t>(l)];
        const int64_t C = s.channels;
        const int64_t zc = s.latent_channels;
        std::string base = "lb." + std::to_string(l);
        LatentBlock& b = blocks_[static_cast<size_t>(l)];
        b.tf_in = bld.conv(base + ".tf_in", 2 * zc, C, 1, 1, 0);
        b.tf_res = bld.stack(base + ".tf", C, rb);
        b.pred_in = bld.conv(base + ".pred_in", 2 * C, C, 1, 1, 0);
        b.pred_res = bld.stack(base + ".pred", C, rb);
        b.ctx_head = bld.conv(base + ".ctx_head", C, C, 3, 1, 1);
        b.prior_head = bld.conv(base + ".prior_head", C, 2 * zc, 3, 1, 1);
        b.post_in = bld.conv(base + ".post_in", 2 * C, C, 1, 1, 0);
        b.post_res = bld.stack(base + ".post", C, rb);
        b.post_head = bld.conv(base + ".post_head", C, zc, 3, 1, 1);
        b.z_embed = bld.conv(base + ".z_embed", zc, C, 3, 1, 1);
        b.f_res = bld.convnext(base + ".f_res", C);
        if (cfg_.decoding_fusion) {
            b.df_proj = bld.conv(base + ".df_proj", 3 * C, C, 1, 1, 0);
            b.df_res = bld.convnext(base + ".df_res", C);
        }
        if (l > 0) {
            const ScaleSpec& prev = cfg_.scales[static_cast<size_t>(l) - 1];
            int64_t ratio = prev.downsample_factor / s.downsample_factor;
            b.f_up = bld.upsampler(base + ".f_up", prev.channels, C, ratio);
            if (cfg_.decoding_fusion) {
                b.d_up = bld.upsampler(base + ".d_up", prev.channels, C, ratio);
            }
        }
        b.slot_bias[0] = bld.bias_vec(base + ".slot0", zc);
        b.slot_bias[1] = bld.bias_vec(base + ".slot1", zc);
    }

    const ScaleSpec& fin = cfg_.scales[static_cast<size_t>(L) - 1];
    head_res_ = bld.stack("head", fin.channels, rb);
    int64_t f = fin.downsample_factor;
    check((f & (f - 1)) == 0, ErrorKind::Config,
          "finest downsample factor must be a power of two, got " + std::to_string(f));
    int stage = 0;
    while (f > 2) {
        HeadStage hs;
        std::string base = "head.up" + std::to_string(stage);
        hs.up = bld.upsampler(base, fin.channels, fin.channels, 2);
        hs.block = bld.convnext(base + ".ref", fin.channels);
        head_stages_.push_back(std::move(hs));
        f /= 2;
        ++stage;
    }
    head_out_ = bld.upsampler("head.out", fin.channels, 3, f);

    // Residual branches accumulate along a deep path; damp each branch's
    // final projection by 1/sqrt(total blocks).
    int64_t total_blocks = 0;
    for (const Param& p : store_) {
        if (p.name.size() > 6 && p.name.rfind(".pw2.w") == p.name.size() - 6) ++total_blocks;
    }
    double damp = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(1, total_blocks)));
    for (Param& p : store_) {
        if (p.name.size() > 6 && p.name.rfind(".pw2.w") == p.name.size() - 6) {
            for (int64_t i = 0; i < p.value.numel(); ++i) p.value.set(i, p.value.at(i) * damp);
        }
    }
}

std::pair<int64_t, int64_t> Model::scale_dims(int64_t l, int64_t h, int64_t w) const {
    int64_t f = cfg_.scales[static_cast<size_t>(l)].downsample_factor;
    return {h / f, w / f};
}

std::vector<Var> Model::bottom_up(Graph& g, Var x) const {
    const Tensor& xv = g.val(x);
    check(xv.rank() == 4 && xv.dim(1) == 3, ErrorKind::Config,
          "bottom_up expects (N,3,H,W), got " + shape_str(xv.shape()));
    int64_t cf = cfg_.coarsest_factor();
    check(xv.dim(2) % cf == 0 && xv.dim(3) % cf == 0, ErrorKind::Config,
          "frame dims " + shape_str(xv.shape()) + " not divisible by coarsest factor " +
              std::to_string(cf) + " (pad the input first)");
    const int64_t L = cfg_.num_scales();
    std::vector<Var> taps(static_cast<size_t>(L));
    Var h = x;
    for (int64_t l = L - 1; l >= 0; --l) {
        const BottomUpStage& st = bu_[static_cast<size_t>(l)];
        h = st.down.fwd(g, h);
        h = st.res.fwd(g, h);
        taps[static_cast<size_t>(l)] = h;
    }
    return taps;
}

Var Model::slot_or_bias(Graph& g, const TemporalContext& ctx, int64_t l, int i, int64_t n,
                        int64_t h, int64_t w) const {
    const LatentBlock& b = blocks_[static_cast<size_t>(l)];
    bool use_bias = !cfg_.temporal_prediction;
    if (!use_bias) {
        if (static_cast<size_t>(l) >= ctx.slots.size() ||
            !ctx.slots[static_cast<size_t>(l)][static_cast<size_t>(i)].defined()) {
            use_bias = true;
        }
    }
    if (use_bias) {
        return g.broadcast_channel(g.param(b.slot_bias[i]), n, h, w);
    }
    Var v = ctx.slots[static_cast<size_t>(l)][static_cast<size_t>(i)];
    const Tensor& t = g.val(v);
    check(t.dim(0) == n && t.dim(2) == h && t.dim(3) == w, ErrorKind::Internal,
          "temporal slot shape mismatch at scale " + std::to_string(l) + ": " +
              shape_str(t.shape()));
    return v;
}

Model::Prediction Model::predict_scale(Graph& g, int64_t l, Var f_in, Var slot0,
                                       Var slot1) const {
    const LatentBlock& b = blocks_[static_cast<size_t>(l)];
    const int64_t zc = cfg_.scales[static_cast<size_t>(l)].latent_channels;
    Var tau = b.tf_res.fwd(g, b.tf_in.fwd(g, g.concat_c({slot0, slot1})));
    Var pc = b.pred_res.fwd(g, b.pred_in.fwd(g, g.concat_c({tau, f_in})));
    Prediction p;
    p.c = b.ctx_head.fwd(g, pc);
    Var prior = b.prior_head.fwd(g, pc);
    p.mu_hat = g.slice_c(prior, 0, zc);
    p.sigma_hat =
        g.clamp(g.softplus(g.slice_c(prior, zc, 2 * zc)), coding::kSigmaMin, coding::kSigmaMax);
    return p;
}

Var Model::posterior_mu(Graph& g, int64_t l, Var r_l, Var f_in) const {
    const LatentBlock& b = blocks_[static_cast<size_t>(l)];
    Var h = b.post_in.fwd(g, g.concat_c({r_l, f_in}));
    h = b.post_res.fwd(g, h);
    return b.post_head.fwd(g, h);
}

Var Model::decode_fusion(Graph& g, int64_t l, Var d_in, Var c, Var f) const {
    if (!cfg_.decoding_fusion) return f;
    const LatentBlock& b = blocks_[static_cast<size_t>(l)];
    return b.df_res.fwd(g, b.df_proj.fwd(g, g.concat_c({d_in, c, f})));
}

FrameResult Model::frame_forward(Graph& g, Mode mode, Var x, const TemporalContext& ctx,
                                 Rng* train_rng, const ScaleLatentHook& decode_hook, int64_t n,
                                 int64_t h, int64_t w) const {
    const int64_t L = cfg_.num_scales();
    FrameResult out;
    out.scales.resize(static_cast<size_t>(L));

    std::vector<Var> r;
    if (mode == Mode::Decode) {
        check(decode_hook != nullptr, ErrorKind::Usage, "decode mode needs a latent hook");
        check(h > 0 && w > 0, ErrorKind::Usage, "decode mode needs frame dims");
        check(h % cfg_.coarsest_factor() == 0 && w % cfg_.coarsest_factor() == 0,
              ErrorKind::Config, "decode dims not aligned to coarsest factor");
    } else {
        check(x.defined(), ErrorKind::Usage, "train/encode mode needs an input frame");
        check(mode == Mode::Encode || train_rng != nullptr, ErrorKind::Usage,
              "train mode needs an RNG for the rate-path noise");
        const Tensor& xv = g.val(x);
        n = xv.dim(0);
        h = xv.dim(2);
        w = xv.dim(3);
        r = bottom_up(g, x);
    }
    if (mode == Mode::Encode) {
        out.symbols.resize(static_cast<size_t>(L));
        out.sigma_idx.resize(static_cast<size_t>(L));
    }

    Var f, d;
    for (int64_t l = 0; l < L; ++l) {
        const LatentBlock& b = blocks_[static_cast<size_t>(l)];
        auto [hl, wl] = scale_dims(l, h, w);
        Var f_in, d_in;
        if (l == 0) {
            f_in = g.broadcast_channel(g.param(f0_bias_), n, hl, wl);
            if (cfg_.decoding_fusion) {
                d_in = g.broadcast_channel(g.param(d0_bias_), n, hl, wl);
            }
        } else {
            f_in = b.f_up.fwd(g, f);
            if (cfg_.decoding_fusion) d_in = b.d_up.fwd(g, d);
        }
        Var slot0 = slot_or_bias(g, ctx, l, 0, n, hl, wl);
        Var slot1 = slot_or_bias(g, ctx, l, 1, n, hl, wl);
        Prediction p = predict_scale(g, l, f_in, slot0, slot1);

        ScaleState& st = out.scales[static_cast<size_t>(l)];
        st.mu_hat = p.mu_hat;
        st.sigma_hat = p.sigma_hat;
        st.c = p.c;

        Var z;
        switch (mode) {
        case Mode::Train:
        case Mode::TrainSmooth: {
            Var mu = posterior_mu(g, l, r[static_cast<size_t>(l)], f_in);
            Var z_rate = quantize_train_rate(g, mu, *train_rng, true);
            st.rate_map = g.rate_bits(z_rate, p.mu_hat, p.sigma_hat, coding::kPMin);
            z = mode == Mode::Train ? quantize_train_recon(g, mu) : mu;
            break;
        }
        case Mode::Encode: {
            Var mu = posterior_mu(g, l, r[static_cast<size_t>(l)], f_in);
            ResidualRoundResult rr = residual_round(g.val(mu), g.val(p.mu_hat));
            out.symbols[static_cast<size_t>(l)] = std::move(rr.symbols);
            out.sigma_idx[static_cast<size_t>(l)] = sigma_indices(g.val(p.sigma_hat));
            out.clamped += rr.clamped;
            z = g.leaf(std::move(rr.z));
            break;
        }
        case Mode::Decode:
            z = decode_hook(g, l, p.mu_hat, p.sigma_hat);
            break;
        }
        st.z = z;

        Var f_new = b.f_res.fwd(g, g.add(f_in, b.z_embed.fwd(g, z)));
        Var d_new = cfg_.decoding_fusion ? decode_fusion(g, l, d_in, p.c, f_new) : f_new;
        st.f = f_new;
        st.d = d_new;
        f = f_new;
        d = d_new;
    }

    Var u = head_res_.fwd(g, d);
    for (const HeadStage& hs : head_stages_) {
        u = hs.block.fwd(g, hs.up.fwd(g, u));
    }
    out.xhat = head_out_.fwd(g, u);
    return out;
}

Tensor reflect_pad_to_multiple(const Tensor& x, int64_t factor) {
    check(x.rank() == 4, ErrorKind::Usage, "reflect_pad expects NCHW");
    int64_t h = x.dim(2), w = x.dim(3);
    int64_t ph = (factor - h % factor) % factor;
    int64_t pw = (factor - w % factor) % factor;
    if (ph == 0 && pw == 0) return x;
    int64_t nh = h + ph, nw = w + pw;
    check(h >= 2 || ph == 0, ErrorKind::Config, "frame too small to reflect-pad");
    check(w >= 2 || pw == 0, ErrorKind::Config, "frame too small to reflect-pad");
    Tensor y = Tensor::zeros({x.dim(0), x.dim(1), nh, nw}, x.dtype());
    for (int64_t nn = 0; nn < x.dim(0); ++nn) {
        for (int64_t c = 0; c < x.dim(1); ++c) {
            for (int64_t i = 0; i < nh; ++i) {
                int64_t si = i < h ? i : 2 * h - 2 - i;
                check(si >= 0, ErrorKind::Config, "padding exceeds reflectable size");
                for (int64_t j = 0; j < nw; ++j) {
                    int64_t sj = j < w ? j : 2 * w - 2 - j;
                    check(sj >= 0, ErrorKind::Config, "padding exceeds reflectable size");
                    y.set(((nn * x.dim(1) + c) * nh + i) * nw + j,
                          x.at(((nn * x.dim(1) + c) * h + si) * w + sj));
                }
            }
        }
    }
    return y;
}

Tensor crop_frame(const Tensor& x, int64_t h, int64_t w) {
    if (x.dim(2) == h && x.dim(3) == w) return x;
    check(x.dim(2) >= h && x.dim(3) >= w, ErrorKind::Usage, "crop larger than frame");
    Tensor y = Tensor::zeros({x.dim(0), x.dim(1), h, w}, x.dtype());
    for (int64_t nn = 0; nn < x.dim(0); ++nn) {
        for (int64_t c = 0; c < x.dim(1); ++c) {
            for (int64_t i = 0; i < h; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    y.set(((nn * x.dim(1) + c) * h + i) * w + j,
                          x.at(((nn * x.dim(1) + c) * x.dim(2) + i) * x.dim(3) + j));
                }
            }
        }
    }
    return y;
}

} // namespace hvc
