#pragma once

// The hierarchical predictive codec network: a bottom-up feature path and a
// top-down path of latent blocks. Each block predicts its latent's prior
// (mu_hat, sigma_hat) from the coarser-scale prior feature plus same-scale
// latents of previous frames, then folds the coded latent back into the
// prior feature f and (when decoding fusion is enabled) a separate
// reconstructive feature d. Train, encode and decode run the same kernels,
// so the encoder-side reconstruction is bit-identical to the decoder's when
// all scales are present.

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "hvc/config.hpp"
#include "hvc/graph.hpp"
#include "hvc/prob.hpp"
#include "hvc/rng.hpp"

namespace hvc {

// TrainSmooth replaces the straight-through rounding on the reconstruction
// path with identity; the finite-difference gradient checks run against it
// (a straight-through estimator's backward is by definition not the local
// derivative of its forward).
enum class Mode { Train, TrainSmooth, Encode, Decode };

struct TemporalContext {
    // slots[l] = {z_{t-1}^l, z_{t-2}^l}; an undefined Var means "use the
    // learned bias" (intra frames, or TP disabled).
    std::vector<std::array<Var, 2>> slots;
};

// Latents of one already-processed frame, per scale, used as temporal
// context for the following frames.
using FrameLatents = std::vector<Var>;

// history is oldest-first. Empty -> biases in both slots; one entry -> the
// newest latent duplicated; otherwise the two most recent latents.
TemporalContext make_context(const std::vector<const FrameLatents*>& history, int64_t num_scales);
// Tensor-based variant for encode/decode loops (frames use fresh graphs).
TemporalContext make_context_tensors(Graph& g,
                                     const std::vector<const std::vector<Tensor>*>& history,
                                     int64_t num_scales);

struct ScaleState {
    Var z;         // latent on the reconstruction path
    Var mu_hat;    // prior mean
    Var sigma_hat; // prior scale, clamped
    Var c;         // contextual feature
    Var f;         // prior feature (feeds next scale)
    Var d;         // reconstructive feature
    Var rate_map;  // train mode only: per-element bits under the noisy latent
};

struct FrameResult {
    Var xhat;
    std::vector<ScaleState> scales;
    std::vector<std::vector<int32_t>> symbols;   // encode mode, per scale
    std::vector<std::vector<int32_t>> sigma_idx; // encode mode, per scale
    int64_t clamped = 0;                         // residual-round range clamps
};

// Decode-time latent source, owned by the codec: given the predicted prior
// of scale l it returns the reconstructed latent (entropy-decoded symbols
// added to mu_hat, or a prior-mean fill for missing data).
using ScaleLatentHook = std::function<Var(Graph&, int64_t l, Var mu_hat, Var sigma_hat)>;

// --- layers -----------------------------------------------------------------

struct ConvLayer {
    ConvSpec spec;
    ParamId w = -1, b = -1;
    Var fwd(Graph& g, Var x) const;
};

struct NormLayer {
    ParamId gamma = -1, beta = -1;
    Var fwd(Graph& g, Var x) const;
};

// depthwise 7x7 -> channel norm -> 1x1 expand (4x) -> GELU -> 1x1 project,
// with an additive skip.
struct ConvNeXtBlock {
    ConvLayer dw, pw1, pw2;
    NormLayer norm;
    Var fwd(Graph& g, Var x) const;
};

struct ResStack {
    std::vector<ConvNeXtBlock> blocks;
    Var fwd(Graph& g, Var x) const;
};

// 1x1 conv, plus pixel shuffle when the scale ratio is > 1.
struct Upsampler {
    ConvLayer proj;
    int64_t ratio = 1;
    Var fwd(Graph& g, Var x) const;
};

struct LatentBlock {
    // temporal fusion
    ConvLayer tf_in;
    ResStack tf_res;
    // conditional generation
    ConvLayer pred_in;
    ResStack pred_res;
    ConvLayer ctx_head;
    ConvLayer prior_head;
    // posterior branch
    ConvLayer post_in;
    ResStack post_res;
    ConvLayer post_head;
    // state update
    ConvLayer z_embed;
    ConvNeXtBlock f_res;
    // decoding fusion (only when DF enabled)
    ConvLayer df_proj;
    ConvNeXtBlock df_res;
    // inter-scale upsamplers (unused at scale 0)
    Upsampler f_up, d_up;
    ParamId slot_bias[2] = {-1, -1};
};

struct BottomUpStage {
    ConvLayer down; // strided patch conv (ratio>1) or 1x1 (ratio==1)
    ResStack res;
};

class Model {
  public:
    Model(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    uint64_t config_hash() const { return cfg_.canonical_hash(); }
    int64_t num_scales() const { return cfg_.num_scales(); }

    // Residual features r^1..r^L, coarse-first, from an aligned input frame.
    std::vector<Var> bottom_up(Graph& g, Var x) const;

    // Spatial-temporal prediction at scale l: fuses the temporal slots,
    // concatenates the spatial prior, and emits (c, mu_hat, sigma_hat).
    struct Prediction {
        Var c, mu_hat, sigma_hat;
    };
    Prediction predict_scale(Graph& g, int64_t l, Var f_in, Var slot0, Var slot1) const;

    // Posterior center mu from the embedded feature and the spatial prior.
    Var posterior_mu(Graph& g, int64_t l, Var r_l, Var f_in) const;

    // d^l from (d^{l-1} upsampled, c^l, f^l); with DF disabled returns f.
    Var decode_fusion(Graph& g, int64_t l, Var d_in, Var c, Var f) const;

    // Full per-frame pass. Train/encode take x; decode takes dims plus the
    // latent hook. Missing context slots fall back to the learned biases.
    FrameResult frame_forward(Graph& g, Mode mode, Var x, const TemporalContext& ctx,
                              Rng* train_rng = nullptr,
                              const ScaleLatentHook& decode_hook = nullptr, int64_t n = 1,
                              int64_t h = 0, int64_t w = 0) const;

    // Scale spatial dims for an aligned input of (h, w).
    std::pair<int64_t, int64_t> scale_dims(int64_t l, int64_t h, int64_t w) const;

  private:
    Var slot_or_bias(Graph& g, const TemporalContext& ctx, int64_t l, int i, int64_t n,
                     int64_t h, int64_t w) const;

    ModelConfig cfg_;
    ParamStore store_;
    std::vector<BottomUpStage> bu_;     // indexed by scale, used fine->coarse
    std::vector<LatentBlock> blocks_;   // indexed by scale, coarse-first
    ParamId f0_bias_ = -1, d0_bias_ = -1;
    // output head: refinement at the finest latent scale, then x2 hops with
    // a residual block each, then a final shuffle straight to RGB
    ResStack head_res_;
    struct HeadStage {
        Upsampler up;
        ConvNeXtBlock block;
    };
    std::vector<HeadStage> head_stages_;
    Upsampler head_out_;
};

// Reflect-pads a frame so both dims are multiples of `factor`. No-op when
// already aligned.
Tensor reflect_pad_to_multiple(const Tensor& x, int64_t factor);
// Crops back to the original dims.
Tensor crop_frame(const Tensor& x, int64_t h, int64_t w);

} // namespace hvc
