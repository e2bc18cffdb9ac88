#pragma once

// Training: the rate-distortion objective (bits-per-pixel plus
// lambda-weighted MSE), Adam with global-norm gradient clipping, and the
// staged schedule (single frames, then 3-frame, then 5-frame clips with
// gradients flowing through the temporal context).

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hvc/codec.hpp"
#include "hvc/net.hpp"
#include "hvc/synth.hpp"

namespace hvc {

struct TrainStage {
    int num_frames = 1; // 1, 3 or 5
    int steps = 0;
};

struct TrainConfig {
    double lambda = 1024.0;
    std::vector<TrainStage> stages = {{1, 20000}, {3, 5000}, {5, 1000}};
    int batch_size = 4;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 1.0;
    uint64_t seed = 1;
    int threads = 0; // 0 = one per batch item, capped by hardware
    int eval_every = 200;
    double divergence_factor = 10.0;
    int divergence_patience = 1000;

    void validate() const;
};

// Training data: deterministic clips per (step, item).
class ClipSource {
  public:
    virtual ~ClipSource() = default;
    virtual std::vector<Tensor> clip(uint64_t step, uint64_t item, int num_frames) = 0;
};

// Procedural textures animated by a seeded mix of the synthetic patterns.
struct SynthMix {
    double still_w = 1.0;
    double shift_w = 0.0;
    double blur_w = 0.0;
    double fade_w = 0.0;
    double max_shift = 2.0; // pixels/frame upper bound for shift clips
    double max_blur = 0.5;  // sigma slope upper bound for blur clips
};

class SyntheticClipSource : public ClipSource {
  public:
    SyntheticClipSource(int64_t width, int64_t height, SynthMix mix, uint64_t seed)
        : width_(width), height_(height), mix_(mix), seed_(seed) {}
    std::vector<Tensor> clip(uint64_t step, uint64_t item, int num_frames) override;

  private:
    int64_t width_, height_;
    SynthMix mix_;
    uint64_t seed_;
};

// Random windows from a loaded frame sequence.
class VideoClipSource : public ClipSource {
  public:
    VideoClipSource(std::vector<Tensor> frames, uint64_t seed)
        : frames_(std::move(frames)), seed_(seed) {}
    std::vector<Tensor> clip(uint64_t step, uint64_t item, int num_frames) override;

  private:
    std::vector<Tensor> frames_;
    uint64_t seed_;
};

// Per-frame training objective: bits-per-pixel estimate plus lambda * MSE.
// Throws ErrorKind::Numeric (with per-term diagnostics) on non-finite loss.
Var frame_loss(Graph& g, const FrameResult& fr, Var x, double lambda);

struct EvalPoint {
    uint64_t step = 0;
    double lambda = 0.0;
    double train_loss = 0.0;
    double eval_bpp = 0.0;
    double eval_psnr = 0.0;
    double eval_loss = 0.0; // eval_bpp + lambda * eval MSE
    int stage = 0;
};

struct TrainResult {
    std::vector<EvalPoint> log;
    uint64_t steps_done = 0;
    bool aborted = false;
    std::string abort_reason;
    double final_eval_bpp = 0.0;
    double final_eval_psnr = 0.0;
};

class Adam {
  public:
    Adam(ParamStore& store, const TrainConfig& cfg);
    // Applies one update from the accumulated gradients (after optional
    // global-norm clipping) and zeroes them.
    void step();

  private:
    ParamStore& store_;
    double lr_, b1_, b2_, eps_, clip_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Runs the staged schedule. The eval clip is encoded with the real coder at
// every eval point; rows are appended to log_path as CSV when non-empty.
TrainResult train(Model& model, const TrainConfig& cfg, ClipSource& source,
                  const std::vector<Tensor>& eval_clip, const std::string& log_path = "");

struct GradCheckResult {
    int samples = 0;
    int failures = 0;
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
};

// Central-difference verification of the analytic gradients of the clip
// loss (TrainSmooth mode, 64-bit model required). rel_err uses a 1e-3
// denominator floor so near-zero gradients are compared absolutely.
GradCheckResult gradient_check(Model& model, const std::vector<Tensor>& clip, double lambda,
                               int samples, double eps, double tol, uint64_t seed);

} // namespace hvc
