#include "hvc/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "hvc/metrics.hpp"

namespace hvc {

void TrainConfig::validate() const {
    check(lambda >= 0.0, ErrorKind::Config, "lambda must be non-negative");
    check(!stages.empty(), ErrorKind::Config, "at least one training stage required");
    int prev = 0;
    for (const TrainStage& s : stages) {
        check(s.num_frames == 1 || s.num_frames == 3 || s.num_frames == 5, ErrorKind::Config,
              "stage clip length must be 1, 3 or 5");
        check(s.num_frames >= prev, ErrorKind::Config,
              "stage clip lengths must be non-decreasing");
        check(s.steps >= 0, ErrorKind::Config, "negative step count");
        prev = s.num_frames;
    }
    check(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
    check(learning_rate > 0.0, ErrorKind::Config, "learning rate must be positive");
}

std::vector<Tensor> SyntheticClipSource::clip(uint64_t step, uint64_t item, int num_frames) {
    uint64_t s = derive_seed(seed_, step, item);
    Rng rng(s);
    double total = mix_.still_w + mix_.shift_w + mix_.blur_w + mix_.fade_w;
    double pick = rng.uniform01() * total;
    SyntheticSpec spec;
    spec.num_frames = num_frames;
    spec.width = width_;
    spec.height = height_;
    if ((pick -= mix_.still_w) < 0.0) {
        spec.pattern = SynthPattern::Still;
    } else if ((pick -= mix_.shift_w) < 0.0) {
        spec.pattern = SynthPattern::Shift;
        spec.x = 1.0 + std::floor(rng.uniform01() * mix_.max_shift);
    } else if ((pick -= mix_.blur_w) < 0.0) {
        spec.pattern = SynthPattern::Blur;
        spec.x = rng.uniform01() * mix_.max_blur;
    } else {
        spec.pattern = SynthPattern::Fade;
    }
    return synth_generate(spec, derive_seed(s, 0xc11b));
}

std::vector<Tensor> VideoClipSource::clip(uint64_t step, uint64_t item, int num_frames) {
    check(static_cast<int>(frames_.size()) >= num_frames, ErrorKind::Usage,
          "video shorter than requested clip");
    Rng rng(derive_seed(seed_, step, item));
    uint64_t max_start = frames_.size() - static_cast<size_t>(num_frames);
    size_t start = static_cast<size_t>(rng.below(max_start + 1));
    std::vector<Tensor> clip;
    for (int i = 0; i < num_frames; ++i) clip.push_back(frames_[start + static_cast<size_t>(i)]);
    return clip;
}

Var frame_loss(Graph& g, const FrameResult& fr, Var x, double lambda) {
    const Tensor& xv = g.val(x);
    double inv_px = 1.0 / static_cast<double>(xv.dim(2) * xv.dim(3));
    Var bits;
    for (const ScaleState& st : fr.scales) {
        check(st.rate_map.defined(), ErrorKind::Usage, "frame_loss needs a train-mode result");
        Var b = g.sum_all(st.rate_map);
        bits = bits.defined() ? g.add(bits, b) : b;
    }
    Var bpp = g.scale(bits, inv_px);
    Var dist = g.mse(x, fr.xhat);
    Var loss = g.add(bpp, g.scale(dist, lambda));
    double lv = g.val(loss).at(0);
    if (!std::isfinite(lv)) {
        std::ostringstream os;
        os << "non-finite training loss: bpp=" << g.val(bpp).at(0)
           << " mse=" << g.val(dist).at(0) << " lambda=" << lambda;
        fail(ErrorKind::Numeric, os.str());
    }
    return loss;
}

Adam::Adam(ParamStore& store, const TrainConfig& cfg)
    : store_(store), lr_(cfg.learning_rate), b1_(cfg.adam_beta1), b2_(cfg.adam_beta2),
      eps_(cfg.adam_eps), clip_(cfg.grad_clip_norm) {
    for (const Param& p : store_) {
        m_.push_back(Tensor::zeros(p.value.shape(), Dtype::F64));
        v_.push_back(Tensor::zeros(p.value.shape(), Dtype::F64));
    }
}

void Adam::step() {
    ++t_;
    double norm_sq = 0.0;
    for (const Param& p : store_) {
        for (int64_t i = 0; i < p.grad.numel(); ++i) {
            double gv = p.grad.at(i);
            norm_sq += gv * gv;
        }
    }
    double scale = 1.0;
    if (clip_ > 0.0) {
        double norm = std::sqrt(norm_sq);
        if (norm > clip_) scale = clip_ / norm;
    }
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    size_t k = 0;
    for (Param& p : store_) {
        auto ms = m_[k].data<double>();
        auto vs = v_[k].data<double>();
        for (int64_t i = 0; i < p.value.numel(); ++i) {
            double gv = p.grad.at(i) * scale;
            ms[static_cast<size_t>(i)] = b1_ * ms[static_cast<size_t>(i)] + (1.0 - b1_) * gv;
            vs[static_cast<size_t>(i)] = b2_ * vs[static_cast<size_t>(i)] + (1.0 - b2_) * gv * gv;
            double mh = ms[static_cast<size_t>(i)] / bc1;
            double vh = vs[static_cast<size_t>(i)] / bc2;
            p.value.set(i, p.value.at(i) - lr_ * mh / (std::sqrt(vh) + eps_));
        }
        ++k;
    }
    store_.zero_grads();
}

namespace {

struct ItemResult {
    std::unique_ptr<Graph> graph;
    double loss = 0.0;
    std::string error; // non-empty if the item failed
};

// Forward/backward for one batch item (its own graph; params are read-only).
void run_item(Model& model, const TrainConfig& cfg, ClipSource& source, uint64_t step,
              uint64_t item, int num_frames, ItemResult* out) {
    try {
        auto g = std::make_unique<Graph>(&model.store(), true);
        std::vector<Tensor> clip = source.clip(step, item, num_frames);
        check(static_cast<int>(clip.size()) == num_frames, ErrorKind::Internal,
              "clip source returned wrong length");
        std::vector<FrameLatents> latents;
        Var total;
        for (int f = 0; f < num_frames; ++f) {
            Rng noise(derive_seed(cfg.seed, step, item, static_cast<uint64_t>(f)));
            Var x = g->leaf(clip[static_cast<size_t>(f)].to(model.config().precision));
            std::vector<const FrameLatents*> hist;
            for (const auto& fl : latents) hist.push_back(&fl);
            TemporalContext ctx = make_context(hist, model.num_scales());
            FrameResult fr = model.frame_forward(*g, Mode::Train, x, ctx, &noise);
            Var loss = frame_loss(*g, fr, x, cfg.lambda);
            total = total.defined() ? g->add(total, loss) : loss;
            FrameLatents fl;
            for (const ScaleState& st : fr.scales) fl.push_back(st.z);
            latents.push_back(std::move(fl));
        }
        Var mean_loss = g->scale(total, 1.0 / static_cast<double>(num_frames));
        g->backward(mean_loss);
        out->loss = g->val(mean_loss).at(0);
        out->graph = std::move(g);
    } catch (const std::exception& e) {
        out->error = e.what();
    }
}

struct EvalOutcome {
    double bpp = 0.0, psnr_db = 0.0, loss = 0.0;
};

EvalOutcome run_eval(Model& model, const std::vector<Tensor>& eval_clip, double lambda) {
    EvalOutcome ev;
    if (eval_clip.empty()) return ev;
    EncodeResult er = encode_sequence(model, eval_clip, static_cast<uint32_t>(eval_clip.size()),
                                      static_cast<uint32_t>(lambda));
    ev.bpp = er.stats.mean_bpp;
    ev.psnr_db = er.stats.mean_psnr;
    double mse_sum = 0.0;
    for (size_t i = 0; i < eval_clip.size(); ++i) {
        mse_sum += mse_value(eval_clip[i].to(model.config().precision), er.recon[i]);
    }
    ev.loss = ev.bpp + lambda * mse_sum / static_cast<double>(eval_clip.size());
    return ev;
}

} // namespace

namespace {

// Clip loss under TrainSmooth with a fixed noise stream; graph recording is
// optional so FD probes skip the tape.
Var smooth_clip_loss(Model& model, Graph& g, const std::vector<Tensor>& clip, double lambda,
                     uint64_t seed) {
    std::vector<FrameLatents> latents;
    Var total;
    for (size_t f = 0; f < clip.size(); ++f) {
        Rng noise(derive_seed(seed, 0x9c, f));
        Var x = g.leaf(clip[f].to(model.config().precision));
        std::vector<const FrameLatents*> hist;
        for (const auto& fl : latents) hist.push_back(&fl);
        TemporalContext ctx = make_context(hist, model.num_scales());
        FrameResult fr = model.frame_forward(g, Mode::TrainSmooth, x, ctx, &noise);
        Var loss = frame_loss(g, fr, x, lambda);
        total = total.defined() ? g.add(total, loss) : loss;
        FrameLatents fl;
        for (const ScaleState& st : fr.scales) fl.push_back(st.z);
        latents.push_back(std::move(fl));
    }
    return g.scale(total, 1.0 / static_cast<double>(clip.size()));
}

} // namespace

GradCheckResult gradient_check(Model& model, const std::vector<Tensor>& clip, double lambda,
                               int samples, double eps, double tol, uint64_t seed) {
    check(model.config().precision == Dtype::F64, ErrorKind::Usage,
          "gradient_check requires an f64 model (precision: f64 in the config)");
    check(!clip.empty() && samples >= 1, ErrorKind::Usage, "gradient_check: bad arguments");
    GradCheckResult res;

    // analytic gradients
    model.store().zero_grads();
    {
        Graph g(&model.store(), true);
        Var loss = smooth_clip_loss(model, g, clip, lambda, seed);
        g.backward(loss);
        g.accumulate_param_grads(1.0);
    }
    std::vector<Tensor> analytic;
    for (Param& p : model.store()) analytic.push_back(p.grad.clone());
    model.store().zero_grads();

    auto eval_loss = [&]() {
        Graph g(&model.store(), false);
        return g.val(smooth_clip_loss(model, g, clip, lambda, seed)).at(0);
    };

    // deterministic element sampling, uniform over all parameter elements
    int64_t total_elems = model.store().total_elements();
    Rng rng(derive_seed(seed, 0xfd));
    double err_sum = 0.0;
    for (int s = 0; s < samples; ++s) {
        int64_t flat = static_cast<int64_t>(rng.below(static_cast<uint64_t>(total_elems)));
        size_t pi = 0;
        for (const Param& p : model.store()) {
            if (flat < p.value.numel()) break;
            flat -= p.value.numel();
            ++pi;
        }
        Param& p = model.store().at(static_cast<ParamId>(pi));
        double orig = p.value.at(flat);
        p.value.set(flat, orig + eps);
        double lp = eval_loss();
        p.value.set(flat, orig - eps);
        double lm = eval_loss();
        p.value.set(flat, orig);
        double fd = (lp - lm) / (2.0 * eps);
        double an = analytic[pi].at(flat);
        double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-3});
        err_sum += rel;
        res.max_rel_err = std::max(res.max_rel_err, rel);
        if (rel >= tol) ++res.failures;
        ++res.samples;
    }
    res.mean_rel_err = err_sum / static_cast<double>(res.samples);
    return res;
}

TrainResult train(Model& model, const TrainConfig& cfg, ClipSource& source,
                  const std::vector<Tensor>& eval_clip, const std::string& log_path) {
    cfg.validate();
    TrainResult res;
    Adam opt(model.store(), cfg);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::trunc);
        check(log.good(), ErrorKind::Io, "cannot open training log " + log_path);
        log << "step,stage,lambda,train_loss,eval_bpp,eval_psnr,eval_loss\n";
    }

    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int threads = cfg.threads > 0 ? cfg.threads : std::min(cfg.batch_size, hw);

    uint64_t step = 0;
    double initial_loss = 0.0;
    int divergent_run = 0;
    auto log_point = [&](int stage_idx, double train_loss) {
        EvalOutcome ev = run_eval(model, eval_clip, cfg.lambda);
        EvalPoint pt{step, cfg.lambda, train_loss, ev.bpp, ev.psnr_db, ev.loss, stage_idx};
        res.log.push_back(pt);
        if (log.is_open()) {
            log << step << "," << stage_idx << "," << cfg.lambda << "," << train_loss << ","
                << ev.bpp << "," << ev.psnr_db << "," << ev.loss << "\n";
            log.flush();
        }
        res.final_eval_bpp = ev.bpp;
        res.final_eval_psnr = ev.psnr_db;
    };

    for (size_t stage_idx = 0; stage_idx < cfg.stages.size(); ++stage_idx) {
        const TrainStage& stage = cfg.stages[stage_idx];
        for (int s = 0; s < stage.steps; ++s, ++step) {
            model.store().zero_grads();
            std::vector<ItemResult> items(static_cast<size_t>(cfg.batch_size));
            if (threads <= 1 || cfg.batch_size == 1) {
                for (int i = 0; i < cfg.batch_size; ++i) {
                    run_item(model, cfg, source, step, static_cast<uint64_t>(i),
                             stage.num_frames, &items[static_cast<size_t>(i)]);
                }
            } else {
                std::vector<std::thread> pool;
                for (int i = 0; i < cfg.batch_size; ++i) {
                    pool.emplace_back(run_item, std::ref(model), std::cref(cfg),
                                      std::ref(source), step, static_cast<uint64_t>(i),
                                      stage.num_frames, &items[static_cast<size_t>(i)]);
                    if (static_cast<int>(pool.size()) == threads || i == cfg.batch_size - 1) {
                        for (auto& t : pool) t.join();
                        pool.clear();
                    }
                }
            }
            double batch_loss = 0.0;
            for (int i = 0; i < cfg.batch_size; ++i) {
                ItemResult& it = items[static_cast<size_t>(i)];
                if (!it.error.empty()) {
                    res.aborted = true;
                    res.abort_reason = "step " + std::to_string(step) + ": " + it.error;
                    res.steps_done = step;
                    return res;
                }
                batch_loss += it.loss;
                it.graph->accumulate_param_grads(1.0 / static_cast<double>(cfg.batch_size));
            }
            batch_loss /= static_cast<double>(cfg.batch_size);
            if (step == 0) initial_loss = batch_loss;
            if (batch_loss > cfg.divergence_factor * initial_loss) {
                if (++divergent_run >= cfg.divergence_patience) {
                    res.aborted = true;
                    res.abort_reason = "diverged: loss " + std::to_string(batch_loss) +
                                       " stayed above " + std::to_string(cfg.divergence_factor) +
                                       "x initial for " + std::to_string(divergent_run) + " steps";
                    res.steps_done = step;
                    log_point(static_cast<int>(stage_idx), batch_loss);
                    return res;
                }
            } else {
                divergent_run = 0;
            }
            opt.step();
            if (cfg.eval_every > 0 &&
                ((step + 1) % static_cast<uint64_t>(cfg.eval_every) == 0 ||
                 (s == stage.steps - 1 && stage_idx == cfg.stages.size() - 1))) {
                log_point(static_cast<int>(stage_idx), batch_loss);
            }
        }
    }
    res.steps_done = step;
    return res;
}

} // namespace hvc
