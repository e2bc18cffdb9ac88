// hvc: hierarchical predictive video codec CLI.
//
// Subcommands: train, encode, decode, roundtrip, rd-sweep, synth, inspect,
// ablate, gradcheck. When --config is given, values present in the file
// override command-line flags. Environment: HVC_THREADS (worker threads),
// HVC_LOG (quiet|info).

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hvc/codec.hpp"
#include "hvc/metrics.hpp"
#include "hvc/train.hpp"

using namespace hvc;
using nlohmann::json;

namespace {

constexpr uint64_t kDataSeedTag = 0xda7a;
constexpr uint64_t kEvalSeedTag = 0xe7a1;

bool log_quiet() {
    const char* v = std::getenv("HVC_LOG");
    return v && std::string(v) == "quiet";
}

int env_threads() {
    const char* v = std::getenv("HVC_THREADS");
    return v ? std::atoi(v) : 0;
}

struct CommonModelArgs {
    std::string config_path;
    std::string ckpt_path;
};

ModelConfig resolve_config(const std::string& config_path) {
    return config_path.empty() ? ModelConfig::desk() : load_model_config(config_path);
}

Model load_model(const ModelConfig& cfg, const std::string& ckpt_path, uint64_t seed) {
    Model m(cfg, seed);
    if (!ckpt_path.empty()) load_checkpoint(ckpt_path, m.store(), m.config_hash());
    return m;
}

std::vector<TrainStage> parse_stages(const std::string& s) {
    // "1x600,3x300,5x120"
    std::vector<TrainStage> stages;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t x = item.find('x');
        check(x != std::string::npos, ErrorKind::Usage,
              "bad --stages element '" + item + "' (want <frames>x<steps>)");
        TrainStage st;
        st.num_frames = std::stoi(item.substr(0, x));
        st.steps = std::stoi(item.substr(x + 1));
        stages.push_back(st);
    }
    check(!stages.empty(), ErrorKind::Usage, "--stages is empty");
    return stages;
}

SynthMix parse_mix(const std::string& s) {
    // "still=0.7,shift=0.3"
    SynthMix mix;
    mix.still_w = mix.shift_w = mix.blur_w = mix.fade_w = 0.0;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t eq = item.find('=');
        check(eq != std::string::npos, ErrorKind::Usage, "bad --mix element '" + item + "'");
        std::string key = item.substr(0, eq);
        double w = std::stod(item.substr(eq + 1));
        if (key == "still") mix.still_w = w;
        else if (key == "shift") mix.shift_w = w;
        else if (key == "blur") mix.blur_w = w;
        else if (key == "fade") mix.fade_w = w;
        else fail(ErrorKind::Usage, "unknown mix component '" + key + "'");
    }
    check(mix.still_w + mix.shift_w + mix.blur_w + mix.fade_w > 0.0, ErrorKind::Usage,
          "--mix weights sum to zero");
    return mix;
}

void parse_size(const std::string& s, int64_t* w, int64_t* h) {
    size_t x = s.find('x');
    check(x != std::string::npos, ErrorKind::Usage, "bad --size (want WxH)");
    *w = std::stoll(s.substr(0, x));
    *h = std::stoll(s.substr(x + 1));
}

// Config-file values override flags (the file wins when both are present).
void apply_train_overrides(const std::string& config_path, TrainConfig* tc) {
    if (config_path.empty()) return;
    std::ifstream f(config_path);
    check(f.good(), ErrorKind::Io, "cannot open config " + config_path);
    std::ostringstream ss;
    ss << f.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    check(!j.is_discarded(), ErrorKind::Io, "config parse error: " + config_path);
    if (!j.contains("train")) return;
    const json& t = j["train"];
    if (t.contains("lambda")) tc->lambda = t["lambda"].get<double>();
    if (t.contains("learning_rate")) tc->learning_rate = t["learning_rate"].get<double>();
    if (t.contains("batch_size")) tc->batch_size = t["batch_size"].get<int>();
    if (t.contains("seed")) tc->seed = t["seed"].get<uint64_t>();
    if (t.contains("grad_clip_norm")) tc->grad_clip_norm = t["grad_clip_norm"].get<double>();
    if (t.contains("adam_beta1")) tc->adam_beta1 = t["adam_beta1"].get<double>();
    if (t.contains("adam_beta2")) tc->adam_beta2 = t["adam_beta2"].get<double>();
    if (t.contains("adam_eps")) tc->adam_eps = t["adam_eps"].get<double>();
    if (t.contains("stages")) {
        tc->stages.clear();
        for (const json& st : t["stages"]) {
            tc->stages.push_back({st.at(0).get<int>(), st.at(1).get<int>()});
        }
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    check(f.good(), ErrorKind::Io, "cannot create " + path);
    f << text;
}

bool wants_json(const std::string& path) {
    return path.size() > 5 && path.rfind(".json") == path.size() - 5;
}

void write_stats(const std::string& path, const EncodeStats& stats) {
    if (path.empty()) return;
    write_text(path, wants_json(path) ? stats.to_json() : stats.to_csv());
}

std::vector<Tensor> load_frames_arg(const std::string& path, int64_t w, int64_t h) {
    RawVideo v = load_raw_video(path, w, h);
    return std::move(v.frames);
}

// --- subcommand bodies ------------------------------------------------------

int cmd_synth(const std::string& pattern, double x, int64_t frames, const std::string& size,
              uint64_t seed, const std::string& out) {
    SyntheticSpec sp;
    sp.pattern = synth_pattern_from_name(pattern);
    sp.x = x;
    sp.num_frames = frames;
    parse_size(size, &sp.width, &sp.height);
    std::vector<Tensor> v = synth_generate(sp, seed);
    save_raw_video(out, v);
    if (!log_quiet()) {
        std::cout << "wrote " << v.size() << " frames (" << sp.width << "x" << sp.height
                  << ") to " << out << "\n";
    }
    return 0;
}

int cmd_train(const CommonModelArgs& margs, const std::string& out, const std::string& log_path,
              TrainConfig tc, const std::string& stages, const std::string& data,
              const std::string& size, const std::string& mix_str, int64_t eval_frames,
              int64_t raw_w, int64_t raw_h) {
    tc.stages = parse_stages(stages);
    apply_train_overrides(margs.config_path, &tc);
    tc.threads = env_threads();
    ModelConfig cfg = resolve_config(margs.config_path);
    Model model(cfg, tc.seed);
    if (!margs.ckpt_path.empty()) {
        load_checkpoint(margs.ckpt_path, model.store(), model.config_hash());
    }

    int64_t w = 64, h = 64;
    if (!size.empty()) parse_size(size, &w, &h);

    std::unique_ptr<ClipSource> src;
    if (!data.empty()) {
        src = std::make_unique<VideoClipSource>(load_frames_arg(data, raw_w, raw_h),
                                                derive_seed(tc.seed, kDataSeedTag));
    } else {
        SynthMix mix;
        if (!mix_str.empty()) mix = parse_mix(mix_str);
        src = std::make_unique<SyntheticClipSource>(w, h, mix, derive_seed(tc.seed, kDataSeedTag));
    }
    SyntheticSpec evsp;
    evsp.num_frames = eval_frames;
    evsp.width = w;
    evsp.height = h;
    std::vector<Tensor> eval_clip = synth_generate(evsp, derive_seed(tc.seed, kEvalSeedTag));

    TrainResult r = train(model, tc, *src, eval_clip, log_path);
    if (r.aborted) {
        std::cerr << "error: kind=training msg=\"" << r.abort_reason << "\"\n";
        return 1;
    }
    save_checkpoint(out, model.store(), model.config_hash());
    if (!log_quiet()) {
        std::cout << "trained " << r.steps_done << " steps; eval bpp " << r.final_eval_bpp
                  << ", psnr " << r.final_eval_psnr << " dB; checkpoint " << out << "\n";
    }
    return 0;
}

int cmd_encode(const CommonModelArgs& margs, const std::string& in, const std::string& out,
               uint32_t gop, double lambda, const std::string& stats_path, int64_t w,
               int64_t h) {
    Model model = load_model(resolve_config(margs.config_path), margs.ckpt_path, 1);
    std::vector<Tensor> frames = load_frames_arg(in, w, h);
    EncodeResult er = encode_sequence(model, frames, gop, static_cast<uint32_t>(lambda));
    save_container(out, er.container);
    write_stats(stats_path, er.stats);
    if (!log_quiet()) {
        std::cout << "encoded " << frames.size() << " frames: mean " << er.stats.mean_bpp
                  << " bpp, " << er.stats.mean_psnr << " dB, " << er.container.serialize().size()
                  << " container bytes";
        if (er.stats.clamped_symbols > 0) {
            std::cout << " (" << er.stats.clamped_symbols << " residuals clamped)";
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_decode(const CommonModelArgs& margs, const std::string& in, const std::string& out,
               int64_t max_scales, double loss_p, int64_t burst_len, uint64_t loss_seed,
               const std::string& stats_path) {
    Model model = load_model(resolve_config(margs.config_path), margs.ckpt_path, 1);
    Container c = load_container(in);
    DecodeOptions opts;
    opts.max_scales = max_scales;
    if (loss_p > 0.0) {
        LossModel lm;
        lm.kind = burst_len > 0 ? LossKind::Burst : LossKind::Iid;
        lm.p = loss_p;
        if (burst_len > 0) lm.burst_len = burst_len;
        opts.drop_pattern = simulate_loss(c, lm, loss_seed);
    }
    DecodeResult dr = decode_sequence(model, c, opts);
    if (!out.empty()) save_raw_video(out, dr.frames);
    if (!stats_path.empty()) {
        write_text(stats_path, wants_json(stats_path) ? dr.stats.to_json() : dr.stats.to_csv());
    }
    if (!log_quiet()) {
        int64_t used = 0;
        for (const auto& f : dr.stats.frames) used += f.scales_decoded;
        double per_frame = dr.frames.empty()
                               ? 0.0
                               : static_cast<double>(used) / static_cast<double>(dr.frames.size());
        std::cout << "decoded " << dr.frames.size() << " frames, " << per_frame
                  << " scales used per frame\n";
    }
    return 0;
}

int cmd_roundtrip(const CommonModelArgs& margs, const std::string& in, uint32_t gop, int64_t w,
                  int64_t h) {
    Model model = load_model(resolve_config(margs.config_path), margs.ckpt_path, 1);
    std::vector<Tensor> frames = load_frames_arg(in, w, h);
    EncodeResult er = encode_sequence(model, frames, gop);
    Container c = Container::parse(er.container.serialize());
    DecodeResult dr = decode_sequence(model, c);
    double max_diff = 0.0;
    for (size_t t = 0; t < frames.size(); ++t) {
        for (int64_t i = 0; i < er.recon[t].numel(); ++i) {
            max_diff = std::max(max_diff, std::fabs(er.recon[t].at(i) - dr.frames[t].at(i)));
        }
    }
    std::cout << "roundtrip: frames=" << frames.size() << " mean_bpp=" << er.stats.mean_bpp
              << " mean_psnr=" << er.stats.mean_psnr << " max_encoder_decoder_diff=" << max_diff
              << "\n";
    if (max_diff != 0.0) {
        std::cerr << "error: kind=closed-loop msg=\"encoder and decoder reconstructions differ\"\n";
        return 1;
    }
    return 0;
}

int cmd_inspect(const std::string& in, const std::string& out) {
    Container c = load_container(in);
    auto rows = rate_report_from_container(c);
    std::string text = (!out.empty() && wants_json(out)) ? rate_report_json(rows)
                                                         : rate_report_csv(rows);
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text(out, text);
    }
    return 0;
}

int cmd_gradcheck(const std::string& config_path, int samples, double eps, double tol,
                  uint64_t seed, const std::string& size, int64_t frames) {
    ModelConfig cfg = config_path.empty() ? ModelConfig::desk() : load_model_config(config_path);
    cfg.precision = Dtype::F64; // the check is defined in 64-bit mode
    Model model(cfg, seed);
    int64_t w = 64, h = 64;
    if (!size.empty()) parse_size(size, &w, &h);
    SyntheticSpec sp;
    sp.pattern = SynthPattern::Shift;
    sp.x = 1.0;
    sp.num_frames = frames;
    sp.width = w;
    sp.height = h;
    std::vector<Tensor> clip = synth_generate(sp, derive_seed(seed, 0x9dc));
    GradCheckResult r = gradient_check(model, clip, 1024.0, samples, eps, tol, seed);
    std::cout << "gradcheck: samples=" << r.samples << " failures=" << r.failures
              << " max_rel_err=" << r.max_rel_err << " mean_rel_err=" << r.mean_rel_err << "\n";
    return r.failures == 0 ? 0 : 1;
}

int cmd_rd_sweep(const CommonModelArgs& margs, const std::string& lambdas_str,
                 const std::string& ckpt_pattern, bool do_train, const std::string& stages,
                 const std::string& out, const std::string& size, uint64_t seed,
                 const std::string& mix_str, int batch, double lr) {
    std::vector<double> lambdas;
    {
        std::stringstream ss(lambdas_str);
        std::string item;
        while (std::getline(ss, item, ',')) lambdas.push_back(std::stod(item));
    }
    check(!lambdas.empty(), ErrorKind::Usage, "--lambdas is empty");
    check(do_train || !ckpt_pattern.empty(), ErrorKind::Usage,
          "rd-sweep needs --train or --ckpt-pattern");
    int64_t w = 32, h = 32;
    if (!size.empty()) parse_size(size, &w, &h);
    ModelConfig cfg = resolve_config(margs.config_path);

    SyntheticSpec evsp;
    evsp.num_frames = 8;
    evsp.width = w;
    evsp.height = h;
    std::vector<Tensor> eval_clip = synth_generate(evsp, derive_seed(seed, kEvalSeedTag));

    std::ostringstream csv;
    csv << "lambda,bpp,psnr\n";
    double prev_bpp = -1.0, prev_psnr = -1.0;
    bool monotone = true;
    for (double lambda : lambdas) {
        Model model(cfg, seed);
        if (do_train) {
            TrainConfig tc;
            tc.lambda = lambda;
            tc.stages = parse_stages(stages);
            tc.batch_size = batch;
            tc.learning_rate = lr;
            tc.seed = seed;
            tc.threads = env_threads();
            tc.eval_every = 0;
            SynthMix mix;
            if (!mix_str.empty()) mix = parse_mix(mix_str);
            SyntheticClipSource src(w, h, mix, derive_seed(seed, kDataSeedTag));
            TrainResult tres = train(model, tc, src, {}, "");
            if (tres.aborted) {
                std::cerr << "error: kind=training msg=\"" << tres.abort_reason << "\"\n";
                return 1;
            }
        } else {
            std::string path = ckpt_pattern;
            size_t pos = path.find("{lambda}");
            check(pos != std::string::npos, ErrorKind::Usage,
                  "--ckpt-pattern must contain {lambda}");
            path.replace(pos, 8, std::to_string(static_cast<int>(lambda)));
            load_checkpoint(path, model.store(), model.config_hash());
        }
        EncodeResult er = encode_sequence(model, eval_clip,
                                          static_cast<uint32_t>(eval_clip.size()),
                                          static_cast<uint32_t>(lambda));
        csv << lambda << "," << er.stats.mean_bpp << "," << er.stats.mean_psnr << "\n";
        if (prev_bpp >= 0.0 && (er.stats.mean_bpp < prev_bpp || er.stats.mean_psnr < prev_psnr)) {
            monotone = false;
        }
        prev_bpp = er.stats.mean_bpp;
        prev_psnr = er.stats.mean_psnr;
        if (!log_quiet()) {
            std::cout << "lambda " << lambda << ": " << er.stats.mean_bpp << " bpp, "
                      << er.stats.mean_psnr << " dB\n";
        }
    }
    if (out.empty()) {
        std::cout << csv.str();
    } else {
        write_text(out, csv.str());
    }
    if (!log_quiet() && !monotone) {
        std::cout << "note: sweep is not monotone in lambda order on this eval set\n";
    }
    return 0;
}

int cmd_ablate(const CommonModelArgs& margs, const std::string& out_dir,
               const std::string& stages, double lambda, uint64_t seed, const std::string& size,
               int batch, double lr) {
    int64_t w = 32, h = 32;
    if (!size.empty()) parse_size(size, &w, &h);
    ModelConfig base = resolve_config(margs.config_path);

    struct Variant {
        const char* name;
        bool tp, df, lt;
    };
    // baseline, +TP, +TP+DF, +TP+DF+LT (LT = the 5-frame fine-tune stage)
    std::vector<Variant> variants = {{"baseline", false, false, false},
                                     {"tp", true, false, false},
                                     {"tp_df", true, true, false},
                                     {"tp_df_lt", true, true, true}};
    SyntheticSpec evsp;
    evsp.num_frames = 8;
    evsp.width = w;
    evsp.height = h;
    std::vector<Tensor> eval_clip = synth_generate(evsp, derive_seed(seed, kEvalSeedTag));

    std::ostringstream csv;
    csv << "config,tp,df,lt,bpp,psnr,intra_bpp,inter_bpp\n";
    for (const Variant& v : variants) {
        ModelConfig cfg = base;
        cfg.temporal_prediction = v.tp;
        cfg.decoding_fusion = v.df;
        Model model(cfg, seed);
        TrainConfig tc;
        tc.lambda = lambda;
        tc.stages = parse_stages(stages);
        if (!v.lt && !tc.stages.empty() && tc.stages.back().num_frames == 5) {
            tc.stages.pop_back();
        }
        tc.batch_size = batch;
        tc.learning_rate = lr;
        tc.seed = seed;
        tc.threads = env_threads();
        tc.eval_every = 0;
        SyntheticClipSource src(w, h, SynthMix{}, derive_seed(seed, kDataSeedTag));
        TrainResult tres = train(model, tc, src, {}, "");
        if (tres.aborted) {
            std::cerr << "error: kind=training msg=\"" << tres.abort_reason << "\"\n";
            return 1;
        }
        EncodeResult er =
            encode_sequence(model, eval_clip, static_cast<uint32_t>(eval_clip.size()));
        double intra_bpp = 0, inter_bpp = 0;
        int64_t inter_n = 0;
        for (const FrameStats& f : er.stats.frames) {
            if (f.intra) {
                intra_bpp += f.bpp;
            } else {
                inter_bpp += f.bpp;
                ++inter_n;
            }
        }
        if (inter_n > 0) inter_bpp /= static_cast<double>(inter_n);
        csv << v.name << "," << v.tp << "," << v.df << "," << v.lt << "," << er.stats.mean_bpp
            << "," << er.stats.mean_psnr << "," << intra_bpp << "," << inter_bpp << "\n";
        if (!log_quiet()) {
            std::cout << v.name << ": " << er.stats.mean_bpp << " bpp, " << er.stats.mean_psnr
                      << " dB\n";
        }
    }
    write_text(out_dir + "/ablate.csv", csv.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical predictive video codec"};
    app.require_subcommand(1);

    CommonModelArgs margs;

    auto* synth = app.add_subcommand("synth", "generate a synthetic raw clip");
    std::string sy_pattern = "still", sy_size = "64x64", sy_out;
    double sy_x = 0.0;
    int64_t sy_frames = 8;
    uint64_t sy_seed = 1;
    synth->add_option("--pattern", sy_pattern, "still|shift|blur|fade");
    synth->add_option("--x", sy_x, "pattern parameter (px/frame or sigma slope)");
    synth->add_option("--frames", sy_frames);
    synth->add_option("--size", sy_size, "WxH");
    synth->add_option("--seed", sy_seed);
    synth->add_option("--out", sy_out)->required();

    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_out, tr_log, tr_stages = "1x20000,3x5000,5x1000", tr_data, tr_size = "64x64";
    std::string tr_mix = "still=0.7,shift=0.2,blur=0.05,fade=0.05";
    int64_t tr_eval_frames = 5, tr_raw_w = 0, tr_raw_h = 0;
    TrainConfig tr_cfg;
    tr->add_option("--config", margs.config_path, "model/train config JSON (overrides flags)");
    tr->add_option("--resume", margs.ckpt_path, "checkpoint to continue from");
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--log", tr_log, "CSV eval log path");
    tr->add_option("--lambda", tr_cfg.lambda);
    tr->add_option("--stages", tr_stages, "e.g. 1x20000,3x5000,5x1000");
    tr->add_option("--batch", tr_cfg.batch_size);
    tr->add_option("--lr", tr_cfg.learning_rate);
    tr->add_option("--seed", tr_cfg.seed);
    tr->add_option("--eval-every", tr_cfg.eval_every);
    tr->add_option("--data", tr_data, "raw RGB8 video for training (default: synthetic)");
    tr->add_option("--width", tr_raw_w, "raw video width (headerless files)");
    tr->add_option("--height", tr_raw_h, "raw video height (headerless files)");
    tr->add_option("--size", tr_size, "synthetic frame size WxH");
    tr->add_option("--mix", tr_mix, "synthetic pattern weights");
    tr->add_option("--eval-frames", tr_eval_frames);

    auto* en = app.add_subcommand("encode", "encode a raw clip into a container");
    std::string en_in, en_out, en_stats;
    uint32_t en_gop = 32;
    double en_lambda = 0;
    int64_t en_w = 0, en_h = 0;
    en->add_option("--config", margs.config_path);
    en->add_option("--ckpt", margs.ckpt_path)->required();
    en->add_option("--in", en_in)->required();
    en->add_option("--out", en_out)->required();
    en->add_option("--gop", en_gop);
    en->add_option("--lambda", en_lambda, "metadata tag only");
    en->add_option("--stats", en_stats, "write encode stats (.csv or .json)");
    en->add_option("--width", en_w);
    en->add_option("--height", en_h);

    auto* de = app.add_subcommand("decode", "decode a container");
    std::string de_in, de_out, de_stats;
    int64_t de_max_scales = -1, de_burst = 0;
    double de_loss_p = 0.0;
    uint64_t de_loss_seed = 1;
    de->add_option("--config", margs.config_path);
    de->add_option("--ckpt", margs.ckpt_path)->required();
    de->add_option("--in", de_in)->required();
    de->add_option("--out", de_out, "raw RGB8 output path");
    de->add_option("--max-scales", de_max_scales, "decode only the first k scales");
    de->add_option("--loss-p", de_loss_p, "simulated packet loss probability");
    de->add_option("--burst-len", de_burst, "burst length (0 = iid losses)");
    de->add_option("--loss-seed", de_loss_seed);
    de->add_option("--stats", de_stats);

    auto* rt = app.add_subcommand("roundtrip", "encode+decode and verify the closed loop");
    std::string rt_in;
    uint32_t rt_gop = 32;
    int64_t rt_w = 0, rt_h = 0;
    rt->add_option("--config", margs.config_path);
    rt->add_option("--ckpt", margs.ckpt_path)->required();
    rt->add_option("--in", rt_in)->required();
    rt->add_option("--gop", rt_gop);
    rt->add_option("--width", rt_w);
    rt->add_option("--height", rt_h);

    auto* rd = app.add_subcommand("rd-sweep", "rate-distortion sweep over lambdas");
    std::string rd_lambdas = "256,512,1024,2048", rd_ckpt_pattern, rd_out;
    std::string rd_stages = "1x400,3x200", rd_size = "32x32", rd_mix;
    bool rd_train = false;
    uint64_t rd_seed = 1;
    int rd_batch = 4;
    double rd_lr = 1e-3;
    rd->add_option("--config", margs.config_path);
    rd->add_option("--lambdas", rd_lambdas);
    rd->add_option("--ckpt-pattern", rd_ckpt_pattern, "e.g. ckpt_{lambda}.bin");
    rd->add_flag("--train", rd_train, "train each point from scratch");
    rd->add_option("--stages", rd_stages);
    rd->add_option("--out", rd_out, "CSV output");
    rd->add_option("--size", rd_size);
    rd->add_option("--seed", rd_seed);
    rd->add_option("--mix", rd_mix);
    rd->add_option("--batch", rd_batch);
    rd->add_option("--lr", rd_lr);

    auto* insp = app.add_subcommand("inspect", "per-scale rate report from a container");
    std::string in_in, in_out;
    insp->add_option("--in", in_in)->required();
    insp->add_option("--out", in_out, "report path (.csv or .json; default stdout)");

    auto* ab = app.add_subcommand("ablate", "train the TP/DF/LT ablation matrix");
    std::string ab_out = ".", ab_stages = "1x400,3x200,5x80", ab_size = "32x32";
    double ab_lambda = 1024.0;
    uint64_t ab_seed = 1;
    int ab_batch = 4;
    double ab_lr = 1e-3;
    ab->add_option("--config", margs.config_path);
    ab->add_option("--out-dir", ab_out);
    ab->add_option("--stages", ab_stages);
    ab->add_option("--lambda", ab_lambda);
    ab->add_option("--seed", ab_seed);
    ab->add_option("--size", ab_size);
    ab->add_option("--batch", ab_batch);
    ab->add_option("--lr", ab_lr);

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_size = "64x64";
    int gc_samples = 200;
    double gc_eps = 1e-4, gc_tol = 1e-4;
    uint64_t gc_seed = 1;
    int64_t gc_frames = 2;
    gc->add_option("--config", margs.config_path);
    gc->add_option("--samples", gc_samples);
    gc->add_option("--eps", gc_eps);
    gc->add_option("--tol", gc_tol);
    gc->add_option("--seed", gc_seed);
    gc->add_option("--size", gc_size);
    gc->add_option("--frames", gc_frames);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(sy_pattern, sy_x, sy_frames, sy_size, sy_seed, sy_out);
        }
        if (tr->parsed()) {
            return cmd_train(margs, tr_out, tr_log, tr_cfg, tr_stages, tr_data, tr_size, tr_mix,
                             tr_eval_frames, tr_raw_w, tr_raw_h);
        }
        if (en->parsed()) {
            return cmd_encode(margs, en_in, en_out, en_gop, en_lambda, en_stats, en_w, en_h);
        }
        if (de->parsed()) {
            return cmd_decode(margs, de_in, de_out, de_max_scales, de_loss_p, de_burst,
                              de_loss_seed, de_stats);
        }
        if (rt->parsed()) {
            return cmd_roundtrip(margs, rt_in, rt_gop, rt_w, rt_h);
        }
        if (rd->parsed()) {
            return cmd_rd_sweep(margs, rd_lambdas, rd_ckpt_pattern, rd_train, rd_stages, rd_out,
                                rd_size, rd_seed, rd_mix, rd_batch, rd_lr);
        }
        if (insp->parsed()) {
            return cmd_inspect(in_in, in_out);
        }
        if (ab->parsed()) {
            return cmd_ablate(margs, ab_out, ab_stages, ab_lambda, ab_seed, ab_size, ab_batch,
                              ab_lr);
        }
        if (gc->parsed()) {
            return cmd_gradcheck(margs.config_path, gc_samples, gc_eps, gc_tol, gc_seed, gc_size,
                                 gc_frames);
        }
    } catch (const Error& e) {
        const char* kind = "internal";
        switch (e.kind()) {
        case ErrorKind::Config: kind = "config"; break;
        case ErrorKind::Usage: kind = "usage"; break;
        case ErrorKind::Numeric: kind = "numeric"; break;
        case ErrorKind::Io: kind = "io"; break;
        case ErrorKind::Format: kind = "format"; break;
        case ErrorKind::Truncation: kind = "truncation"; break;
        case ErrorKind::Internal: kind = "internal"; break;
        }
        std::cerr << "error: kind=" << kind << " msg=\"" << e.what() << "\"\n";
        return e.kind() == ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: kind=unexpected msg=\"" << e.what() << "\"\n";
        return 1;
    }
    return 0;
}
