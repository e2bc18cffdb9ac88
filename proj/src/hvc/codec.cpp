#include "hvc/codec.hpp"

#include <sstream>

#include <json.hpp>

#include "hvc/metrics.hpp"
#include "hvc/range_coder.hpp"

namespace hvc {

using nlohmann::json;

namespace {

Tensor symbols_to_tensor(const std::vector<int32_t>& symbols, const Shape& shape, Dtype dt) {
    Tensor t = Tensor::zeros(shape, dt);
    check(static_cast<int64_t>(symbols.size()) == t.numel(), ErrorKind::Internal,
          "symbol count does not match latent shape");
    for (int64_t i = 0; i < t.numel(); ++i) {
        t.set(i, static_cast<double>(symbols[static_cast<size_t>(i)]));
    }
    return t;
}

} // namespace

EncodeResult encode_sequence(Model& model, const std::vector<Tensor>& frames, uint32_t gop_size,
                             uint32_t lambda_q) {
    check(!frames.empty(), ErrorKind::Usage, "encode_sequence: no frames");
    check(gop_size >= 1, ErrorKind::Usage, "gop_size must be >= 1");
    const int64_t w0 = frames[0].dim(3), h0 = frames[0].dim(2);
    for (const Tensor& f : frames) {
        check(f.rank() == 4 && f.dim(0) == 1 && f.dim(1) == 3, ErrorKind::Usage,
              "frames must be (1,3,H,W)");
        check(f.dim(2) == h0 && f.dim(3) == w0, ErrorKind::Usage,
              "all frames must share dimensions");
    }
    const int64_t L = model.num_scales();
    const Dtype dt = model.config().precision;

    EncodeResult out;
    out.container.header.config_hash = model.config_hash();
    out.container.header.frame_width = static_cast<uint32_t>(w0);
    out.container.header.frame_height = static_cast<uint32_t>(h0);
    out.container.header.frame_count = static_cast<uint32_t>(frames.size());
    out.container.header.gop_size = gop_size;
    out.container.header.lambda_q = lambda_q;
    out.container.header.num_scales = static_cast<uint16_t>(L);

    std::vector<std::vector<Tensor>> gop_latents; // decoded latents of the current GOP
    double bpp_sum = 0.0, psnr_sum = 0.0;
    for (size_t t = 0; t < frames.size(); ++t) {
        const bool intra = (t % gop_size) == 0;
        if (intra) gop_latents.clear();

        Tensor padded = reflect_pad_to_multiple(frames[t].to(dt), model.config().coarsest_factor());
        Graph g(&model.store(), /*recording=*/false);
        Var x = g.leaf(padded);
        std::vector<const std::vector<Tensor>*> hist;
        for (const auto& fl : gop_latents) hist.push_back(&fl);
        TemporalContext ctx = make_context_tensors(g, hist, L);
        FrameResult fr = model.frame_forward(g, Mode::Encode, x, ctx);

        FrameRecord rec;
        rec.frame_type = intra ? 0 : 1;
        rec.chunks.resize(static_cast<size_t>(L));
        FrameStats fs;
        fs.frame = static_cast<int64_t>(t);
        fs.intra = intra;
        fs.scale_bits.resize(static_cast<size_t>(L));
        for (int64_t l = 0; l < L; ++l) {
            ChunkPayload payload = encode_chunk(fr.symbols[static_cast<size_t>(l)],
                                                fr.sigma_idx[static_cast<size_t>(l)]);
            Chunk ch;
            ch.symbol_count = payload.symbol_count;
            ch.bytes = std::move(payload.bytes);
            fs.scale_bits[static_cast<size_t>(l)] = static_cast<int64_t>(ch.bytes.size()) * 8;
            fs.total_bits += fs.scale_bits[static_cast<size_t>(l)];
            rec.chunks[static_cast<size_t>(l)] = std::move(ch);
        }
        out.stats.clamped_symbols += fr.clamped;
        fs.bpp = static_cast<double>(fs.total_bits) / static_cast<double>(w0 * h0);

        Tensor recon = crop_frame(g.val(fr.xhat), h0, w0);
        fs.psnr = psnr(frames[t].to(dt), recon);
        out.recon.push_back(recon);

        bpp_sum += fs.bpp;
        psnr_sum += fs.psnr;
        out.stats.frames.push_back(std::move(fs));
        out.container.frames.push_back(std::move(rec));

        std::vector<Tensor> latents;
        for (int64_t l = 0; l < L; ++l) {
            latents.push_back(g.val(fr.scales[static_cast<size_t>(l)].z));
        }
        gop_latents.push_back(std::move(latents));
    }
    out.stats.mean_bpp = bpp_sum / static_cast<double>(frames.size());
    out.stats.mean_psnr = psnr_sum / static_cast<double>(frames.size());
    return out;
}

DecodeResult decode_sequence(Model& model, const Container& container,
                             const DecodeOptions& opts) {
    check(container.header.config_hash == model.config_hash(), ErrorKind::Format,
          "container was encoded with a different model config");
    const int64_t L = model.num_scales();
    check(container.header.num_scales == L, ErrorKind::Format, "container scale count mismatch");
    const int64_t w0 = container.header.frame_width, h0 = container.header.frame_height;
    int64_t cf = model.config().coarsest_factor();
    const int64_t wp = (w0 + cf - 1) / cf * cf;
    const int64_t hp = (h0 + cf - 1) / cf * cf;
    int64_t max_scales = opts.max_scales < 0 ? L : opts.max_scales;
    check(max_scales >= 1 && max_scales <= L, ErrorKind::Usage, "max_scales out of range");

    DecodeResult out;
    std::vector<std::vector<Tensor>> gop_latents;
    for (size_t t = 0; t < container.frames.size(); ++t) {
        const FrameRecord& rec = container.frames[t];
        const bool intra = (t % container.header.gop_size) == 0;
        check((rec.frame_type == 0) == intra, ErrorKind::Format,
              "frame type does not match GOP structure at frame " + std::to_string(t));
        if (intra) gop_latents.clear();

        Graph g(&model.store(), /*recording=*/false);
        std::vector<const std::vector<Tensor>*> hist;
        for (const auto& fl : gop_latents) hist.push_back(&fl);
        TemporalContext ctx = make_context_tensors(g, hist, L);

        DecodedFrameStats dfs;
        dfs.frame = static_cast<int64_t>(t);
        dfs.filled.assign(static_cast<size_t>(L), 0);
        ScaleLatentHook hook = [&](Graph& gg, int64_t l, Var mu_hat, Var sigma_hat) -> Var {
            bool want = l < max_scales;
            if (want && t < opts.drop_pattern.size() &&
                static_cast<size_t>(l) < opts.drop_pattern[t].size() &&
                opts.drop_pattern[t][static_cast<size_t>(l)]) {
                want = false;
            }
            const auto& chunk = rec.chunks[static_cast<size_t>(l)];
            if (want && chunk.has_value()) {
                std::vector<int32_t> sidx = sigma_indices(gg.val(sigma_hat));
                check(chunk->symbol_count == sidx.size(), ErrorKind::Format,
                      "chunk symbol count does not match latent size at frame " +
                          std::to_string(t) + " scale " + std::to_string(l));
                try {
                    std::vector<int32_t> symbols =
                        decode_chunk(chunk->bytes, chunk->symbol_count, sidx);
                    Tensor sym =
                        symbols_to_tensor(symbols, gg.val(mu_hat).shape(), gg.val(mu_hat).dtype());
                    dfs.scales_decoded += 1;
                    return gg.add(mu_hat, gg.leaf(std::move(sym)));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Truncation) throw;
                    dfs.chunk_error = true; // fall through to prior-mean fill
                }
            }
            dfs.filled[static_cast<size_t>(l)] = 1;
            return mu_hat; // zero-bit fill with the prior mean
        };
        FrameResult fr = model.frame_forward(g, Mode::Decode, Var{}, ctx, nullptr, hook, 1, hp, wp);
        out.frames.push_back(crop_frame(g.val(fr.xhat), h0, w0));
        out.stats.frames.push_back(std::move(dfs));

        std::vector<Tensor> latents;
        for (int64_t l = 0; l < L; ++l) {
            latents.push_back(g.val(fr.scales[static_cast<size_t>(l)].z));
        }
        gop_latents.push_back(std::move(latents));
    }
    return out;
}

// --------------------------------------------------------------------------
// reports

std::string EncodeStats::to_csv() const {
    std::ostringstream os;
    os << "frame,scale,bits,bpp,psnr,dropped\n";
    for (const FrameStats& f : frames) {
        for (size_t l = 0; l < f.scale_bits.size(); ++l) {
            os << f.frame << "," << l << "," << f.scale_bits[l] << "," << f.bpp << "," << f.psnr
               << ",0\n";
        }
    }
    return os.str();
}

std::string EncodeStats::to_json() const {
    json j;
    j["clamped_symbols"] = clamped_symbols;
    j["mean_bpp"] = mean_bpp;
    j["mean_psnr"] = mean_psnr;
    j["frames"] = json::array();
    for (const FrameStats& f : frames) {
        json jf;
        jf["frame"] = f.frame;
        jf["intra"] = f.intra;
        jf["bits"] = f.total_bits;
        jf["scale_bits"] = f.scale_bits;
        jf["bpp"] = f.bpp;
        jf["psnr"] = f.psnr;
        j["frames"].push_back(jf);
    }
    return j.dump(2);
}

std::string DecodeStats::to_csv() const {
    std::ostringstream os;
    os << "frame,scale,bits,bpp,psnr,dropped\n";
    for (const DecodedFrameStats& f : frames) {
        for (size_t l = 0; l < f.filled.size(); ++l) {
            os << f.frame << "," << l << ",,,," << (f.filled[l] ? 1 : 0) << "\n";
        }
    }
    return os.str();
}

std::string DecodeStats::to_json() const {
    json j = json::array();
    for (const DecodedFrameStats& f : frames) {
        json jf;
        jf["frame"] = f.frame;
        jf["scales_decoded"] = f.scales_decoded;
        jf["filled"] = f.filled;
        jf["chunk_error"] = f.chunk_error;
        j.push_back(jf);
    }
    return j.dump(2);
}

std::vector<RateReportRow> rate_report(const EncodeStats& stats, int64_t width, int64_t height) {
    std::vector<RateReportRow> rows;
    double px = static_cast<double>(width * height);
    for (const FrameStats& f : stats.frames) {
        for (size_t l = 0; l < f.scale_bits.size(); ++l) {
            RateReportRow r;
            r.frame = f.frame;
            r.scale = static_cast<int64_t>(l);
            r.bits = f.scale_bits[l];
            r.bpp = static_cast<double>(r.bits) / px;
            r.pct = f.total_bits > 0
                        ? 100.0 * static_cast<double>(r.bits) / static_cast<double>(f.total_bits)
                        : 0.0;
            rows.push_back(r);
        }
    }
    return rows;
}

std::vector<RateReportRow> rate_report_from_container(const Container& c) {
    EncodeStats st;
    for (size_t t = 0; t < c.frames.size(); ++t) {
        FrameStats fs;
        fs.frame = static_cast<int64_t>(t);
        fs.intra = c.frames[t].frame_type == 0;
        for (const auto& ch : c.frames[t].chunks) {
            int64_t bits = ch.has_value() ? static_cast<int64_t>(ch->bytes.size()) * 8 : 0;
            fs.scale_bits.push_back(bits);
            fs.total_bits += bits;
        }
        st.frames.push_back(std::move(fs));
    }
    return rate_report(st, c.header.frame_width, c.header.frame_height);
}

std::string rate_report_csv(const std::vector<RateReportRow>& rows) {
    std::ostringstream os;
    os << "frame,scale,bits,bpp,pct\n";
    for (const RateReportRow& r : rows) {
        os << r.frame << "," << r.scale << "," << r.bits << "," << r.bpp << "," << r.pct << "\n";
    }
    return os.str();
}

std::string rate_report_json(const std::vector<RateReportRow>& rows) {
    json j = json::array();
    for (const RateReportRow& r : rows) {
        j.push_back({{"frame", r.frame},
                     {"scale", r.scale},
                     {"bits", r.bits},
                     {"bpp", r.bpp},
                     {"pct", r.pct}});
    }
    return j.dump(2);
}

std::vector<std::vector<uint8_t>> simulate_loss(const Container& c, const LossModel& lm,
                                                uint64_t seed) {
    check(lm.p >= 0.0 && lm.p <= 1.0, ErrorKind::Usage, "loss probability must be in [0,1]");
    size_t L = c.header.num_scales;
    std::vector<std::vector<uint8_t>> drops(c.frames.size(), std::vector<uint8_t>(L, 0));
    Rng rng(derive_seed(seed, 0x105e));
    if (lm.kind == LossKind::Iid) {
        for (auto& frame : drops) {
            for (auto& flag : frame) flag = rng.uniform01() < lm.p ? 1 : 0;
        }
    } else {
        check(lm.burst_len >= 1, ErrorKind::Usage, "burst length must be >= 1");
        // A burst starts with probability p/len at each packet, then drops
        // the next len packets (frame-major order), matching an average
        // loss fraction of ~p.
        int64_t remaining = 0;
        for (auto& frame : drops) {
            for (auto& flag : frame) {
                if (remaining > 0) {
                    flag = 1;
                    --remaining;
                    continue;
                }
                if (rng.uniform01() < lm.p / static_cast<double>(lm.burst_len)) {
                    flag = 1;
                    remaining = lm.burst_len - 1;
                }
            }
        }
    }
    return drops;
}

} // namespace hvc
