#pragma once

// Sequence-level pipeline: GOP structuring, container assembly, full and
// progressive/partial decoding with prior-mean fill for missing scales, and
// rate reporting.

#include <string>
#include <vector>

#include "hvc/container.hpp"
#include "hvc/net.hpp"

namespace hvc {

struct FrameStats {
    int64_t frame = 0;
    bool intra = false;
    std::vector<int64_t> scale_bits; // actual payload bytes * 8, per scale
    int64_t total_bits = 0;
    double bpp = 0.0;
    double psnr = 0.0; // closed-loop reconstruction vs input (8-bit, cropped)
};

struct EncodeStats {
    std::vector<FrameStats> frames;
    int64_t clamped_symbols = 0;
    double mean_bpp = 0.0;
    double mean_psnr = 0.0;

    std::string to_csv() const;
    std::string to_json() const;
};

struct DecodedFrameStats {
    int64_t frame = 0;
    int64_t scales_decoded = 0;
    std::vector<uint8_t> filled;  // per scale: 1 if substituted with the prior mean
    bool chunk_error = false;     // a chunk failed to entropy-decode
};

struct DecodeStats {
    std::vector<DecodedFrameStats> frames;
    std::string to_csv() const;
    std::string to_json() const;
};

struct DecodeOptions {
    int64_t max_scales = -1; // -1 = all
    // drop_pattern[frame] = per-scale flags; chunks flagged 1 are treated as
    // lost even if present in the container.
    std::vector<std::vector<uint8_t>> drop_pattern;
};

struct EncodeResult {
    Container container;
    EncodeStats stats;
    std::vector<Tensor> recon; // encoder-side closed-loop reconstructions (cropped)
};

struct DecodeResult {
    std::vector<Tensor> frames; // cropped reconstructions
    DecodeStats stats;
};

// Deterministic encode of an aligned-or-padded frame sequence. All frames
// must share dims. gop_size >= 1; intra frames at t % gop_size == 0.
EncodeResult encode_sequence(Model& model, const std::vector<Tensor>& frames, uint32_t gop_size,
                             uint32_t lambda_q = 0);

DecodeResult decode_sequence(Model& model, const Container& container,
                             const DecodeOptions& opts = {});

// Per-(frame, scale) rate table from encode stats.
struct RateReportRow {
    int64_t frame = 0;
    int64_t scale = 0;
    int64_t bits = 0;
    double bpp = 0.0;
    double pct = 0.0; // share of the frame's total
};
std::vector<RateReportRow> rate_report(const EncodeStats& stats, int64_t width, int64_t height);
std::string rate_report_csv(const std::vector<RateReportRow>& rows);
std::string rate_report_json(const std::vector<RateReportRow>& rows);

// Same table computed from a container alone (byte lengths are stored per
// chunk, so no model is needed).
std::vector<RateReportRow> rate_report_from_container(const Container& c);

enum class LossKind { Iid, Burst };
struct LossModel {
    LossKind kind = LossKind::Iid;
    double p = 0.0;       // per-packet loss probability (iid) / burst rate
    int64_t burst_len = 4; // packets per burst event
};

// Treats each (frame, scale) chunk as one packet and draws a deterministic
// drop pattern for the given seed.
std::vector<std::vector<uint8_t>> simulate_loss(const Container& c, const LossModel& lm,
                                                uint64_t seed);

} // namespace hvc
