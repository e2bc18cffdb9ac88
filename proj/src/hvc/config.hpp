#pragma once

// Model architecture description. The canonical-form hash of the fields
// that affect decoding is embedded in checkpoints and bitstreams so that a
// decoder can refuse data produced under a different architecture.

#include <cstdint>
#include <string>
#include <vector>

#include "hvc/tensor.hpp"

namespace hvc {

struct ScaleSpec {
    int64_t downsample_factor = 0; // spatial factor relative to the input frame
    int64_t channels = 0;          // feature width of r/f/d/c at this scale
    int64_t latent_channels = 0;   // width of z at this scale
};

struct ModelConfig {
    // Ordered coarse -> fine; factors non-increasing, first factor largest.
    std::vector<ScaleSpec> scales;
    bool temporal_prediction = true; // TP
    bool decoding_fusion = true;     // DF
    int temporal_context_len = 2;
    int res_blocks = 2; // stacked ConvNeXt blocks per fusion/prediction stage
    Dtype precision = Dtype::F32;

    int64_t num_scales() const { return static_cast<int64_t>(scales.size()); }
    int64_t coarsest_factor() const { return scales.empty() ? 0 : scales[0].downsample_factor; }

    void validate() const;
    // Hash over the canonical serialized form of decode-relevant fields.
    uint64_t canonical_hash() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    // 192-channel five-scale ladder matching the full-size architecture;
    // used for shape conformance only.
    static ModelConfig paper_shape();
    // Default working preset for 64x64 content on CPU.
    static ModelConfig desk();
    // Small preset for fast tests and the acceptance trainings.
    static ModelConfig tiny();
};

ModelConfig load_model_config(const std::string& path);
void save_model_config(const std::string& path, const ModelConfig& cfg);

} // namespace hvc
