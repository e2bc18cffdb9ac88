#pragma once

// Procedural texture frames and the synthetic temporal patterns used for
// training and evaluation: toroidal pixel shifting, progressive Gaussian
// blurring, and linear cross-fading between two scenes. x = 0 always yields
// a still sequence.

#include <cstdint>
#include <string>
#include <vector>

#include "hvc/tensor.hpp"

namespace hvc {

enum class SynthPattern { Still, Shift, Blur, Fade };

struct SyntheticSpec {
    SynthPattern pattern = SynthPattern::Still;
    double x = 0.0; // shift: pixels/frame; blur: sigma slope; fade: ignored
    int64_t num_frames = 8;
    int64_t width = 64;
    int64_t height = 64;
};

SynthPattern synth_pattern_from_name(const std::string& name);

// Deterministic multi-texture base image (value-noise octaves, ramps,
// random rectangles and ellipses), values in [0,1].
Tensor texture_image(int64_t width, int64_t height, uint64_t seed, Dtype dt = Dtype::F32);

// Frame t of the sequence per the spec'd pattern laws:
//   shift: frame t = base rolled by round(x*t) pixels (toroidal)
//   blur:  frame t = Gaussian blur of base with sigma = x*t
//   fade:  frame t = (1-a)*A + a*B with a = t/(num_frames-1)
std::vector<Tensor> synth_generate(const SyntheticSpec& spec, uint64_t seed);

// Toroidal horizontal roll (helper; exposed for tests).
Tensor roll_frame(const Tensor& x, int64_t shift_px);
// Separable Gaussian blur with wrap-around boundaries; sigma <= 0 is identity.
Tensor gaussian_blur(const Tensor& x, double sigma);

} // namespace hvc
