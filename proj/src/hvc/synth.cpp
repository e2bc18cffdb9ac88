#include "hvc/synth.hpp"

#include <algorithm>
#include <cmath>

#include "hvc/detmath.hpp"
#include "hvc/error.hpp"
#include "hvc/rng.hpp"

namespace hvc {

SynthPattern synth_pattern_from_name(const std::string& name) {
    if (name == "still") return SynthPattern::Still;
    if (name == "shift") return SynthPattern::Shift;
    if (name == "blur") return SynthPattern::Blur;
    if (name == "fade") return SynthPattern::Fade;
    fail(ErrorKind::Usage, "unknown pattern '" + name + "' (still|shift|blur|fade)");
}

namespace {

// Bilinear value noise at one octave; grid of random values, wrap-around.
void add_value_noise(std::vector<double>& img, int64_t w, int64_t h, int64_t cells, double amp,
                     Rng& rng) {
    int64_t gw = std::max<int64_t>(2, cells);
    std::vector<double> grid(static_cast<size_t>(gw * gw));
    for (auto& v : grid) v = rng.uniform01();
    for (int64_t i = 0; i < h; ++i) {
        double gy = static_cast<double>(i) * gw / static_cast<double>(h);
        int64_t y0 = static_cast<int64_t>(gy);
        double fy = gy - y0;
        int64_t y1 = (y0 + 1) % gw;
        for (int64_t j = 0; j < w; ++j) {
            double gx = static_cast<double>(j) * gw / static_cast<double>(w);
            int64_t x0 = static_cast<int64_t>(gx);
            double fx = gx - x0;
            int64_t x1 = (x0 + 1) % gw;
            double v00 = grid[static_cast<size_t>(y0 * gw + x0)];
            double v01 = grid[static_cast<size_t>(y0 * gw + x1)];
            double v10 = grid[static_cast<size_t>(y1 * gw + x0)];
            double v11 = grid[static_cast<size_t>(y1 * gw + x1)];
            double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
            img[static_cast<size_t>(i * w + j)] += amp * (v - 0.5);
        }
    }
}

} // namespace

Tensor texture_image(int64_t width, int64_t height, uint64_t seed, Dtype dt) {
    Rng rng(derive_seed(seed, 0x7e37));
    std::vector<std::vector<double>> ch(3, std::vector<double>(static_cast<size_t>(width * height), 0.5));
    // shared luma-like structure plus per-channel tint
    std::vector<double> luma(static_cast<size_t>(width * height), 0.0);
    add_value_noise(luma, width, height, 3, 0.9, rng);
    add_value_noise(luma, width, height, 6, 0.45, rng);
    add_value_noise(luma, width, height, 12, 0.22, rng);
    for (int c = 0; c < 3; ++c) {
        double tint = 0.25 * (rng.uniform01() - 0.5);
        for (size_t i = 0; i < luma.size(); ++i) ch[static_cast<size_t>(c)][i] += luma[i] + tint;
        add_value_noise(ch[static_cast<size_t>(c)], width, height, 5, 0.15, rng);
    }
    // a few hard-edged shapes so coarse scales carry structure
    int64_t num_shapes = 2 + static_cast<int64_t>(rng.below(4));
    for (int64_t s = 0; s < num_shapes; ++s) {
        bool ellipse = rng.uniform01() < 0.5;
        int64_t cx = static_cast<int64_t>(rng.below(static_cast<uint64_t>(width)));
        int64_t cy = static_cast<int64_t>(rng.below(static_cast<uint64_t>(height)));
        int64_t rx = 2 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(width / 3 + 1)));
        int64_t ry = 2 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(height / 3 + 1)));
        double val[3] = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
        double alpha = 0.35 + 0.5 * rng.uniform01();
        for (int64_t i = 0; i < height; ++i) {
            for (int64_t j = 0; j < width; ++j) {
                double dx = static_cast<double>(j - cx) / rx;
                double dy = static_cast<double>(i - cy) / ry;
                bool inside = ellipse ? (dx * dx + dy * dy <= 1.0)
                                      : (std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0);
                if (!inside) continue;
                for (int c = 0; c < 3; ++c) {
                    double& px = ch[static_cast<size_t>(c)][static_cast<size_t>(i * width + j)];
                    px = (1.0 - alpha) * px + alpha * val[c];
                }
            }
        }
    }
    Tensor t = Tensor::zeros({1, 3, height, width}, dt);
    for (int c = 0; c < 3; ++c) {
        for (int64_t i = 0; i < height * width; ++i) {
            double v = ch[static_cast<size_t>(c)][static_cast<size_t>(i)];
            t.set(c * height * width + i, std::clamp(v, 0.0, 1.0));
        }
    }
    return t;
}

Tensor roll_frame(const Tensor& x, int64_t shift_px) {
    int64_t h = x.dim(2), w = x.dim(3);
    int64_t s = ((shift_px % w) + w) % w;
    if (s == 0) return x.clone();
    Tensor y = Tensor::zeros(x.shape(), x.dtype());
    for (int64_t n = 0; n < x.dim(0); ++n) {
        for (int64_t c = 0; c < x.dim(1); ++c) {
            for (int64_t i = 0; i < h; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    int64_t sj = (j - s + w) % w;
                    y.set(((n * x.dim(1) + c) * h + i) * w + j,
                          x.at(((n * x.dim(1) + c) * h + i) * w + sj));
                }
            }
        }
    }
    return y;
}

Tensor gaussian_blur(const Tensor& x, double sigma) {
    if (sigma <= 0.0) return x.clone();
    int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int64_t i = -radius; i <= radius; ++i) {
        double v = detmath::dm_exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    int64_t h = x.dim(2), w = x.dim(3);
    Tensor tmp = Tensor::zeros(x.shape(), x.dtype());
    Tensor y = Tensor::zeros(x.shape(), x.dtype());
    for (int64_t n = 0; n < x.dim(0); ++n) {
        for (int64_t c = 0; c < x.dim(1); ++c) {
            int64_t base = (n * x.dim(1) + c) * h * w;
            for (int64_t i = 0; i < h; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    double acc = 0.0;
                    for (int64_t o = -radius; o <= radius; ++o) {
                        int64_t jj = ((j + o) % w + w) % w;
                        acc += k[static_cast<size_t>(o + radius)] * x.at(base + i * w + jj);
                    }
                    tmp.set(base + i * w + j, acc);
                }
            }
            for (int64_t i = 0; i < h; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    double acc = 0.0;
                    for (int64_t o = -radius; o <= radius; ++o) {
                        int64_t ii = ((i + o) % h + h) % h;
                        acc += k[static_cast<size_t>(o + radius)] * tmp.at(base + ii * w + j);
                    }
                    y.set(base + i * w + j, acc);
                }
            }
        }
    }
    return y;
}

std::vector<Tensor> synth_generate(const SyntheticSpec& spec, uint64_t seed) {
    check(spec.num_frames >= 1 && spec.width >= 4 && spec.height >= 4, ErrorKind::Usage,
          "bad synthetic spec");
    Tensor base = texture_image(spec.width, spec.height, seed);
    std::vector<Tensor> frames;
    frames.reserve(static_cast<size_t>(spec.num_frames));
    switch (spec.pattern) {
    case SynthPattern::Still:
        for (int64_t t = 0; t < spec.num_frames; ++t) frames.push_back(base.clone());
        break;
    case SynthPattern::Shift:
        for (int64_t t = 0; t < spec.num_frames; ++t) {
            int64_t px = static_cast<int64_t>(detmath::round_half_away(spec.x * static_cast<double>(t)));
            frames.push_back(roll_frame(base, px));
        }
        break;
    case SynthPattern::Blur:
        for (int64_t t = 0; t < spec.num_frames; ++t) {
            frames.push_back(gaussian_blur(base, spec.x * static_cast<double>(t)));
        }
        break;
    case SynthPattern::Fade: {
        Tensor second = texture_image(spec.width, spec.height, derive_seed(seed, 0xfade), base.dtype());
        for (int64_t t = 0; t < spec.num_frames; ++t) {
            double a = spec.num_frames == 1
                           ? 0.0
                           : static_cast<double>(t) / static_cast<double>(spec.num_frames - 1);
            Tensor f = Tensor::zeros(base.shape(), base.dtype());
            for (int64_t i = 0; i < f.numel(); ++i) {
                f.set(i, (1.0 - a) * base.at(i) + a * second.at(i));
            }
            frames.push_back(std::move(f));
        }
        break;
    }
    }
    return frames;
}

} // namespace hvc
