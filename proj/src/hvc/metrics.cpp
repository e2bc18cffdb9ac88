#include "hvc/metrics.hpp"

#include "hvc/detmath.hpp"
#include "hvc/error.hpp"

namespace hvc {

double mse_value(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), ErrorKind::Usage,
          "mse: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = a.at(i) - b.at(i);
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

namespace {

double to_q8(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return detmath::round_half_away(v * 255.0) / 255.0;
}

} // namespace

double psnr(const Tensor& a, const Tensor& b, bool quantize) {
    check(a.shape() == b.shape(), ErrorKind::Usage,
          "psnr: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double x = a.at(i), y = b.at(i);
        if (quantize) {
            x = to_q8(x);
            y = to_q8(y);
        }
        double d = x - y;
        s += d * d;
    }
    double m = s / static_cast<double>(a.numel());
    if (m <= 0.0) return kPsnrCap;
    double db = -10.0 * detmath::dm_log(m) / detmath::dm_log(10.0);
    return db > kPsnrCap ? kPsnrCap : db;
}

} // namespace hvc
