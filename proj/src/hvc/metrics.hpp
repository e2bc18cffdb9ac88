#pragma once

#include "hvc/tensor.hpp"

namespace hvc {

// Mean squared error over all elements.
double mse_value(const Tensor& a, const Tensor& b);

// 10*log10(1 / MSE) in dB for frames with values in [0,1]. When quantize is
// set (the default and the reported metric), both frames are rounded to
// 8-bit first. Identical frames cap at 99 dB.
double psnr(const Tensor& a, const Tensor& b, bool quantize = true);

constexpr double kPsnrCap = 99.0;

} // namespace hvc
