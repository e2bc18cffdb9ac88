#include "hvc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hvc {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        check(d >= 0, ErrorKind::Config, "negative dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

namespace {

std::shared_ptr<void> make_storage(Dtype dt, int64_t n, double init) {
    if (dt == Dtype::F64) {
        return std::shared_ptr<void>(new std::vector<double>(static_cast<size_t>(n), init),
                                     [](void* p) { delete static_cast<std::vector<double>*>(p); });
    }
    return std::shared_ptr<void>(
        new std::vector<float>(static_cast<size_t>(n), static_cast<float>(init)),
        [](void* p) { delete static_cast<std::vector<float>*>(p); });
}

} // namespace

Tensor Tensor::zeros(Shape shape, Dtype dt) { return full(std::move(shape), 0.0, dt); }

Tensor Tensor::full(Shape shape, double value, Dtype dt) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = shape_numel(t.shape_);
    t.dtype_ = dt;
    t.storage_ = make_storage(dt, t.numel_, value);
    return t;
}

Tensor Tensor::from_values(Shape shape, const std::vector<double>& v, Dtype dt) {
    Tensor t = zeros(std::move(shape), dt);
    check(static_cast<int64_t>(v.size()) == t.numel_, ErrorKind::Internal,
          "from_values: size mismatch");
    for (int64_t i = 0; i < t.numel_; ++i) t.set(i, v[static_cast<size_t>(i)]);
    return t;
}

Tensor Tensor::scalar(double value, Dtype dt) { return full({1}, value, dt); }

double Tensor::at(int64_t i) const {
    return dtype_dispatch(dtype_, [&](auto tag) -> double {
        using S = decltype(tag);
        return static_cast<double>(data<S>()[static_cast<size_t>(i)]);
    });
}

void Tensor::set(int64_t i, double v) {
    dtype_dispatch(dtype_, [&](auto tag) {
        using S = decltype(tag);
        data<S>()[static_cast<size_t>(i)] = static_cast<S>(v);
    });
}

Tensor Tensor::clone() const {
    Tensor t = *this;
    if (!storage_) return t;
    dtype_dispatch(dtype_, [&](auto tag) {
        using S = decltype(tag);
        const auto* src = static_cast<const std::vector<S>*>(storage_.get());
        t.storage_ = std::shared_ptr<void>(new std::vector<S>(*src), [](void* p) {
            delete static_cast<std::vector<S>*>(p);
        });
    });
    return t;
}

Tensor Tensor::to(Dtype dt) const {
    if (dt == dtype_) return clone();
    Tensor t = zeros(shape_, dt);
    for (int64_t i = 0; i < numel_; ++i) t.set(i, at(i));
    return t;
}

Tensor Tensor::reshaped(Shape s) const {
    check(shape_numel(s) == numel_, ErrorKind::Config,
          "reshape " + shape_str(shape_) + " -> " + shape_str(s) + " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(s);
    return t;
}

void Tensor::fill(double v) {
    dtype_dispatch(dtype_, [&](auto tag) {
        using S = decltype(tag);
        for (auto& x : data<S>()) x = static_cast<S>(v);
    });
}

bool Tensor::all_finite() const {
    return dtype_dispatch(dtype_, [&](auto tag) {
        using S = decltype(tag);
        for (S x : data<S>()) {
            if (!std::isfinite(static_cast<double>(x))) return false;
        }
        return true;
    });
}

double Tensor::abs_max() const {
    return dtype_dispatch(dtype_, [&](auto tag) {
        using S = decltype(tag);
        double m = 0.0;
        for (S x : data<S>()) {
            double a = std::fabs(static_cast<double>(x));
            if (a > m) m = a;
        }
        return m;
    });
}

} // namespace hvc
