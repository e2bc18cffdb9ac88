#pragma once

// Dense N-d array in NCHW layout with a runtime element type. Values are
// treated as immutable once an op has produced them; mutation is reserved
// for freshly allocated tensors (fill/initialization) and optimizer state.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hvc/error.hpp"

namespace hvc {

enum class Dtype : uint8_t { F32, F64 };

inline const char* dtype_name(Dtype dt) { return dt == Dtype::F32 ? "f32" : "f64"; }

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, Dtype dt);
    static Tensor full(Shape shape, double value, Dtype dt);
    static Tensor from_values(Shape shape, const std::vector<double>& v, Dtype dt);
    static Tensor scalar(double value, Dtype dt);

    bool defined() const { return storage_ != nullptr; }
    const Shape& shape() const { return shape_; }
    int64_t dim(size_t i) const { return shape_.at(i); }
    size_t rank() const { return shape_.size(); }
    int64_t numel() const { return numel_; }
    Dtype dtype() const { return dtype_; }

    template <class S> std::span<S> data();
    template <class S> std::span<const S> data() const;

    // Generic element access; slow, for tests/IO/glue only.
    double at(int64_t i) const;
    void set(int64_t i, double v);

    Tensor clone() const;
    Tensor to(Dtype dt) const;
    Tensor reshaped(Shape s) const; // same storage, new shape

    void fill(double v);
    bool all_finite() const;
    double abs_max() const;

  private:
    Shape shape_;
    int64_t numel_ = 0;
    Dtype dtype_ = Dtype::F32;
    std::shared_ptr<void> storage_;
};

// Invokes f with a value whose type carries the scalar type: f(float{}) or
// f(double{}).
template <class F>
decltype(auto) dtype_dispatch(Dtype dt, F&& f) {
    if (dt == Dtype::F64) return f(double{});
    return f(float{});
}

template <class S> std::span<S> Tensor::data() {
    check(storage_ != nullptr, ErrorKind::Internal, "access to undefined tensor");
    constexpr Dtype want = sizeof(S) == 4 ? Dtype::F32 : Dtype::F64;
    check(want == dtype_, ErrorKind::Internal, "tensor dtype mismatch");
    auto* vec = static_cast<std::vector<S>*>(storage_.get());
    return std::span<S>(vec->data(), vec->size());
}

template <class S> std::span<const S> Tensor::data() const {
    check(storage_ != nullptr, ErrorKind::Internal, "access to undefined tensor");
    constexpr Dtype want = sizeof(S) == 4 ? Dtype::F32 : Dtype::F64;
    check(want == dtype_, ErrorKind::Internal, "tensor dtype mismatch");
    const auto* vec = static_cast<const std::vector<S>*>(storage_.get());
    return std::span<const S>(vec->data(), vec->size());
}

} // namespace hvc
