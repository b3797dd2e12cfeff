#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/rng.hpp"

namespace c2f {

/// Up to four extents. Rank-4 tensors are feature maps in NCHW order,
/// rank-2 tensors are matrices (rows, cols).
struct Shape {
    std::array<std::int64_t, 4> d{0, 0, 0, 0};
    int nd = 0;

    Shape() = default;
    Shape(std::initializer_list<std::int64_t> dims) {
        if (dims.size() > 4) throw DimensionError("Shape: rank above 4");
        for (auto v : dims) {
            if (v <= 0) throw DimensionError("Shape: non-positive extent");
            d[nd++] = v;
        }
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int i = 0; i < nd; ++i) n *= d[i];
        return nd == 0 ? 0 : n;
    }

    std::int64_t operator[](int i) const { return d[i]; }
    bool operator==(const Shape& o) const { return nd == o.nd && d == o.d; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::string s = "[";
        for (int i = 0; i < nd; ++i) {
            if (i) s += ",";
            s += std::to_string(d[i]);
        }
        return s + "]";
    }
};

namespace detail {
template <typename T>
struct TensorStorage {
    std::vector<T> value;
    std::vector<T> grad;  // empty until first use; same length as value after
    bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major tensor. Copies are views of the same storage, so a tensor
/// captured into a tape closure sees gradient buffers allocated later.
/// Values are treated as immutable while an op executes; parameters are only
/// mutated between passes (optimizer step, checkpoint load).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.shape_ = shape;
        t.st_ = std::make_shared<detail::TensorStorage<T>>();
        t.st_->value.assign(static_cast<std::size_t>(shape.numel()), T(0));
        return t;
    }

    static Tensor full(Shape shape, T v) {
        Tensor t = zeros(shape);
        for (auto& e : t.st_->value) e = v;
        return t;
    }

    static Tensor ones(Shape shape) { return full(shape, T(1)); }

    static Tensor from_data(Shape shape, std::vector<T> data) {
        if (static_cast<std::int64_t>(data.size()) != shape.numel())
            throw DimensionError("Tensor::from_data: size does not match shape " + shape.str());
        Tensor t;
        t.shape_ = shape;
        t.st_ = std::make_shared<detail::TensorStorage<T>>();
        t.st_->value = std::move(data);
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0) {
        Tensor t = zeros(shape);
        for (auto& e : t.st_->value) e = static_cast<T>(stddev * rng.normal());
        return t;
    }

    static Tensor truncated_normal(Shape shape, Rng& rng, double stddev) {
        Tensor t = zeros(shape);
        for (auto& e : t.st_->value) e = static_cast<T>(rng.truncated_normal(stddev));
        return t;
    }

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return shape_; }
    std::int64_t numel() const { return shape_.numel(); }

    T* data() { return st_->value.data(); }
    const T* data() const { return st_->value.data(); }
    std::vector<T>& values() { return st_->value; }
    const std::vector<T>& values() const { return st_->value; }

    bool requires_grad() const { return st_ && st_->requires_grad; }
    void set_requires_grad(bool v) { st_->requires_grad = v; }

    /// Allocates the gradient buffer (zero-filled) on first call.
    T* ensure_grad() {
        if (st_->grad.empty()) st_->grad.assign(st_->value.size(), T(0));
        return st_->grad.data();
    }

    const T* grad_ptr() const { return st_->grad.empty() ? nullptr : st_->grad.data(); }

    /// Resets accumulated gradients to zero (keeps the buffer).
    void zero_grad() {
        if (st_) {
            for (auto& g : st_->grad) g = T(0);
        }
    }

    /// View with a different shape over the same storage (numel must match).
    /// Gradients are shared too, so no tape node is needed for reshapes.
    Tensor reshaped(Shape shape) const {
        if (shape.numel() != shape_.numel())
            throw DimensionError("reshape: numel mismatch " + shape_.str() + " -> " + shape.str());
        Tensor t = *this;
        t.shape_ = shape;
        return t;
    }

    /// Deep copy with fresh storage (gradient buffer not copied).
    Tensor clone() const {
        Tensor t = zeros(shape_);
        t.st_->value = st_->value;
        t.st_->requires_grad = st_->requires_grad;
        return t;
    }

    bool same_storage(const Tensor& o) const { return st_ == o.st_; }

    T item() const {
        if (numel() != 1) throw ContractError("item: tensor is not scalar, shape " + shape_.str());
        return st_->value[0];
    }

    bool all_finite() const {
        for (const T v : st_->value) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

private:
    Shape shape_;
    std::shared_ptr<detail::TensorStorage<T>> st_;
};

}  // namespace c2f
