#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "skyfuse/errors.hpp"

namespace skyfuse {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

/// Dense row-major N-dimensional array. The single numeric carrier for the
/// whole project: feature matrices, model parameters, and activations all
/// live in one of these. Templated on the scalar so the same code runs in
/// float for training and in double for finite-difference verification.
template <typename S>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(shape_numel(shape_), S(0)) {
        check_extents();
    }

    Tensor(Shape shape, std::vector<S> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        check_extents();
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor full(Shape shape, S value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor scalar(S value) { return Tensor({1}, {value}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& values() { return data_; }
    const std::vector<S>& values() const { return data_; }

    S& operator[](std::size_t i) { return data_[i]; }
    const S& operator[](std::size_t i) const { return data_[i]; }

    S& operator()(std::size_t i, std::size_t j) {
        return data_[i * shape_[1] + j];
    }
    const S& operator()(std::size_t i, std::size_t j) const {
        return data_[i * shape_[1] + j];
    }
    S& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const S& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool on) { requires_grad_ = on; }

    bool has_grad() const { return !grad_.empty(); }
    std::vector<S>& grad() { return grad_; }
    const std::vector<S>& grad() const { return grad_; }

    /// Allocates (zero-filled) the gradient buffer if absent.
    void ensure_grad() {
        if (grad_.size() != data_.size()) grad_.assign(data_.size(), S(0));
    }
    void zero_grad() { std::fill(grad_.begin(), grad_.end(), S(0)); }

    bool all_finite() const {
        for (S v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename T>
    Tensor<T> cast() const {
        std::vector<T> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<T>(data_[i]);
        return Tensor<T>(shape_, std::move(out));
    }

private:
    void check_extents() const {
        for (std::size_t e : shape_)
            if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<S> data_;
    std::vector<S> grad_;
    bool requires_grad_ = false;
};

}  // namespace skyfuse
