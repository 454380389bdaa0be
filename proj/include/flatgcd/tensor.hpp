#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "flatgcd/errors.hpp"

namespace flatgcd {

// Dense row-major tensor of 64-bit floats. Rank is 1 or 2 in practice
// (vectors, matrices, and {1} scalars); the shape is kept generic so
// reductions can stay uniform.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::initializer_list<size_t> shape) : shape_(shape) { data_.assign(numel_of(shape_), 0.0); }
    explicit Tensor(std::vector<size_t> shape) : shape_(std::move(shape)) { data_.assign(numel_of(shape_), 0.0); }
    Tensor(std::vector<size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_)) throw DimError("Tensor: shape does not match value count");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(size_t r, size_t c) { return Tensor({r, c}); }
    static Tensor full(size_t r, size_t c, double v) {
        Tensor t({r, c});
        for (auto& x : t.data_) x = v;
        return t;
    }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t numel() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    // 2-D accessors; a rank-1 tensor behaves as a single row.
    size_t rows() const { return shape_.size() >= 2 ? shape_[0] : (shape_.empty() ? 0 : 1); }
    size_t cols() const {
        if (shape_.size() >= 2) return shape_[1];
        return shape_.empty() ? 0 : shape_[0];
    }

    double& at(size_t i, size_t j) { return data_[i * cols() + j]; }
    double at(size_t i, size_t j) const { return data_[i * cols() + j]; }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    double item() const {
        if (!is_scalar()) throw ContractError("Tensor::item: tensor is not scalar");
        return data_[0];
    }

private:
    static size_t numel_of(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::vector<size_t> shape_;
    std::vector<double> data_;
};

// Global l2 norm over a set of tensors (concatenated-vector view).
double global_norm(const std::vector<Tensor>& ts);

} // namespace flatgcd
