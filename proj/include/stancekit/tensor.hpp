#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "stancekit/error.hpp"

namespace stancekit {

#ifdef STANCEKIT_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

/// Dense row-major tensor. Rank 1 and 2 are what the pipeline uses; the shape
/// is kept generic so parameter archives can round-trip anything.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, Real fill = Real(0))
        : shape_(std::move(shape)),
          data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                [](std::size_t a, std::size_t b) { return a * b; }),
                fill) {}

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor scalar(Real v) {
        Tensor t({1});
        t.data_[0] = v;
        return t;
    }

    static Tensor of(std::initializer_list<Real> values) {
        Tensor t({values.size()});
        std::size_t i = 0;
        for (Real v : values) t.data_[i++] = v;
        return t;
    }

    static Tensor matrix_of(std::size_t rows, std::size_t cols, std::initializer_list<Real> values) {
        if (values.size() != rows * cols) fail("numerics", "matrix_of: value count does not match shape");
        Tensor t({rows, cols});
        std::size_t i = 0;
        for (Real v : values) t.data_[i++] = v;
        return t;
    }

    std::size_t rank() const noexcept { return shape_.size(); }
    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? 1 : 0); }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }

    Real& operator[](std::size_t i) {
        assert(i < data_.size());
        return data_[i];
    }
    Real operator[](std::size_t i) const {
        assert(i < data_.size());
        return data_[i];
    }

    Real& operator()(std::size_t r, std::size_t c) {
        assert(rank() == 2 && r < shape_[0] && c < shape_[1]);
        return data_[r * shape_[1] + c];
    }
    Real operator()(std::size_t r, std::size_t c) const {
        assert(rank() == 2 && r < shape_[0] && c < shape_[1]);
        return data_[r * shape_[1] + c];
    }

    std::span<Real> data() noexcept { return data_; }
    std::span<const Real> data() const noexcept { return data_; }

    std::span<Real> row(std::size_t r) {
        assert(rank() == 2 && r < shape_[0]);
        return std::span<Real>(data_.data() + r * shape_[1], shape_[1]);
    }
    std::span<const Real> row(std::size_t r) const {
        assert(rank() == 2 && r < shape_[0]);
        return std::span<const Real>(data_.data() + r * shape_[1], shape_[1]);
    }

    void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (Real v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<Real> data_;
};

#ifndef NDEBUG
inline void debug_check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) fail("numerics", std::string("non-finite value produced by ") + where);
}
#else
inline void debug_check_finite(const Tensor&, const char*) {}
#endif

} // namespace stancekit
