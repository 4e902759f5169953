#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace fastturn::nn {

// Dense row-major 64-bit tensor. Rank is usually 1 or 2; shape [] is a scalar.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> vals) : shape(std::move(s)), v(std::move(vals)) {
        if (numel_of(shape) != static_cast<std::int64_t>(v.size()))
            throw std::invalid_argument("Tensor: shape/value size mismatch");
    }

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int> s) {
        Tensor t;
        t.shape = std::move(s);
        t.v.assign(static_cast<std::size_t>(numel_of(t.shape)), 0.0);
        return t;
    }

    static Tensor scalar(double x) { return Tensor({}, {x}); }

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    int rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? 1 : 1); }
    int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols() + c]; }

    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols(); }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

} // namespace fastturn::nn
