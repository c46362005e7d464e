#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace specmix {

/// Dense row-major tensor of 64-bit reals.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s);

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    // [batch, length, channels] accessors
    double& at3(int64_t b, int64_t t, int64_t c) {
        return data[static_cast<size_t>((b * shape[1] + t) * shape[2] + c)];
    }
    double at3(int64_t b, int64_t t, int64_t c) const {
        return data[static_cast<size_t>((b * shape[1] + t) * shape[2] + c)];
    }
    double& at2(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    double at2(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

std::string shape_str(const std::vector<int64_t>& shape);

} // namespace specmix
