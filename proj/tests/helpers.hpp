#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "specmix/tensor.hpp"

namespace testutil {

inline specmix::Tensor row3(std::vector<double> v) {
    specmix::Tensor t = specmix::Tensor::zeros({1, static_cast<int64_t>(v.size()), 1});
    t.data = std::move(v);
    return t;
}

inline specmix::Tensor kernel3(std::vector<double> w) {
    specmix::Tensor t = specmix::Tensor::zeros({static_cast<int64_t>(w.size()), 1, 1});
    t.data = std::move(w);
    return t;
}

inline specmix::Tensor filled(std::vector<int64_t> shape, std::vector<double> v) {
    specmix::Tensor t = specmix::Tensor::zeros(std::move(shape));
    t.data = std::move(v);
    return t;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Central finite difference of f() with respect to x.
template <typename F>
double fd_central(F&& f, double& x, double step) {
    const double orig = x;
    x = orig + step;
    const double up = f();
    x = orig - step;
    const double dn = f();
    x = orig;
    return (up - dn) / (2.0 * step);
}

} // namespace testutil
