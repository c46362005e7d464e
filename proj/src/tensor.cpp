#include "specmix/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace specmix {

Tensor::Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw std::invalid_argument("Tensor: dimensions must be non-negative, got " + specmix::shape_str(shape));
        n *= d;
    }
    data.assign(static_cast<size_t>(n), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const { return specmix::shape_str(shape); }

std::string shape_str(const std::vector<int64_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

} // namespace specmix
