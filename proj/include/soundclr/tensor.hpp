#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace soundclr {

// Dense row-major tensor of doubles. Deliberately minimal: the network code
// below addresses raw data with explicit strides in its hot loops.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0);
    }
    Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), data(std::move(v)) {
        if (data.size() != numel_of(shape)) throw std::invalid_argument("Tensor: shape/value size mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t numel() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    std::size_t dim(std::size_t i) const { return shape.at(i); }

    // 2-D access
    double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Named parameter (or gradient) collection. std::map keeps iteration order
// deterministic, which the optimizer and checkpoint format rely on.
using ParamSet = std::map<std::string, Tensor>;
using GradSet = std::map<std::string, Tensor>;

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

} // namespace soundclr
