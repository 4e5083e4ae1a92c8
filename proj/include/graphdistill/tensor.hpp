#ifndef GRAPHDISTILL_TENSOR_HPP
#define GRAPHDISTILL_TENSOR_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

namespace gd::nn {

/// Dense row-major tensor of 64-bit reals.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), 0.0) {}

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }

    std::size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

} // namespace gd::nn

#endif
