#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace hypercloud {

// Row-major dense tensor of doubles. Layouts used by the kernels:
//   1D activations: {L, C}
//   2D activations: {H, W, C}
//   conv1d weights: {k, Cin, Cout}, conv2d weights: {k, k, Cin, Cout}
//   dense weights:  {F, K}
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)), data(count(shape), 0.0) {}
    Tensor(std::initializer_list<size_t> s) : Tensor(std::vector<size_t>(s)) {}

    static size_t count(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t e : shape) n *= e;
        return shape.empty() ? 0 : n;
    }

    size_t size() const { return data.size(); }
    size_t rank() const { return shape.size(); }
    size_t extent(size_t axis) const { return shape[axis]; }

    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

}  // namespace hypercloud
