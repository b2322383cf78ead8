#include "latentlab/tensor.hpp"

#include <cmath>
#include <cstring>

#include "latentlab/common.hpp"

namespace latentlab {

size_t shape_count(const std::vector<int>& shape) {
    size_t n = 1;
    for (int e : shape) {
        require(e >= 0, "Tensor: negative extent");
        n *= static_cast<size_t>(e);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> data)
    : shape(std::move(s)), v(std::move(data)) {
    require(v.size() == shape_count(shape), "Tensor: value count must equal product of extents");
}

Tensor Tensor::zeros(std::vector<int> s) {
    Tensor t;
    size_t n = shape_count(s);
    t.shape = std::move(s);
    t.v.assign(n, 0.0);
    return t;
}

Tensor Tensor::row(std::vector<double> data) {
    Tensor t;
    t.shape = {1, static_cast<int>(data.size())};
    t.v = std::move(data);
    return t;
}

void Tensor::fill(double x) {
    for (auto& e : v) e = x;
}

bool Tensor::all_finite() const {
    for (double e : v) {
        if (!std::isfinite(e)) return false;
    }
    return true;
}

bool Tensor::bit_equal(const Tensor& o) const {
    if (shape != o.shape) return false;
    return std::memcmp(v.data(), o.v.data(), v.size() * sizeof(double)) == 0;
}

uint64_t Tensor::content_hash() const {
    uint64_t h = fnv1a64(shape.data(), shape.size() * sizeof(int));
    return fnv1a64(v.data(), v.size() * sizeof(double), h);
}

}  // namespace latentlab
