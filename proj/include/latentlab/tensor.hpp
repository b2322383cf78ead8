#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace latentlab {

/// Dense n-dimensional array of doubles, row-major. Everything in the lab is
/// rank 1 or 2 in practice; rank-1 tensors behave as a single row.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> data);

    static Tensor zeros(std::vector<int> s);
    static Tensor row(std::vector<double> data);

    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const { return rank() <= 1 ? 1 : shape[0]; }
    int cols() const { return rank() == 0 ? 0 : (rank() == 1 ? shape[0] : shape[1]); }
    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }
    double* row_ptr(int r) { return v.data() + static_cast<size_t>(r) * cols(); }
    const double* row_ptr(int r) const { return v.data() + static_cast<size_t>(r) * cols(); }

    void fill(double x);
    bool all_finite() const;
    bool bit_equal(const Tensor& o) const;

    uint64_t content_hash() const;
};

size_t shape_count(const std::vector<int>& shape);

}  // namespace latentlab
