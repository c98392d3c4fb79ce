// Dense row-major tensor. Parameters are Tensors with requires_grad set; their
// grad buffer accumulates across backward passes until the optimizer consumes it.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/rng.hpp"

namespace normshare {

inline size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

template <class Real>
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> values;
    std::vector<Real> grad;  // same length as values iff requires_grad
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> sh, bool req_grad = false) : shape(std::move(sh)), requires_grad(req_grad) {
        for (int d : shape)
            if (d <= 0) throw DimensionError(cat("tensor dimension must be positive, got ", shape_str(shape)));
        values.assign(numel_of(shape), Real(0));
        if (requires_grad) grad.assign(values.size(), Real(0));
    }

    size_t numel() const { return values.size(); }
    int rows() const { return shape.size() == 2 ? shape[0] : 1; }
    int cols() const { return shape.empty() ? 1 : shape.back(); }

    void zero_grad() { grad.assign(values.size(), Real(0)); }

    void fill_uniform(Pcg32& rng, double lo, double hi) {
        for (Real& v : values) v = static_cast<Real>(rng.uniform(lo, hi));
    }
};

}  // namespace normshare
