#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "uniembed/errors.hpp"

namespace uniembed {

// Dense row-major matrix of doubles. Small enough on purpose: everything in
// this project fits comfortably in memory.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline bool all_finite(const Matrix& m) {
    for (double x : m.a)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_shape(bool ok, const char* what) {
    if (!ok) throw shape_error(what);
}

}  // namespace uniembed
