#pragma once

#include "uniembed/matrix.hpp"

namespace uniembed {

// Data-parallel linear-algebra kernels. The OpenMP versions split work over
// output rows; every output element is produced by exactly one thread with
// the same accumulation order as the serial code, so results are bitwise
// identical for any thread count.

// c = a * b, (m x k)(k x n)
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a * b^T, (m x k)(n x k)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// c = a^T * b, (k x m)(k x n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// d(i,j) = squared Euclidean distance between row i of x and row j of y
Matrix pairwise_sqdist(const Matrix& x, const Matrix& y);

// Squared Euclidean distance between two rows of equal length.
double sqdist(const double* x, const double* y, int dim);

namespace serial {
// Plain single-threaded reference implementations, kept as the oracle for
// the OpenMP kernels and for the kernel benchmark.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix pairwise_sqdist(const Matrix& x, const Matrix& y);
}  // namespace serial

}  // namespace uniembed
