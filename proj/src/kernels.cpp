#include "uniembed/kernels.hpp"

namespace uniembed {

double sqdist(const double* x, const double* y, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_shape(a.cols == b.rows, "matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ar[k];
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require_shape(a.cols == b.cols, "matmul_nt: inner dimensions differ");
    Matrix c(a.rows, b.rows);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require_shape(a.rows == b.rows, "matmul_tn: inner dimensions differ");
    Matrix c(a.cols, b.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.cols; ++i) {
        double* cr = c.row(i);
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
            cr[j] = s;
        }
    }
    return c;
}

Matrix pairwise_sqdist(const Matrix& x, const Matrix& y) {
    require_shape(x.cols == y.cols, "pairwise_sqdist: dimensions differ");
    Matrix d(x.rows, y.rows);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.rows; ++i) {
        const double* xr = x.row(i);
        double* dr = d.row(i);
        for (int j = 0; j < y.rows; ++j) dr[j] = sqdist(xr, y.row(j), x.cols);
    }
    return d;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_shape(a.cols == b.rows, "matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ar[k];
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require_shape(a.cols == b.cols, "matmul_nt: inner dimensions differ");
    Matrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require_shape(a.rows == b.rows, "matmul_tn: inner dimensions differ");
    Matrix c(a.cols, b.cols);
    for (int i = 0; i < a.cols; ++i) {
        double* cr = c.row(i);
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
            cr[j] = s;
        }
    }
    return c;
}

Matrix pairwise_sqdist(const Matrix& x, const Matrix& y) {
    require_shape(x.cols == y.cols, "pairwise_sqdist: dimensions differ");
    Matrix d(x.rows, y.rows);
    for (int i = 0; i < x.rows; ++i) {
        const double* xr = x.row(i);
        double* dr = d.row(i);
        for (int j = 0; j < y.rows; ++j) dr[j] = sqdist(xr, y.row(j), x.cols);
    }
    return d;
}

}  // namespace serial
}  // namespace uniembed
