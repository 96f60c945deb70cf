#include <doctest.h>
#include <omp.h>

#include <cstring>

#include "uniembed/kernels.hpp"
#include "uniembed/rng.hpp"

using namespace uniembed;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.a) x = rng.uniform(-2.0, 2.0);
    return m;
}

// Straightforward ijk loops, deliberately a different accumulation order
// than the library's ikj kernel.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

void check_close(const Matrix& got, const Matrix& want, double tol = 1e-12) {
    REQUIRE(got.same_shape(want));
    for (std::size_t i = 0; i < got.a.size(); ++i) {
        const double scale = std::max(1.0, std::abs(want.a[i]));
        CHECK(std::abs(got.a[i] - want.a[i]) <= tol * scale);
    }
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) &&
           std::memcmp(a.a.data(), b.a.data(), a.a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("sqdist basics") {
    const double x[2] = {0.0, 0.0};
    const double y[2] = {3.0, 4.0};
    CHECK(sqdist(x, y, 2) == 25.0);
    CHECK(sqdist(x, x, 2) == 0.0);
}

TEST_CASE("matmul matches a naive triple loop") {
    Rng rng(7);
    const Matrix a = random_matrix(13, 9, rng);
    const Matrix b = random_matrix(9, 11, rng);
    check_close(matmul(a, b), naive_matmul(a, b));
}

TEST_CASE("matmul by identity returns the input exactly") {
    Rng rng(8);
    const Matrix a = random_matrix(6, 5, rng);
    Matrix eye(5, 5);
    for (int i = 0; i < 5; ++i) eye(i, i) = 1.0;
    CHECK(bitwise_equal(matmul(a, eye), a));
}

TEST_CASE("matmul_nt and matmul_tn match explicit transposes") {
    Rng rng(9);
    const Matrix a = random_matrix(10, 6, rng);
    const Matrix b = random_matrix(12, 6, rng);
    check_close(matmul_nt(a, b), naive_matmul(a, transpose(b)));
    const Matrix c = random_matrix(6, 10, rng);
    const Matrix d = random_matrix(6, 7, rng);
    check_close(matmul_tn(c, d), naive_matmul(transpose(c), d));
}

TEST_CASE("pairwise_sqdist matches per-pair sums, zero diagonal, symmetric") {
    Rng rng(10);
    const Matrix x = random_matrix(9, 4, rng);
    const Matrix y = random_matrix(7, 4, rng);
    const Matrix d = pairwise_sqdist(x, y);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < y.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double diff = x(i, k) - y(j, k);
                s += diff * diff;
            }
            CHECK(d(i, j) == doctest::Approx(s).epsilon(1e-14));
            CHECK(d(i, j) >= 0.0);
        }

    const Matrix dxx = pairwise_sqdist(x, x);
    for (int i = 0; i < x.rows; ++i) {
        CHECK(dxx(i, i) == 0.0);
        for (int j = 0; j < x.rows; ++j) CHECK(dxx(i, j) == dxx(j, i));
    }
}

TEST_CASE("openmp kernels are bitwise identical to the serial reference") {
    Rng rng(11);
    const int shapes[][3] = {{1, 1, 1}, {2, 3, 5}, {17, 9, 13}, {64, 32, 48}};
    for (const auto& s : shapes) {
        const Matrix a = random_matrix(s[0], s[1], rng);
        const Matrix b = random_matrix(s[1], s[2], rng);
        const Matrix bt = transpose(b);
        const Matrix at = transpose(a);
        const Matrix sm = serial::matmul(a, b);
        const Matrix snt = serial::matmul_nt(a, bt);
        const Matrix stn = serial::matmul_tn(at, b);
        const Matrix sd = serial::pairwise_sqdist(a, a);
        for (int threads = 1; threads <= 4; ++threads) {
            omp_set_num_threads(threads);
            CHECK(bitwise_equal(matmul(a, b), sm));
            CHECK(bitwise_equal(matmul_nt(a, bt), snt));
            CHECK(bitwise_equal(matmul_tn(at, b), stn));
            CHECK(bitwise_equal(pairwise_sqdist(a, a), sd));
        }
    }
    omp_set_num_threads(1);
}

TEST_CASE("kernels reject mismatched shapes") {
    const Matrix a(2, 3), b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), shape_error);
    CHECK_THROWS_AS(matmul_nt(a, Matrix(2, 4)), shape_error);
    CHECK_THROWS_AS(matmul_tn(a, Matrix(3, 2)), shape_error);
    CHECK_THROWS_AS(pairwise_sqdist(a, Matrix(2, 4)), shape_error);
}
