// Times the OpenMP kernels against their serial references and verifies that
// both produce bitwise-identical results. Usage: bench_kernels [threads] [size].
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "uniembed/kernels.hpp"
#include "uniembed/rng.hpp"

namespace {

using uniembed::Matrix;

Matrix random_matrix(int rows, int cols, uniembed::Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.a) x = rng.uniform(-1.0, 1.0);
    return m;
}

template <typename F>
double time_ms(F&& f, Matrix& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out = f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) && a.a == b.a;
}

}  // namespace

int main(int argc, char** argv) {
    const int threads = argc > 1 ? std::atoi(argv[1]) : 4;
    const int n = argc > 2 ? std::atoi(argv[2]) : 512;
    if (threads < 1 || n < 1) {
        std::fprintf(stderr, "usage: bench_kernels [threads >= 1] [size >= 1]\n");
        return 2;
    }

    uniembed::Rng rng(7);
    const Matrix a = random_matrix(n, n, rng);
    const Matrix b = random_matrix(n, n, rng);

    struct Case {
        const char* name;
        Matrix (*parallel)(const Matrix&, const Matrix&);
        Matrix (*serial)(const Matrix&, const Matrix&);
    };
    const Case cases[] = {
        {"matmul", uniembed::matmul, uniembed::serial::matmul},
        {"matmul_nt", uniembed::matmul_nt, uniembed::serial::matmul_nt},
        {"matmul_tn", uniembed::matmul_tn, uniembed::serial::matmul_tn},
        {"pairwise_sqdist", uniembed::pairwise_sqdist, uniembed::serial::pairwise_sqdist},
    };

    std::printf("%d x %d matrices, %d threads\n", n, n, threads);
    std::printf("%-16s %12s %14s %9s %6s\n", "kernel", "serial ms", "parallel ms", "speedup",
                "equal");
    bool all_equal = true;
    for (const Case& c : cases) {
        Matrix serial_result, parallel_result;
        omp_set_num_threads(1);
        const double ts = time_ms([&] { return c.serial(a, b); }, serial_result);
        omp_set_num_threads(threads);
        const double tp = time_ms([&] { return c.parallel(a, b); }, parallel_result);
        const bool equal = bitwise_equal(serial_result, parallel_result);
        all_equal = all_equal && equal;
        std::printf("%-16s %12.2f %14.2f %8.2fx %6s\n", c.name, ts, tp, ts / tp,
                    equal ? "yes" : "NO");
    }
    if (!all_equal) {
        std::fprintf(stderr, "parallel kernels diverged from the serial reference\n");
        return 1;
    }
    return 0;
}
