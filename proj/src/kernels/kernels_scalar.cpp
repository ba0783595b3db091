// Reference backend: straight loops, no intrinsics. This is the semantics
// every SIMD variant is tested against.

#include "kernels_internal.hpp"

#include <algorithm>
#include <cstring>

namespace dan::kernels::detail {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_sq_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void givens_scalar(double* x, double* y, double c, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double xi = x[i], yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

void microkernel_scalar(std::size_t kc, const double* a, const double* b, double* tile) {
    double acc[MR * NR];
    std::memset(acc, 0, sizeof(acc));
    for (std::size_t k = 0; k < kc; ++k) {
        const double* ak = a + k * MR;
        const double* bk = b + k * NR;
        for (std::size_t i = 0; i < MR; ++i) {
            const double ai = ak[i];
            for (std::size_t j = 0; j < NR; ++j) acc[i * NR + j] += ai * bk[j];
        }
    }
    std::memcpy(tile, acc, sizeof(acc));
}

}  // namespace

const KernelTable scalar_table = {
    dot_scalar, axpy_scalar, scale_scalar, sum_sq_scalar,
    relu_scalar, givens_scalar, microkernel_scalar,
};

}  // namespace dan::kernels::detail
