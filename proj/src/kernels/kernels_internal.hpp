#pragma once

#include <cstddef>

namespace dan::kernels::detail {

// Micro-tile shape shared by every backend's GEMM micro-kernel. 6x8 doubles:
// 12 ymm accumulators + 2 B loads + 1 A broadcast fits the 16 AVX2 registers.
inline constexpr std::size_t MR = 6;
inline constexpr std::size_t NR = 8;

// Cache blocking for the packed GEMM driver.
inline constexpr std::size_t KC = 384;
inline constexpr std::size_t MC = 72;
inline constexpr std::size_t NC = 1024;

// Computes tile = sum_k a[k*MR + i] * b[k*NR + j] for a packed A sliver and
// packed B sliver; `tile` is MR*NR row-major and is overwritten.
using MicroKernelFn = void (*)(std::size_t kc, const double* a, const double* b,
                               double* tile);

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    double (*sum_sq)(const double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*givens)(double*, double*, double, double, std::size_t);
    MicroKernelFn microkernel;
};

extern const KernelTable scalar_table;

#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif

}  // namespace dan::kernels::detail
