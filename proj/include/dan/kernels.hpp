#pragma once

#include <cstddef>

namespace dan::kernels {

/// Compute backends. `scalar` is the reference implementation every other
/// variant is equivalence-tested against; `avx2` requires AVX2 + FMA.
enum class Backend { scalar, avx2 };

/// Backend currently in use. Chosen at startup from CPUID, overridable with
/// the DAN_KERNELS environment variable ("scalar" or "avx2").
Backend active();

/// Force a backend; throws dan::Error if this CPU cannot run it.
void force(Backend b);

bool supported(Backend b);
const char* name(Backend b);

// ---------------------------------------------------------------------------
// Level-1: contiguous vector primitives.
// ---------------------------------------------------------------------------

double dot(const double* x, const double* y, std::size_t n);

/// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

/// x *= a
void scale(double a, double* x, std::size_t n);

double sum_sq(const double* x, std::size_t n);

/// y = max(0, x); in-place allowed (y == x).
void relu(const double* x, double* y, std::size_t n);

/// Givens rotation of two rows: (x, y) <- (c*x - s*y, s*x + c*y).
void givens(double* x, double* y, double c, double s, std::size_t n);

// ---------------------------------------------------------------------------
// Level-3: blocked, packed, multi-threaded matrix products (row-major).
// Results are bit-identical for any thread count: threads partition output
// rows and never share a reduction.
// ---------------------------------------------------------------------------

/// C = alpha * op(A) * op(B) + beta * C, all row-major.
/// op(A) is m x k; A is stored m x k when !ta, k x m when ta (op = transpose).
/// op(B) is k x n; B is stored k x n when !tb, n x k when tb.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* A, std::size_t lda,
          const double* B, std::size_t ldb,
          double beta, double* C, std::size_t ldc);

/// Lower triangle of C = alpha * op(A) * op(A)^T + beta * C.
/// op(A) is n x k; A is stored n x k when !ta, k x n when ta.
/// Entries above the diagonal are left untouched.
void syrk_lower(bool ta, std::size_t n, std::size_t k, double alpha,
                const double* A, std::size_t lda,
                double beta, double* C, std::size_t ldc);

}  // namespace dan::kernels
