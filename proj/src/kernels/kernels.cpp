// Backend selection and the blocked, packed GEMM/SYRK driver. The driver is
// backend-agnostic; only the micro-kernel and level-1 loops differ per
// backend. Threads partition output row-blocks, so each C element is
// accumulated by one thread in a fixed k-order: results are bit-identical
// for any thread count.

#include "dan/kernels.hpp"

#include "dan/errors.hpp"
#include "dan/parallel.hpp"
#include "kernels_internal.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

namespace dan::kernels {

using namespace detail;

namespace {

const KernelTable* g_table = nullptr;
Backend g_backend = Backend::scalar;

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void select(Backend b) {
    switch (b) {
        case Backend::scalar:
            g_table = &scalar_table;
            break;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            g_table = &avx2_table;
            break;
#else
            throw Error("kernels: avx2 backend not built for this architecture");
#endif
    }
    g_backend = b;
}

void init_once() {
    if (g_table) return;
    Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("DAN_KERNELS")) {
        std::string s(env);
        if (s == "scalar") b = Backend::scalar;
        else if (s == "avx2") b = Backend::avx2;
    }
    if (b == Backend::avx2 && !cpu_has_avx2()) b = Backend::scalar;
    select(b);
}

struct Init {
    Init() { init_once(); }
} g_init;

}  // namespace

Backend active() {
    init_once();
    return g_backend;
}

bool supported(Backend b) {
    return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

void force(Backend b) {
    if (!supported(b))
        throw Error(std::string("kernels: backend '") + name(b) +
                    "' unsupported on this CPU");
    select(b);
}

const char* name(Backend b) {
    return b == Backend::scalar ? "scalar" : "avx2";
}

double dot(const double* x, const double* y, std::size_t n) {
    init_once();
    return g_table->dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    init_once();
    g_table->axpy(a, x, y, n);
}

void scale(double a, double* x, std::size_t n) {
    init_once();
    g_table->scale(a, x, n);
}

double sum_sq(const double* x, std::size_t n) {
    init_once();
    return g_table->sum_sq(x, n);
}

void relu(const double* x, double* y, std::size_t n) {
    init_once();
    g_table->relu(x, y, n);
}

void givens(double* x, double* y, double c, double s, std::size_t n) {
    init_once();
    g_table->givens(x, y, c, s, n);
}

// ---------------------------------------------------------------------------
// Packed GEMM driver
// ---------------------------------------------------------------------------

namespace {

template <bool TA>
inline double a_elem(const double* A, std::size_t lda, std::size_t i, std::size_t k) {
    return TA ? A[k * lda + i] : A[i * lda + k];
}

template <bool TB>
inline double b_elem(const double* B, std::size_t ldb, std::size_t k, std::size_t j) {
    return TB ? B[j * ldb + k] : B[k * ldb + j];
}

// A block [ic, ic+mc) x [pc, pc+kc) into MR-row slivers, zero-padded.
template <bool TA>
void pack_a(const double* A, std::size_t lda, std::size_t ic, std::size_t pc,
            std::size_t mc, std::size_t kc, double* buf) {
    for (std::size_t s = 0; s * MR < mc; ++s) {
        double* out = buf + s * MR * kc;
        const std::size_t rows = std::min(MR, mc - s * MR);
        for (std::size_t kk = 0; kk < kc; ++kk) {
            for (std::size_t i = 0; i < rows; ++i)
                out[kk * MR + i] = a_elem<TA>(A, lda, ic + s * MR + i, pc + kk);
            for (std::size_t i = rows; i < MR; ++i) out[kk * MR + i] = 0.0;
        }
    }
}

// B block [pc, pc+kc) x [jc, jc+nc) into NR-column slivers, zero-padded.
template <bool TB>
void pack_b(const double* B, std::size_t ldb, std::size_t pc, std::size_t jc,
            std::size_t kc, std::size_t nc, double* buf) {
    for (std::size_t t = 0; t * NR < nc; ++t) {
        double* out = buf + t * NR * kc;
        const std::size_t cols = std::min(NR, nc - t * NR);
        for (std::size_t kk = 0; kk < kc; ++kk) {
            for (std::size_t j = 0; j < cols; ++j)
                out[kk * NR + j] = b_elem<TB>(B, ldb, pc + kk, jc + t * NR + j);
            for (std::size_t j = cols; j < NR; ++j) out[kk * NR + j] = 0.0;
        }
    }
}

// Shared driver; `lower_only` restricts computation and writes to j <= i
// (SYRK). Caller has already applied beta.
template <bool TA, bool TB>
void gemm_blocked(std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* A, std::size_t lda, const double* B, std::size_t ldb,
                  double* C, std::size_t ldc, bool lower_only) {
    if (alpha == 0.0 || k == 0) return;
    const MicroKernelFn mk = g_table->microkernel;
    std::vector<double> bp(((NC + NR - 1) / NR) * NR * KC);

    const std::size_t n_mc_blocks = (m + MC - 1) / MC;

    for (std::size_t jc = 0; jc < n; jc += NC) {
        const std::size_t nc = std::min(NC, n - jc);
        for (std::size_t pc = 0; pc < k; pc += KC) {
            const std::size_t kc = std::min(KC, k - pc);
            pack_b<TB>(B, ldb, pc, jc, kc, nc, bp.data());

            auto block_range = [&](std::size_t b0, std::size_t b1) {
                std::vector<double> ap(((MC + MR - 1) / MR) * MR * KC);
                double tile[MR * NR];
                for (std::size_t bi = b0; bi < b1; ++bi) {
                    const std::size_t ic = bi * MC;
                    const std::size_t mc = std::min(MC, m - ic);
                    // In SYRK mode only tiles touching j <= i survive.
                    if (lower_only && jc > ic + mc - 1) continue;
                    pack_a<TA>(A, lda, ic, pc, mc, kc, ap.data());
                    for (std::size_t jr = 0; jr < nc; jr += NR) {
                        for (std::size_t ir = 0; ir < mc; ir += MR) {
                            const std::size_t gi = ic + ir;      // tile top row
                            const std::size_t gj = jc + jr;      // tile left col
                            const std::size_t mr_eff = std::min(MR, mc - ir);
                            const std::size_t nr_eff = std::min(NR, nc - jr);
                            if (lower_only && gj > gi + mr_eff - 1) continue;
                            mk(kc, ap.data() + (ir / MR) * MR * kc,
                               bp.data() + (jr / NR) * NR * kc, tile);
                            for (std::size_t i = 0; i < mr_eff; ++i) {
                                double* crow = C + (gi + i) * ldc + gj;
                                const double* trow = tile + i * NR;
                                const std::size_t jmax =
                                    lower_only ? std::min(nr_eff,
                                                          (gi + i >= gj) ? (gi + i - gj + 1)
                                                                         : std::size_t(0))
                                               : nr_eff;
                                for (std::size_t j = 0; j < jmax; ++j)
                                    crow[j] += alpha * trow[j];
                            }
                        }
                    }
                }
            };

            if (lower_only) {
                // Weight row-blocks by the number of lower-triangle columns they
                // compute inside the current [jc, jc+nc) window.
                parallel_for_weighted(
                    0, n_mc_blocks,
                    [&](std::size_t b) {
                        const std::size_t mid = std::min(b * MC + MC / 2, m - 1);
                        const std::size_t hi = std::min(mid + 1, jc + nc);
                        return static_cast<double>(hi > jc ? hi - jc : 0) + 1.0;
                    },
                    block_range);
            } else {
                parallel_for(0, n_mc_blocks, block_range);
            }
        }
    }
}

void apply_beta(std::size_t m, std::size_t n, double beta, double* C, std::size_t ldc,
                bool lower_only) {
    if (beta == 1.0) return;
    parallel_for(0, m, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            double* row = C + i * ldc;
            const std::size_t cols = lower_only ? std::min(i + 1, n) : n;
            if (beta == 0.0)
                std::memset(row, 0, cols * sizeof(double));
            else
                for (std::size_t j = 0; j < cols; ++j) row[j] *= beta;
        }
    });
}

}  // namespace

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* A, std::size_t lda,
          const double* B, std::size_t ldb,
          double beta, double* C, std::size_t ldc) {
    init_once();
    if (m == 0 || n == 0) return;
    apply_beta(m, n, beta, C, ldc, false);
    if (ta) {
        if (tb) gemm_blocked<true, true>(m, n, k, alpha, A, lda, B, ldb, C, ldc, false);
        else    gemm_blocked<true, false>(m, n, k, alpha, A, lda, B, ldb, C, ldc, false);
    } else {
        if (tb) gemm_blocked<false, true>(m, n, k, alpha, A, lda, B, ldb, C, ldc, false);
        else    gemm_blocked<false, false>(m, n, k, alpha, A, lda, B, ldb, C, ldc, false);
    }
}

void syrk_lower(bool ta, std::size_t n, std::size_t k, double alpha,
                const double* A, std::size_t lda,
                double beta, double* C, std::size_t ldc) {
    init_once();
    if (n == 0) return;
    apply_beta(n, n, beta, C, ldc, true);
    if (ta) {
        // op(A) = A^T with A stored k x n; op(A)^T = A itself.
        gemm_blocked<true, false>(n, n, k, alpha, A, lda, A, lda, C, ldc, true);
    } else {
        // op(A) = A stored n x k; op(A)^T read via the transposed getter.
        gemm_blocked<false, true>(n, n, k, alpha, A, lda, A, lda, C, ldc, true);
    }
}

}  // namespace dan::kernels
