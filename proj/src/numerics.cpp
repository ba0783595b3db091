#include "dan/numerics.hpp"

#include "dan/errors.hpp"
#include "dan/kernels.hpp"
#include "dan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

namespace dan {

namespace {
constexpr std::size_t kPanel = 128;  // Cholesky / triangular-solve panel width
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionMismatch("matmul: " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
    Matrix c(a.rows(), b.cols());
    kernels::gemm(false, false, a.rows(), b.cols(), a.cols(), 1.0, a.data(), a.cols(),
                  b.data(), b.cols(), 0.0, c.data(), c.cols());
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionMismatch("matmul_tn: reduction dims disagree");
    Matrix c(a.cols(), b.cols());
    kernels::gemm(true, false, a.cols(), b.cols(), a.rows(), 1.0, a.data(), a.cols(),
                  b.data(), b.cols(), 0.0, c.data(), c.cols());
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionMismatch("matmul_nt: reduction dims disagree");
    Matrix c(a.rows(), b.rows());
    kernels::gemm(false, true, a.rows(), b.rows(), a.cols(), 1.0, a.data(), a.cols(),
                  b.data(), b.cols(), 0.0, c.data(), c.cols());
    return c;
}

void symmetrize_from_lower(Matrix& a) {
    const std::size_t n = a.rows();
    parallel_for(0, n, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i)
            for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i);
    });
}

Matrix gram_nt(const Matrix& a) {
    Matrix c(a.rows(), a.rows());
    kernels::syrk_lower(false, a.rows(), a.cols(), 1.0, a.data(), a.cols(), 0.0,
                        c.data(), c.cols());
    symmetrize_from_lower(c);
    return c;
}

Matrix gram_tn(const Matrix& a) {
    Matrix c(a.cols(), a.cols());
    kernels::syrk_lower(true, a.cols(), a.rows(), 1.0, a.data(), a.cols(), 0.0,
                        c.data(), c.cols());
    symmetrize_from_lower(c);
    return c;
}

void add_gram_nt(const Matrix& p, Matrix& g) {
    if (g.rows() != g.cols() || g.rows() != p.rows())
        throw DimensionMismatch("add_gram_nt: shapes disagree");
    kernels::syrk_lower(false, p.rows(), p.cols(), 1.0, p.data(), p.cols(), 1.0,
                        g.data(), g.cols());
    symmetrize_from_lower(g);
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

void cholesky_lower(Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("cholesky_lower: matrix not square");
    const std::size_t n = a.rows();
    double* A = a.data();
    const std::size_t lda = n;

    for (std::size_t j = 0; j < n; j += kPanel) {
        const std::size_t nb = std::min(kPanel, n - j);

        // Diagonal block, left-looking within the panel.
        for (std::size_t i = j; i < j + nb; ++i) {
            double* Ai = A + i * lda;
            for (std::size_t k = j; k < i; ++k) {
                const double* Ak = A + k * lda;
                Ai[k] = (Ai[k] - kernels::dot(Ai + j, Ak + j, k - j)) / Ak[k];
            }
            const double s = Ai[i] - kernels::sum_sq(Ai + j, i - j);
            if (!(s > 0.0))
                throw NotPositiveDefinite("cholesky_lower: nonpositive pivot at index " +
                                          std::to_string(i));
            Ai[i] = std::sqrt(s);
        }

        if (j + nb >= n) break;

        // Panel below the diagonal block: rows solved against L11^T.
        parallel_for(j + nb, n, [&](std::size_t r0, std::size_t r1) {
            for (std::size_t r = r0; r < r1; ++r) {
                double* Ar = A + r * lda;
                for (std::size_t k = j; k < j + nb; ++k) {
                    const double* Ak = A + k * lda;
                    Ar[k] = (Ar[k] - kernels::dot(Ar + j, Ak + j, k - j)) / Ak[k];
                }
            }
        });

        // Trailing update: A22 -= L21 L21^T.
        const std::size_t m2 = n - (j + nb);
        kernels::syrk_lower(false, m2, nb, -1.0, A + (j + nb) * lda + j, lda, 1.0,
                            A + (j + nb) * lda + (j + nb), lda);
    }
}

void cholesky_solve(const Matrix& l, Matrix& b) {
    const std::size_t n = l.rows();
    if (l.cols() != n || b.rows() != n)
        throw DimensionMismatch("cholesky_solve: shapes disagree");
    const std::size_t m = b.cols();
    const double* L = l.data();
    double* B = b.data();

    // Forward: L Z = B.
    for (std::size_t j = 0; j < n; j += kPanel) {
        const std::size_t nb = std::min(kPanel, n - j);
        for (std::size_t i = j; i < j + nb; ++i) {
            for (std::size_t k = j; k < i; ++k)
                kernels::axpy(-L[i * n + k], B + k * m, B + i * m, m);
            kernels::scale(1.0 / L[i * n + i], B + i * m, m);
        }
        if (j + nb < n)
            kernels::gemm(false, false, n - j - nb, m, nb, -1.0, L + (j + nb) * n + j, n,
                          B + j * m, m, 1.0, B + (j + nb) * m, m);
    }

    // Backward: L^T X = Z.
    std::size_t j = (n - 1) / kPanel * kPanel;
    while (true) {
        const std::size_t nb = std::min(kPanel, n - j);
        for (std::size_t ii = 0; ii < nb; ++ii) {
            const std::size_t i = j + nb - 1 - ii;
            for (std::size_t k = i + 1; k < j + nb; ++k)
                kernels::axpy(-L[k * n + i], B + k * m, B + i * m, m);
            kernels::scale(1.0 / L[i * n + i], B + i * m, m);
        }
        if (j == 0) break;
        kernels::gemm(true, false, j, m, nb, -1.0, L + j * n, n, B + j * m, m, 1.0, B, m);
        j -= kPanel;
    }
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols())
        throw DimensionMismatch("solve_spd: A not square");
    if (a.rows() != b.rows())
        throw DimensionMismatch("solve_spd: A is " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + ", B has " +
                                std::to_string(b.rows()) + " rows");
    Matrix l = a;
    cholesky_lower(l);
    Matrix x = b;
    cholesky_solve(l, x);
    return x;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition: Householder tridiagonalization + implicit QL.
// The transform accumulator is kept transposed (rows are the would-be columns)
// so every update is a contiguous row operation.
// ---------------------------------------------------------------------------

namespace {

struct Tridiag {
    std::vector<double> d;    // diagonal
    std::vector<double> sub;  // sub[i] couples i and i+1
    Matrix qt;                // n x n, row r = column r of the accumulated Q
};

Tridiag householder_tridiagonalize(const Matrix& s) {
    const std::size_t n = s.rows();
    Matrix w = s;
    // The lower triangle is authoritative (inputs may be asymmetric at 1e-10).
    symmetrize_from_lower(w);

    Tridiag t;
    t.d.resize(n);
    t.sub.assign(n > 1 ? n - 1 : 0, 0.0);
    t.qt = Matrix::identity(n);

    std::vector<double> v(n), p(n), hw(n), tmp(n);

    for (std::size_t i = 0; i + 2 < n; ++i) {
        const std::size_t tail = n - i - 1;  // rows i+1..n-1
        double norm2 = 0.0;
        for (std::size_t r = 0; r < tail; ++r) {
            v[r] = w(i + 1 + r, i);
            norm2 += v[r] * v[r];
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) {
            t.sub[i] = 0.0;
            continue;
        }
        const double sigma = v[0] >= 0.0 ? norm : -norm;
        v[0] += sigma;
        const double h = sigma * (sigma + (v[0] - sigma));  // = v^T v / 2
        t.sub[i] = -sigma;

        // p = A_tail * v
        for (std::size_t r = 0; r < tail; ++r)
            p[r] = kernels::dot(w.row(i + 1 + r) + i + 1, v.data(), tail);
        const double vtp = kernels::dot(v.data(), p.data(), tail);
        const double kcoef = vtp / (2.0 * h);
        for (std::size_t r = 0; r < tail; ++r) hw[r] = p[r] / h - (kcoef / h) * v[r];

        // A_tail -= v w^T + w v^T
        for (std::size_t r = 0; r < tail; ++r) {
            double* row = w.row(i + 1 + r) + i + 1;
            kernels::axpy(-v[r], hw.data(), row, tail);
            kernels::axpy(-hw[r], v.data(), row, tail);
        }

        // Q^T rows: QT_tail <- (I - v v^T / h) QT_tail.
        std::memset(tmp.data(), 0, n * sizeof(double));
        for (std::size_t r = 0; r < tail; ++r)
            kernels::axpy(v[r], t.qt.row(i + 1 + r), tmp.data(), n);
        for (std::size_t r = 0; r < tail; ++r)
            kernels::axpy(-v[r] / h, tmp.data(), t.qt.row(i + 1 + r), n);
    }
    if (n > 1) t.sub[n - 2] = w(n - 1, n - 2);
    for (std::size_t i = 0; i < n; ++i) t.d[i] = w(i, i);
    return t;
}

// Implicit-shift QL on a tridiagonal, rotations folded into the transposed
// accumulator. Standard formulation.
void tridiag_ql(Tridiag& t, std::size_t max_iter) {
    const std::size_t n = t.d.size();
    if (n <= 1) return;
    std::vector<double>& d = t.d;
    std::vector<double> e(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = t.sub[i];

    const double eps = std::numeric_limits<double>::epsilon();
    double f = 0.0, tst1 = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::fabs(d[l]) + std::fabs(e[l]));
        std::size_t m = l;
        while (m < n && std::fabs(e[m]) > eps * tst1) ++m;

        if (m > l) {
            std::size_t iter = 0;
            do {
                if (++iter > max_iter)
                    throw NoConvergence("sym_eig: QL exceeded " +
                                        std::to_string(max_iter) +
                                        " iterations at eigenvalue " + std::to_string(l));
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double sn = 0.0, s2 = 0.0;
                for (std::size_t ii = m - l; ii-- > 0;) {
                    const std::size_t i = l + ii;
                    c3 = c2;
                    c2 = c;
                    s2 = sn;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = sn * r;
                    sn = e[i] / r;
                    c = p / r;
                    p = c * d[i] - sn * g;
                    d[i + 1] = h + sn * (c * g + sn * d[i]);
                    // (row_i, row_{i+1}) <- (c*row_i - s*row_{i+1}, s*row_i + c*row_{i+1})
                    kernels::givens(t.qt.row(i), t.qt.row(i + 1), c, sn, n);
                }
                p = -sn * s2 * c3 * el1 * e[l] / dl1;
                e[l] = sn * p;
                d[l] = c * p;
            } while (std::fabs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace

SymEig sym_eig_top_k(const Matrix& s, std::size_t k, std::size_t max_iter) {
    if (s.rows() != s.cols()) throw DimensionMismatch("sym_eig_top_k: matrix not square");
    const std::size_t n = s.rows();
    if (k < 1 || k > n)
        throw DimensionMismatch("sym_eig_top_k: k=" + std::to_string(k) + " out of [1, " +
                                std::to_string(n) + "]");

    Tridiag t = householder_tridiagonalize(s);
    tridiag_ql(t, max_iter);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t.d[a] > t.d[b]; });

    SymEig out;
    out.values.resize(k);
    out.vectors = Matrix(k, n);
    for (std::size_t i = 0; i < k; ++i) {
        out.values[i] = t.d[order[i]];
        std::memcpy(out.vectors.row(i), t.qt.row(order[i]), n * sizeof(double));
    }
    return out;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

std::vector<double> column_means(const Matrix& x) {
    std::vector<double> mu(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        kernels::axpy(1.0, x.row(i), mu.data(), x.cols());
    kernels::scale(1.0 / static_cast<double>(x.rows()), mu.data(), mu.size());
    return mu;
}

PcaModel pca_fit(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows(), d = x.cols();
    if (k < 1 || k > std::min(n, d))
        throw DimensionMismatch("pca_fit: k=" + std::to_string(k) +
                                " exceeds min(N, d)=" +
                                std::to_string(std::min(n, d)));

    PcaModel model;
    model.mean = column_means(x);

    Matrix xc = x;
    for (std::size_t i = 0; i < n; ++i)
        kernels::axpy(-1.0, model.mean.data(), xc.row(i), d);

    const double inv_n = 1.0 / static_cast<double>(n);
    SymEig eig;
    bool gram_side = n < d;
    if (!gram_side) {
        Matrix cov(d, d);
        kernels::syrk_lower(true, d, n, inv_n, xc.data(), d, 0.0, cov.data(), d);
        symmetrize_from_lower(cov);
        eig = sym_eig_top_k(cov, k);
    } else {
        Matrix gram(n, n);
        kernels::syrk_lower(false, n, d, inv_n, xc.data(), d, 0.0, gram.data(), n);
        symmetrize_from_lower(gram);
        eig = sym_eig_top_k(gram, k);
    }

    // Discard directions whose variance is numerically zero instead of
    // fabricating them.
    const double lmax = eig.values.empty() ? 0.0 : std::max(eig.values[0], 0.0);
    const double tol = std::max(lmax * 1e-10, 1e-14);
    std::size_t rank = 0;
    while (rank < k && eig.values[rank] > tol) ++rank;
    if (rank == 0)
        throw DegenerateData("pca_fit: data has no variance (covariance rank 0)");
    model.rank_deficient = rank < k;

    model.components = Matrix(rank, d);
    model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + rank);
    if (!gram_side) {
        for (std::size_t i = 0; i < rank; ++i)
            std::memcpy(model.components.row(i), eig.vectors.row(i), d * sizeof(double));
    } else {
        // Map Gram eigenvectors u to covariance eigenvectors Xc^T u, renormalized.
        for (std::size_t i = 0; i < rank; ++i) {
            double* out = model.components.row(i);
            std::memset(out, 0, d * sizeof(double));
            for (std::size_t r = 0; r < n; ++r)
                kernels::axpy(eig.vectors(i, r), xc.row(r), out, d);
            const double nrm = std::sqrt(kernels::sum_sq(out, d));
            kernels::scale(1.0 / nrm, out, d);
        }
    }

    // Deterministic sign: largest-magnitude entry positive.
    for (std::size_t i = 0; i < rank; ++i) {
        double* row = model.components.row(i);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::fabs(row[j]) > std::fabs(row[arg])) arg = j;
        if (row[arg] < 0.0) kernels::scale(-1.0, row, d);
    }
    return model;
}

Matrix pca_project(const PcaModel& m, const Matrix& x) {
    if (x.cols() != m.mean.size())
        throw DimensionMismatch("pca_project: feature dim " + std::to_string(x.cols()) +
                                " vs model dim " + std::to_string(m.mean.size()));
    Matrix xc = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        kernels::axpy(-1.0, m.mean.data(), xc.row(i), xc.cols());
    return matmul_nt(xc, m.components);
}

}  // namespace dan
