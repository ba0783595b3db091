#pragma once

#include "dan/matrix.hpp"

#include <cstddef>
#include <vector>

namespace dan {

// ---------------------------------------------------------------------------
// Matrix products (thin wrappers over the kernel layer)
// ---------------------------------------------------------------------------

/// A (m x k) * B (k x n)
Matrix matmul(const Matrix& a, const Matrix& b);

/// A^T * B where A is (k x m), B is (k x n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// A * B^T where A is (m x k), B is (n x k)
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// A * A^T, full symmetric result.
Matrix gram_nt(const Matrix& a);

/// A^T * A, full symmetric result.
Matrix gram_tn(const Matrix& a);

/// G += P * P^T for symmetric G (both triangles kept in sync).
void add_gram_nt(const Matrix& p, Matrix& g);

/// Mirror the lower triangle into the upper one.
void symmetrize_from_lower(Matrix& a);

// ---------------------------------------------------------------------------
// SPD solves
// ---------------------------------------------------------------------------

/// In-place blocked Cholesky factorization A = L L^T; reads and writes the
/// lower triangle only. Throws NotPositiveDefinite on a nonpositive pivot.
void cholesky_lower(Matrix& a);

/// Solves L L^T X = B in place given the factor from cholesky_lower.
void cholesky_solve(const Matrix& l, Matrix& b);

/// X with A X = B for symmetric positive definite A (lower triangle is
/// authoritative). ||A X - B||_F <= 1e-8 ||B||_F for well-conditioned A.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition
// ---------------------------------------------------------------------------

struct SymEig {
    std::vector<double> values;  // descending
    Matrix vectors;              // k x n, row i is the eigenvector of values[i]
};

/// Top-k eigenpairs of a symmetric matrix via Householder tridiagonalization
/// followed by implicit-shift QL. `max_iter` caps QL iterations per
/// eigenvalue; exceeding it raises NoConvergence.
SymEig sym_eig_top_k(const Matrix& s, std::size_t k, std::size_t max_iter = 50);

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PcaModel {
    std::vector<double> mean;         // d
    Matrix components;                // r x d, orthonormal rows, r <= requested k
    std::vector<double> eigenvalues;  // r, descending, eigenvalues of (1/N) Xc^T Xc
    bool rank_deficient = false;      // true when r < requested k
};

/// Fits the top-k principal components of X (N x d). Works on whichever of
/// the covariance (d x d) or Gram (N x N) matrix is smaller. When the data
/// rank r is below k, returns r components with rank_deficient set; rank 0
/// (no variance at all) raises DegenerateData.
PcaModel pca_fit(const Matrix& x, std::size_t k);

/// Rows of X centered by the model mean and projected onto the components.
Matrix pca_project(const PcaModel& m, const Matrix& x);

std::vector<double> column_means(const Matrix& x);

}  // namespace dan
