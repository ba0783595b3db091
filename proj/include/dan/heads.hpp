#pragma once

#include "dan/matrix.hpp"

#include <cstddef>
#include <vector>

namespace dan {

enum class HeadKind { ridge_ft, linear_svm };

/// One-vs-rest linear SVM over the stacked layer outputs.
struct SvmModel {
    Matrix weights;               // C x D, one separator per class
    std::vector<double> biases;   // C
    double c_penalty = 10.0;
    bool converged = true;
    std::size_t epochs_run = 0;
};

/// Trains C one-vs-rest L2-regularized hinge separators by deterministic
/// full-batch subgradient descent with a backtracking step (objective is
/// monotone nonincreasing per epoch). Stops when the relative objective
/// change drops below `tol` or after `max_epochs`, whichever first; hitting
/// the cap sets converged=false on the returned model instead of throwing.
SvmModel svm_fit(const Matrix& q, const std::vector<int>& labels,
                 double c_penalty = 10.0, std::size_t max_epochs = 2000,
                 double tol = 1e-6);

/// Per-class decision values w_c . q + b_c.
std::vector<double> svm_decision(const SvmModel& model, const double* q, std::size_t len);

/// Batch variant: one row of decision values per row of Q.
Matrix svm_decision(const SvmModel& model, const Matrix& q);

/// L2-regularized hinge objective the trainer minimizes for one class;
/// exposed for the monotonicity property tests.
double svm_objective(const double* w, double b, std::size_t dim, const Matrix& q,
                     const std::vector<double>& sign, double c_penalty);

// ---------------------------------------------------------------------------
// Uniform head interface: both heads consume the same stacked representation
// Q and return C scores per sample.
// ---------------------------------------------------------------------------

struct HeadModel {
    HeadKind kind = HeadKind::ridge_ft;
    Matrix ridge_w;  // D x C when kind == ridge_ft
    SvmModel svm;    // when kind == linear_svm
};

/// Fits the configured output head on Q. The ridge head solves the
/// regularized least-squares readout on the centered targets `yc`; the SVM
/// head trains one-vs-rest on the raw labels.
HeadModel head_fit(HeadKind kind, const Matrix& q, const Matrix& yc,
                   const std::vector<int>& labels, double lambda_ft,
                   double svm_c_penalty = 10.0);

std::vector<double> head_scores(const HeadModel& head, const double* q, std::size_t len);

Matrix head_scores(const HeadModel& head, const Matrix& q);

}  // namespace dan
