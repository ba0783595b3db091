#pragma once

#include "dan/heads.hpp"
#include "dan/matrix.hpp"

#include <cstddef>
#include <vector>

namespace dan {

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// One-hot targets with their column means removed; regressions run on yc and
/// no intercept is carried anywhere downstream.
struct LabelMatrix {
    Matrix y;                                  // N x C one-hot
    std::vector<double> mu;                    // column means
    Matrix yc;                                 // y - 1 mu^T
    std::vector<int> class_ids;                // column index -> external label
    std::vector<std::size_t> missing_classes;  // classes absent from the sample
};

/// Builds the centered target matrix. Labels must lie in [0, C); classes with
/// no samples are reported in missing_classes rather than rejected.
LabelMatrix center_labels(const std::vector<int>& labels, std::size_t n_classes);

// ---------------------------------------------------------------------------
// Hyper-parameters
// ---------------------------------------------------------------------------

struct DanHyper {
    std::size_t layers = 10;             // L
    std::vector<double> lambda;          // per-layer ridge parameters, size L
    double lambda_ft = 10.0;
    double beta = 0.6;                   // power-normalization exponent, (0, 1]
    bool relu_enabled = true;
    bool ft_enabled = true;
    std::size_t max_layer_width = std::size_t{1} << 20;  // D_L guard

    /// Constant lambda across layers, the form the presets use.
    static DanHyper uniform(std::size_t n_layers, double lambda_all, double lambda_ft,
                            double beta);

    void validate() const;
};

struct HeadConfig {
    HeadKind kind = HeadKind::ridge_ft;
    double svm_c_penalty = 10.0;
    bool svm_on_pnorm = true;  // feed power-normalized Q to the SVM (default)
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct DanModel {
    std::size_t input_dim = 0;  // d
    std::size_t classes = 0;    // C
    DanHyper hyper;
    HeadConfig head;
    std::vector<Matrix> layers;  // W_l of shape (d + C(l-1)) x C
    bool has_w_ft = false;
    Matrix w_ft;  // (L C) x C, ridge head
    bool has_svm = false;
    SvmModel svm;
    std::vector<int> class_ids;

    /// Asserts the layer width chain D_l = d + C(l-1) (and the head width L C).
    void check_shape_chain() const;
};

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

/// Closed-form ridge solution without intercept: primal (H^T H + lambda I)^-1
/// H^T Yc when N >= D, dual H^T (H H^T + lambda I)^-1 Yc otherwise.
Matrix ridge_fit(const Matrix& h, const Matrix& yc, double lambda);

/// Element-wise max(0, .).
Matrix relu(const Matrix& m);

/// Element-wise q^beta on a nonnegative matrix, 0^beta = 0. beta = 1 is an
/// exact identity. Raises NegativeInput on any negative entry (a pipeline bug,
/// since ReLU runs upstream).
Matrix power_norm(const Matrix& q, double beta);

/// A += lambda I.
void add_diagonal(Matrix& a, double lambda);

// ---------------------------------------------------------------------------
// Training and inference
// ---------------------------------------------------------------------------

/// Everything training produces: the persistent model plus the per-layer
/// training-set outputs needed for depth sweeps and consistency checks.
struct DanTraining {
    DanModel model;
    std::vector<Matrix> p;  // P_l, N x C each (post-ReLU when enabled)
    Matrix q;               // power-normalized [P_1 .. P_L], N x (L C)
};

/// Layer-by-layer closed-form training. Rows of x are expected ell-2
/// normalized (caller contract). Each layer regresses the running
/// concatenation [X, P_1, .., P_{l-1}] onto the centered targets, picking the
/// primal or dual form per layer by N vs D_l; the output layer fits the
/// configured head on the power-normalized stack.
DanTraining dan_train(const Matrix& x, const std::vector<int>& labels,
                      std::size_t n_classes, const DanHyper& hyper,
                      const HeadConfig& head = HeadConfig{});

/// Per-sample replay of the training recurrence.
struct DanForward {
    std::vector<std::vector<double>> p;  // p_l, length C each
    std::vector<double> q;               // power-normalized concat, length L C
    std::vector<double> last_raw;        // h_L W_L before ReLU (no-FT score source)
};

DanForward dan_forward(const DanModel& model, const double* x, std::size_t dim);

/// Batch replay; exposes both raw regression outputs and rectified stacks so
/// ablation scoring can read either.
struct DanBatchForward {
    std::vector<Matrix> raw;  // H_l W_l per layer, N x C
    std::vector<Matrix> p;    // post-ReLU (equal to raw when ReLU disabled)
    Matrix q;                 // power-normalized stack, N x (L C)
};

DanBatchForward dan_forward_batch(const DanModel& model, const Matrix& x);

/// C head scores for one sample (ridge-FT scores, SVM decisions, or the
/// final layer's raw regression output when fine-tuning is disabled).
std::vector<double> dan_scores(const DanModel& model, const double* x, std::size_t dim);

/// Batch scores, one row per sample.
Matrix dan_scores(const DanModel& model, const Matrix& x);

/// argmax over dan_scores; ties break to the lowest class index.
int dan_predict(const DanModel& model, const double* x, std::size_t dim);

std::vector<int> dan_predict(const DanModel& model, const Matrix& x);

/// Lowest-index argmax shared by every scorer.
std::size_t argmax_lowest(const double* v, std::size_t n);

}  // namespace dan
