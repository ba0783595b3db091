#include "dan/heads.hpp"

#include "dan/dan_core.hpp"
#include "dan/errors.hpp"
#include "dan/kernels.hpp"
#include "dan/numerics.hpp"
#include "dan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <string>

namespace dan {

double svm_objective(const double* w, double b, std::size_t dim, const Matrix& q,
                     const std::vector<double>& sign, double c_penalty) {
    double obj = 0.5 * kernels::sum_sq(w, dim);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const double margin = sign[i] * (kernels::dot(w, q.row(i), dim) + b);
        if (margin < 1.0) obj += c_penalty * (1.0 - margin);
    }
    return obj;
}

namespace {

struct BinarySvm {
    std::vector<double> w;
    double b = 0.0;
    bool converged = false;
    std::size_t epochs = 0;
};

// Full-batch subgradient descent with a backtracking (Armijo) step, fixed
// evaluation order. Accepting only decreasing steps makes the objective
// monotone nonincreasing per epoch.
BinarySvm train_binary(const Matrix& q, const std::vector<double>& sign,
                       double c_penalty, std::size_t max_epochs, double tol) {
    const std::size_t n = q.rows(), dim = q.cols();
    BinarySvm m;
    m.w.assign(dim, 0.0);

    std::vector<double> grad(dim), trial(dim);
    double obj = svm_objective(m.w.data(), m.b, dim, q, sign, c_penalty);
    double step = 1.0 / (c_penalty * static_cast<double>(n));

    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
        std::memcpy(grad.data(), m.w.data(), dim * sizeof(double));
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double margin = sign[i] * (kernels::dot(m.w.data(), q.row(i), dim) + m.b);
            if (margin < 1.0) {
                kernels::axpy(-c_penalty * sign[i], q.row(i), grad.data(), dim);
                grad_b -= c_penalty * sign[i];
            }
        }
        const double gnorm2 = kernels::sum_sq(grad.data(), dim) + grad_b * grad_b;
        if (gnorm2 == 0.0) {
            m.converged = true;
            m.epochs = epoch;
            return m;
        }

        double new_obj = obj;
        double trial_b = m.b;
        bool accepted = false;
        for (int halvings = 0; halvings < 48; ++halvings) {
            std::memcpy(trial.data(), m.w.data(), dim * sizeof(double));
            kernels::axpy(-step, grad.data(), trial.data(), dim);
            trial_b = m.b - step * grad_b;
            new_obj = svm_objective(trial.data(), trial_b, dim, q, sign, c_penalty);
            if (new_obj <= obj - 1e-4 * step * gnorm2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent direction at machine-level steps: nonsmooth stationary point.
            m.converged = true;
            m.epochs = epoch;
            return m;
        }
        std::memcpy(m.w.data(), trial.data(), dim * sizeof(double));
        m.b = trial_b;
        const double drop = obj - new_obj;
        obj = new_obj;
        step *= 1.25;
        m.epochs = epoch + 1;
        if (drop <= tol * std::max(1.0, obj)) {
            m.converged = true;
            return m;
        }
    }
    m.converged = false;
    return m;
}

}  // namespace

SvmModel svm_fit(const Matrix& q, const std::vector<int>& labels, double c_penalty,
                 std::size_t max_epochs, double tol) {
    if (labels.size() != q.rows())
        throw DimensionMismatch("svm_fit: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(q.rows()) + " rows");
    if (q.rows() < 2) throw EmptyInput("svm_fit: need at least 2 samples");
    if (c_penalty <= 0.0) throw ConfigError("svm_fit: penalty must be positive");

    int max_label = 0;
    std::set<int> distinct;
    for (int l : labels) {
        if (l < 0) throw ClassIndexOutOfRange("svm_fit: negative label");
        max_label = std::max(max_label, l);
        distinct.insert(l);
    }
    if (distinct.size() < 2)
        throw DegenerateData("svm_fit: one-vs-rest needs >= 2 distinct classes");
    const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;

    SvmModel model;
    model.weights = Matrix(n_classes, q.cols());
    model.biases.assign(n_classes, 0.0);
    model.c_penalty = c_penalty;

    std::vector<bool> conv(n_classes, true);
    std::vector<std::size_t> epochs(n_classes, 0);
    parallel_for(0, n_classes, [&](std::size_t c0, std::size_t c1) {
        std::vector<double> sign(q.rows());
        for (std::size_t c = c0; c < c1; ++c) {
            for (std::size_t i = 0; i < q.rows(); ++i)
                sign[i] = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
            BinarySvm bin = train_binary(q, sign, c_penalty, max_epochs, tol);
            std::memcpy(model.weights.row(c), bin.w.data(), q.cols() * sizeof(double));
            model.biases[c] = bin.b;
            conv[c] = bin.converged;
            epochs[c] = bin.epochs;
        }
    });
    model.converged = std::all_of(conv.begin(), conv.end(), [](bool b) { return b; });
    model.epochs_run = *std::max_element(epochs.begin(), epochs.end());
    return model;
}

std::vector<double> svm_decision(const SvmModel& model, const double* q, std::size_t len) {
    if (len != model.weights.cols())
        throw DimensionMismatch("svm_decision: feature length " + std::to_string(len) +
                                " vs model dim " + std::to_string(model.weights.cols()));
    std::vector<double> out(model.weights.rows());
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = kernels::dot(model.weights.row(c), q, len) + model.biases[c];
    return out;
}

Matrix svm_decision(const SvmModel& model, const Matrix& q) {
    Matrix scores = matmul_nt(q, model.weights);
    for (std::size_t i = 0; i < scores.rows(); ++i)
        for (std::size_t c = 0; c < scores.cols(); ++c) scores(i, c) += model.biases[c];
    return scores;
}

// ---------------------------------------------------------------------------
// Uniform interface
// ---------------------------------------------------------------------------

HeadModel head_fit(HeadKind kind, const Matrix& q, const Matrix& yc,
                   const std::vector<int>& labels, double lambda_ft,
                   double svm_c_penalty) {
    HeadModel head;
    head.kind = kind;
    if (kind == HeadKind::ridge_ft) {
        head.ridge_w = ridge_fit(q, yc, lambda_ft);
    } else {
        head.svm = svm_fit(q, labels, svm_c_penalty);
    }
    return head;
}

std::vector<double> head_scores(const HeadModel& head, const double* q, std::size_t len) {
    if (head.kind == HeadKind::linear_svm) return svm_decision(head.svm, q, len);
    if (len != head.ridge_w.rows())
        throw DimensionMismatch("head_scores: feature length " + std::to_string(len) +
                                " vs head dim " + std::to_string(head.ridge_w.rows()));
    std::vector<double> out(head.ridge_w.cols(), 0.0);
    for (std::size_t r = 0; r < len; ++r)
        if (q[r] != 0.0) kernels::axpy(q[r], head.ridge_w.row(r), out.data(), out.size());
    return out;
}

Matrix head_scores(const HeadModel& head, const Matrix& q) {
    if (head.kind == HeadKind::linear_svm) return svm_decision(head.svm, q);
    return matmul(q, head.ridge_w);
}

}  // namespace dan
