#include "dan/dan_core.hpp"

#include "dan/errors.hpp"
#include "dan/kernels.hpp"
#include "dan/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace dan {

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

LabelMatrix center_labels(const std::vector<int>& labels, std::size_t n_classes) {
    if (labels.empty()) throw EmptyInput("center_labels: no labels");
    if (n_classes < 1) throw ConfigError("center_labels: need at least one class");

    const std::size_t n = labels.size();
    LabelMatrix lm;
    lm.y = Matrix(n, n_classes);
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int l = labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
            throw ClassIndexOutOfRange("center_labels: label " + std::to_string(l) +
                                       " outside [0, " + std::to_string(n_classes) + ")");
        lm.y(i, static_cast<std::size_t>(l)) = 1.0;
        ++counts[static_cast<std::size_t>(l)];
    }
    lm.mu.resize(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        lm.mu[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
        if (counts[c] == 0) lm.missing_classes.push_back(c);
    }
    lm.yc = lm.y;
    for (std::size_t i = 0; i < n; ++i)
        kernels::axpy(-1.0, lm.mu.data(), lm.yc.row(i), n_classes);
    lm.class_ids.resize(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) lm.class_ids[c] = static_cast<int>(c);
    return lm;
}

// ---------------------------------------------------------------------------
// Hyper-parameters
// ---------------------------------------------------------------------------

DanHyper DanHyper::uniform(std::size_t n_layers, double lambda_all, double lambda_ft_,
                           double beta_) {
    DanHyper h;
    h.layers = n_layers;
    h.lambda.assign(n_layers, lambda_all);
    h.lambda_ft = lambda_ft_;
    h.beta = beta_;
    return h;
}

void DanHyper::validate() const {
    if (layers < 1) throw ConfigError("DanHyper: layer count must be >= 1");
    if (lambda.size() != layers)
        throw ConfigError("DanHyper: " + std::to_string(lambda.size()) +
                          " lambdas for " + std::to_string(layers) + " layers");
    for (double l : lambda)
        if (!(l > 0.0)) throw NonPositiveLambda("DanHyper: layer lambda must be > 0");
    if (!(lambda_ft > 0.0)) throw NonPositiveLambda("DanHyper: lambda_ft must be > 0");
    if (!(beta > 0.0 && beta <= 1.0))
        throw ConfigError("DanHyper: beta must lie in (0, 1]");
}

// ---------------------------------------------------------------------------
// Elementwise pieces
// ---------------------------------------------------------------------------

Matrix ridge_fit(const Matrix& h, const Matrix& yc, double lambda) {
    if (!(lambda > 0.0)) throw NonPositiveLambda("ridge_fit: lambda must be > 0");
    if (h.rows() != yc.rows())
        throw DimensionMismatch("ridge_fit: H has " + std::to_string(h.rows()) +
                                " rows, Yc has " + std::to_string(yc.rows()));
    const std::size_t n = h.rows(), d = h.cols();
    if (n >= d) {
        Matrix s = gram_tn(h);
        add_diagonal(s, lambda);
        return solve_spd(s, matmul_tn(h, yc));
    }
    Matrix g = gram_nt(h);
    add_diagonal(g, lambda);
    return matmul_tn(h, solve_spd(g, yc));
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    kernels::relu(out.data(), out.data(), out.size());
    return out;
}

Matrix power_norm(const Matrix& q, double beta) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw ConfigError("power_norm: beta must lie in (0, 1]");
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q.data()[i] < 0.0)
            throw NegativeInput("power_norm: negative entry (ReLU missing upstream?)");
    Matrix out = q;
    if (beta == 1.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = std::pow(out.data()[i], beta);
    return out;
}

void add_diagonal(Matrix& a, double lambda) {
    if (a.rows() != a.cols()) throw DimensionMismatch("add_diagonal: matrix not square");
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += lambda;
}

namespace {

// Power transform for the no-ReLU ablation paths: layer outputs carry both
// signs there, so the exponent acts on the magnitude, sign preserved. With
// ReLU on this reduces to power_norm.
Matrix signed_power_norm(const Matrix& q, double beta) {
    Matrix out = q;
    if (beta == 1.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out.data()[i];
        out.data()[i] = v >= 0.0 ? std::pow(v, beta) : -std::pow(-v, beta);
    }
    return out;
}

Matrix stack_columns(const std::vector<Matrix>& ps) {
    const std::size_t n = ps.front().rows();
    std::size_t width = 0;
    for (const Matrix& p : ps) width += p.cols();
    Matrix out(n, width);
    std::size_t at = 0;
    for (const Matrix& p : ps) {
        for (std::size_t i = 0; i < n; ++i)
            std::memcpy(out.row(i) + at, p.row(i), p.cols() * sizeof(double));
        at += p.cols();
    }
    return out;
}

// H_l W_l without materializing H_l: X W[0:d) + sum_i P_i W[d+iC : d+(i+1)C).
Matrix layer_output(const Matrix& x, const std::vector<Matrix>& ps, const Matrix& w) {
    const std::size_t n = x.rows(), d = x.cols(), c = w.cols();
    Matrix out(n, c);
    kernels::gemm(false, false, n, c, d, 1.0, x.data(), d, w.data(), c, 0.0, out.data(), c);
    std::size_t row_at = d;
    for (const Matrix& p : ps) {
        kernels::gemm(false, false, n, c, p.cols(), 1.0, p.data(), p.cols(),
                      w.data() + row_at * c, c, 1.0, out.data(), c);
        row_at += p.cols();
    }
    return out;
}

}  // namespace

void DanModel::check_shape_chain() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::size_t want = input_dim + classes * l;
        if (layers[l].rows() != want || layers[l].cols() != classes)
            throw DimensionMismatch("DanModel: layer " + std::to_string(l + 1) +
                                    " weight is " + std::to_string(layers[l].rows()) +
                                    "x" + std::to_string(layers[l].cols()) +
                                    ", expected " + std::to_string(want) + "x" +
                                    std::to_string(classes));
    }
    if (has_w_ft) {
        const std::size_t want = layers.size() * classes;
        if (w_ft.rows() != want || w_ft.cols() != classes)
            throw DimensionMismatch("DanModel: FT weight is " +
                                    std::to_string(w_ft.rows()) + "x" +
                                    std::to_string(w_ft.cols()) + ", expected " +
                                    std::to_string(want) + "x" + std::to_string(classes));
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

DanTraining dan_train(const Matrix& x, const std::vector<int>& labels,
                      std::size_t n_classes, const DanHyper& hyper,
                      const HeadConfig& head) {
    hyper.validate();
    const std::size_t n = x.rows(), d = x.cols(), c = n_classes;
    if (n < 2) throw EmptyInput("dan_train: need at least 2 samples");
    if (c < 2) throw ConfigError("dan_train: need at least 2 classes");
    if (labels.size() != n)
        throw DimensionMismatch("dan_train: label count does not match rows");
    const std::size_t big_l = hyper.layers;
    const std::size_t d_final = d + c * (big_l - 1);
    if (d_final > hyper.max_layer_width)
        throw LayerWidthOverflow("dan_train: final layer width " +
                                 std::to_string(d_final) + " exceeds cap " +
                                 std::to_string(hyper.max_layer_width));

    const LabelMatrix lm = center_labels(labels, c);

    DanTraining out;
    out.model.input_dim = d;
    out.model.classes = c;
    out.model.hyper = hyper;
    out.model.head = head;
    out.model.class_ids = lm.class_ids;

    // Dual-side Gram cache: X X^T + sum of P P^T folded in on demand.
    Matrix gram;
    bool have_gram = false;
    std::size_t gram_p = 0;

    // Primal-side materialized H, allocated only if a primal layer exists.
    // d_cap is the widest layer still solved in the primal.
    std::size_t d_cap = 0;
    for (std::size_t l = 0; l < big_l; ++l) {
        const std::size_t dl = d + c * l;
        if (dl <= n) d_cap = dl;
    }
    std::vector<double> h_buf;
    std::size_t h_width = 0;

    auto append_to_h = [&](const Matrix& block) {
        if (h_buf.empty() || h_width + block.cols() > d_cap) return;
        for (std::size_t i = 0; i < n; ++i)
            std::memcpy(h_buf.data() + i * d_cap + h_width, block.row(i),
                        block.cols() * sizeof(double));
        h_width += block.cols();
    };

    for (std::size_t l = 0; l < big_l; ++l) {
        const std::size_t dl = d + c * l;
        const double lambda = hyper.lambda[l];
        Matrix w(dl, c);

        if (n >= dl) {
            // Primal: W = (H^T H + lambda I)^-1 H^T Yc on the materialized slice.
            if (h_buf.empty()) {
                h_buf.assign(n * d_cap, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    std::memcpy(h_buf.data() + i * d_cap, x.row(i), d * sizeof(double));
                h_width = d;
                for (const Matrix& p : out.p) append_to_h(p);
            }
            Matrix s(dl, dl);
            kernels::syrk_lower(true, dl, n, 1.0, h_buf.data(), d_cap, 0.0, s.data(), dl);
            symmetrize_from_lower(s);
            add_diagonal(s, lambda);
            Matrix rhs(dl, c);
            kernels::gemm(true, false, dl, c, n, 1.0, h_buf.data(), d_cap, lm.yc.data(),
                          c, 0.0, rhs.data(), c);
            cholesky_lower(s);
            cholesky_solve(s, rhs);
            w = std::move(rhs);
        } else {
            // Dual: W = H^T (H H^T + lambda I)^-1 Yc with an incrementally
            // maintained Gram matrix.
            if (!have_gram) {
                gram = gram_nt(x);
                have_gram = true;
            }
            while (gram_p < out.p.size()) {
                add_gram_nt(out.p[gram_p], gram);
                ++gram_p;
            }
            Matrix work = gram;
            add_diagonal(work, lambda);
            cholesky_lower(work);
            Matrix alpha = lm.yc;
            cholesky_solve(work, alpha);
            // W rows blockwise: X^T alpha, then P_i^T alpha.
            kernels::gemm(true, false, d, c, n, 1.0, x.data(), d, alpha.data(), c, 0.0,
                          w.data(), c);
            std::size_t row_at = d;
            for (const Matrix& p : out.p) {
                kernels::gemm(true, false, p.cols(), c, n, 1.0, p.data(), p.cols(),
                              alpha.data(), c, 0.0, w.data() + row_at * c, c);
                row_at += p.cols();
            }
        }

        Matrix raw = layer_output(x, out.p, w);
        out.p.push_back(hyper.relu_enabled ? relu(raw) : std::move(raw));
        append_to_h(out.p.back());
        out.model.layers.push_back(std::move(w));
    }

    const Matrix stacked = stack_columns(out.p);
    out.q = hyper.relu_enabled ? power_norm(stacked, hyper.beta)
                               : signed_power_norm(stacked, hyper.beta);

    if (head.kind == HeadKind::linear_svm) {
        // The SVM is the output layer whenever it is configured.
        const Matrix& svm_in = head.svm_on_pnorm ? out.q : stacked;
        HeadModel hm = head_fit(HeadKind::linear_svm, svm_in, lm.yc, labels, 0.0,
                                head.svm_c_penalty);
        out.model.svm = std::move(hm.svm);
        out.model.has_svm = true;
    } else if (hyper.ft_enabled) {
        HeadModel hm = head_fit(HeadKind::ridge_ft, out.q, lm.yc, labels, hyper.lambda_ft);
        out.model.w_ft = std::move(hm.ridge_w);
        out.model.has_w_ft = true;
    }

    out.model.check_shape_chain();
    return out;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

std::size_t argmax_lowest(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

DanForward dan_forward(const DanModel& model, const double* x, std::size_t dim) {
    if (dim != model.input_dim)
        throw DimensionMismatch("dan_forward: input length " + std::to_string(dim) +
                                " vs model dim " + std::to_string(model.input_dim));
    const std::size_t c = model.classes;
    const double beta = model.hyper.beta;

    DanForward fwd;
    for (const Matrix& w : model.layers) {
        std::vector<double> y(c, 0.0);
        for (std::size_t r = 0; r < dim; ++r)
            if (x[r] != 0.0) kernels::axpy(x[r], w.row(r), y.data(), c);
        std::size_t row_at = dim;
        for (const std::vector<double>& p : fwd.p)
            for (std::size_t r = 0; r < p.size(); ++r, ++row_at)
                if (p[r] != 0.0) kernels::axpy(p[r], w.row(row_at), y.data(), c);
        fwd.last_raw = y;
        if (model.hyper.relu_enabled)
            for (double& v : y)
                if (v < 0.0) v = 0.0;
        fwd.p.push_back(std::move(y));
    }

    fwd.q.reserve(model.layers.size() * c);
    for (const std::vector<double>& p : fwd.p)
        for (double v : p) {
            if (beta == 1.0) fwd.q.push_back(v);
            else fwd.q.push_back(v >= 0.0 ? std::pow(v, beta) : -std::pow(-v, beta));
        }
    return fwd;
}

DanBatchForward dan_forward_batch(const DanModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim)
        throw DimensionMismatch("dan_forward_batch: feature dim " +
                                std::to_string(x.cols()) + " vs model dim " +
                                std::to_string(model.input_dim));
    DanBatchForward fwd;
    for (const Matrix& w : model.layers) {
        Matrix raw = layer_output(x, fwd.p, w);
        fwd.p.push_back(model.hyper.relu_enabled ? relu(raw) : raw);
        fwd.raw.push_back(std::move(raw));
    }
    const Matrix stacked = stack_columns(fwd.p);
    fwd.q = model.hyper.relu_enabled ? power_norm(stacked, model.hyper.beta)
                                     : signed_power_norm(stacked, model.hyper.beta);
    return fwd;
}

namespace {

std::vector<double> scores_from_forward(const DanModel& model, const DanForward& fwd) {
    if (model.has_svm) {
        if (model.head.svm_on_pnorm)
            return svm_decision(model.svm, fwd.q.data(), fwd.q.size());
        std::vector<double> raw_stack;
        raw_stack.reserve(fwd.q.size());
        for (const std::vector<double>& p : fwd.p)
            raw_stack.insert(raw_stack.end(), p.begin(), p.end());
        return svm_decision(model.svm, raw_stack.data(), raw_stack.size());
    }
    if (model.has_w_ft) {
        std::vector<double> out(model.classes, 0.0);
        for (std::size_t r = 0; r < fwd.q.size(); ++r)
            if (fwd.q[r] != 0.0)
                kernels::axpy(fwd.q[r], model.w_ft.row(r), out.data(), out.size());
        return out;
    }
    // No output layer: the final layer's raw regression output is the score.
    return fwd.last_raw;
}

}  // namespace

std::vector<double> dan_scores(const DanModel& model, const double* x, std::size_t dim) {
    return scores_from_forward(model, dan_forward(model, x, dim));
}

Matrix dan_scores(const DanModel& model, const Matrix& x) {
    DanBatchForward fwd = dan_forward_batch(model, x);
    if (model.has_svm) {
        if (model.head.svm_on_pnorm) return svm_decision(model.svm, fwd.q);
        return svm_decision(model.svm, stack_columns(fwd.p));
    }
    if (model.has_w_ft) return matmul(fwd.q, model.w_ft);
    return fwd.raw.back();
}

int dan_predict(const DanModel& model, const double* x, std::size_t dim) {
    const std::vector<double> s = dan_scores(model, x, dim);
    return model.class_ids.empty()
               ? static_cast<int>(argmax_lowest(s.data(), s.size()))
               : model.class_ids[argmax_lowest(s.data(), s.size())];
}

std::vector<int> dan_predict(const DanModel& model, const Matrix& x) {
    const Matrix s = dan_scores(model, x);
    std::vector<int> out(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const std::size_t a = argmax_lowest(s.row(i), s.cols());
        out[i] = model.class_ids.empty() ? static_cast<int>(a) : model.class_ids[a];
    }
    return out;
}

}  // namespace dan
