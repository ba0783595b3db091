#include "dan/experiment.hpp"

#include "dan/data_io.hpp"
#include "dan/errors.hpp"
#include "dan/kernels.hpp"
#include "dan/numerics.hpp"
#include "dan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace dan::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string fmt_acc(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

/// Deterministic key=value report writer (no timestamps, pinned float format).
class KvReport {
public:
    void add(const std::string& key, const std::string& value) {
        lines_ += key + " = " + value + "\n";
    }
    void add(const std::string& key, double v) { add(key, fmt_double(v)); }
    void add_acc(const std::string& key, double v) { add(key, fmt_acc(v)); }
    void add(const std::string& key, std::size_t v) { add(key, std::to_string(v)); }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError(path + ": cannot open for writing");
        out << lines_;
        out.flush();
        if (!out) throw IoError(path + ": write failed");
    }

private:
    std::string lines_;
};

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir + ": cannot create output directory");
}

void apply_subset(io::ImageDataset& ds, std::size_t count, std::uint64_t seed) {
    const std::vector<std::size_t> idx = stratified_subset(ds.labels, count, seed);
    if (idx.size() == ds.labels.size()) return;
    std::vector<Image> images;
    std::vector<int> labels;
    images.reserve(idx.size());
    labels.reserve(idx.size());
    for (std::size_t i : idx) {
        images.push_back(std::move(ds.images[i]));
        labels.push_back(ds.labels[i]);
    }
    ds.images = std::move(images);
    ds.labels = std::move(labels);
}

io::ImageDataset load_split_images(const ExperimentConfig& cfg, const std::string& split) {
    const DatasetConfig& d = cfg.dataset;
    io::ImageDataset ds;
    if (d.kind == "mnist") {
        ds = split == "train" ? io::load_mnist_idx(d.train_images, d.train_labels)
                              : io::load_mnist_idx(d.test_images, d.test_labels);
    } else if (d.kind == "cifar10") {
        ds = io::load_cifar10(split == "train" ? d.cifar_train_batches
                                               : d.cifar_test_batches);
    } else {
        throw ConfigError("dataset kind '" + d.kind + "' carries no raw images");
    }
    ds.split = split;
    apply_subset(ds, split == "train" ? d.subset_train : d.subset_test, d.seed);
    return ds;
}

std::size_t class_count(const std::vector<int>& labels) {
    int m = 0;
    for (int l : labels) m = std::max(m, l);
    return static_cast<std::size_t>(m) + 1;
}

double accuracy_of(const Matrix& scores, const std::vector<int>& class_ids,
                   const std::vector<int>& truth) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const std::size_t a = argmax_lowest(scores.row(i), scores.cols());
        const int pred = class_ids.empty() ? static_cast<int>(a) : class_ids[a];
        if (pred == truth[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(scores.rows());
}

Matrix take_columns(const Matrix& m, std::size_t cols) {
    Matrix out(m.rows(), cols);
    for (std::size_t i = 0; i < m.rows(); ++i)
        std::memcpy(out.row(i), m.row(i), cols * sizeof(double));
    return out;
}

Matrix stack_p(const std::vector<Matrix>& ps) {
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

std::string train_features_path(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == "shfm") return cfg.dataset.train_features;
    return (fs::path(cfg.out_dir) / "train.shfm").string();
}

std::string test_features_path(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == "shfm") return cfg.dataset.test_features;
    return (fs::path(cfg.out_dir) / "test.shfm").string();
}

// Per-depth output head on the first l layer blocks of the stacked
// representation; the exact computation cmd_train logs and cmd_ablate's FT
// columns share.
double depth_accuracy(const ExperimentConfig& cfg, const DanTraining& tr,
                      const DanBatchForward& fwd, const LabelMatrix& lm,
                      const std::vector<int>& train_labels,
                      const std::vector<int>& test_labels, std::size_t depth) {
    const std::size_t c = tr.model.classes;
    const std::size_t width = depth * c;
    const bool has_head =
        tr.model.head.kind == HeadKind::linear_svm || tr.model.hyper.ft_enabled;
    if (!has_head)
        return accuracy_of(fwd.raw[depth - 1], tr.model.class_ids, test_labels);

    if (tr.model.head.kind == HeadKind::linear_svm) {
        const bool pnorm = tr.model.head.svm_on_pnorm;
        Matrix q_train = take_columns(pnorm ? tr.q : stack_p(tr.p), width);
        Matrix q_test = take_columns(pnorm ? fwd.q : stack_p(fwd.p), width);
        SvmModel svm = svm_fit(q_train, train_labels, tr.model.head.svm_c_penalty);
        return accuracy_of(svm_decision(svm, q_test), tr.model.class_ids, test_labels);
    }
    Matrix w = ridge_fit(take_columns(tr.q, width), lm.yc, cfg.dan.lambda_ft);
    return accuracy_of(matmul(take_columns(fwd.q, width), w), tr.model.class_ids,
                       test_labels);
}

}  // namespace

std::vector<int> load_split_labels(const ExperimentConfig& cfg, const std::string& split) {
    const DatasetConfig& d = cfg.dataset;
    std::vector<int> labels;
    if (d.kind == "mnist" || d.kind == "shfm") {
        labels = io::load_idx_labels(split == "train" ? d.train_labels : d.test_labels);
    } else if (d.kind == "cifar10") {
        labels = io::load_cifar10(split == "train" ? d.cifar_train_batches
                                                   : d.cifar_test_batches)
                     .labels;
    } else {
        throw ConfigError("unknown dataset kind '" + d.kind + "'");
    }
    const std::vector<std::size_t> idx = stratified_subset(
        labels, split == "train" ? d.subset_train : d.subset_test, d.seed);
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

ExtractResult cmd_extract(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.dataset.kind == "shfm")
        throw ConfigError("extract: dataset is already a feature cache");
    ensure_out_dir(cfg.out_dir);

    io::ImageDataset train = load_split_images(cfg, "train");
    if (train.images.empty()) throw EmptyInput("extract: empty training split");

    // Filter banks are learned on the training split only.
    sh::FilterBank bank1 = sh::learn_pca_filters(train.images, cfg.sh, 1);
    {
        std::vector<Image> maps = sh::stage1_response_maps(train.images, bank1, cfg.sh);
        sh::FilterBank bank2 = sh::learn_pca_filters(maps, cfg.sh, 2);
        maps.clear();
        maps.shrink_to_fit();
        io::save_filter_bank(join_path(cfg.out_dir, "stage1.shfb"), bank1);
        io::save_filter_bank(join_path(cfg.out_dir, "stage2.shfb"), bank2);
    }
    sh::FilterBank bank2 = io::load_filter_bank(join_path(cfg.out_dir, "stage2.shfb"));

    ExtractResult res;
    res.n_train = train.images.size();

    Matrix x_train = sh::extract_features(train.images, bank1, bank2, cfg.sh);
    train.images.clear();
    train.images.shrink_to_fit();
    res.zero_rows = sh::l2_normalize_rows(x_train, cfg.sh.norm_scale).size();

    PcaModel pca;
    if (cfg.pca_dim > 0) {
        pca = pca_fit(x_train, cfg.pca_dim);
        x_train = pca_project(pca, x_train);
        sh::l2_normalize_rows(x_train, cfg.sh.norm_scale);
    }
    res.dim = x_train.cols();
    io::save_features(join_path(cfg.out_dir, "train.shfm"), x_train);
    io::save_idx_labels(join_path(cfg.out_dir, "train_labels.idx"), train.labels);
    x_train = Matrix(1, 1);  // release before the test split loads

    const bool have_test = cfg.dataset.kind == "cifar10"
                               ? !cfg.dataset.cifar_test_batches.empty()
                               : !cfg.dataset.test_images.empty();
    if (have_test) {
        io::ImageDataset test = load_split_images(cfg, "test");
        res.n_test = test.images.size();
        Matrix x_test = sh::extract_features(test.images, bank1, bank2, cfg.sh);
        test.images.clear();
        test.images.shrink_to_fit();
        res.zero_rows += sh::l2_normalize_rows(x_test, cfg.sh.norm_scale).size();
        if (cfg.pca_dim > 0) {
            x_test = pca_project(pca, x_test);
            sh::l2_normalize_rows(x_test, cfg.sh.norm_scale);
        }
        io::save_features(join_path(cfg.out_dir, "test.shfm"), x_test);
        io::save_idx_labels(join_path(cfg.out_dir, "test_labels.idx"), test.labels);
    }

    KvReport kv;
    kv.add("extract.n_train", res.n_train);
    kv.add("extract.n_test", res.n_test);
    kv.add("extract.dim", res.dim);
    kv.add("extract.zero_rows", res.zero_rows);
    kv.add("extract.pca_dim", cfg.pca_dim);
    kv.write(join_path(cfg.out_dir, "extract.kv"));
    return res;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

double cosine_nn_accuracy(const Matrix& train_x, const std::vector<int>& train_y,
                          const Matrix& test_x, const std::vector<int>& test_y) {
    if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size())
        throw CountMismatch("cosine_nn: features and labels disagree");
    if (train_x.cols() != test_x.cols())
        throw DimensionMismatch("cosine_nn: train/test feature dims disagree");

    std::vector<double> inv_train_norm(train_x.rows());
    for (std::size_t j = 0; j < train_x.rows(); ++j) {
        const double n = std::sqrt(kernels::sum_sq(train_x.row(j), train_x.cols()));
        inv_train_norm[j] = n > 0.0 ? 1.0 / n : 0.0;
    }

    const Matrix sim = matmul_nt(test_x, train_x);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < sim.rows(); ++i) {
        const double* row = sim.row(i);
        std::size_t best = 0;
        double best_v = row[0] * inv_train_norm[0];
        for (std::size_t j = 1; j < sim.cols(); ++j) {
            const double v = row[j] * inv_train_norm[j];
            if (v > best_v) {
                best_v = v;
                best = j;
            }
        }
        if (train_y[best] == test_y[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(test_x.rows());
}

BaselineResult cmd_baseline(const ExperimentConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg.out_dir);
    const Matrix x_train = io::load_features(train_features_path(cfg));
    const Matrix x_test = io::load_features(test_features_path(cfg));
    const std::vector<int> y_train = load_split_labels(cfg, "train");
    const std::vector<int> y_test = load_split_labels(cfg, "test");
    if (y_train.size() != x_train.rows() || y_test.size() != x_test.rows())
        throw CountMismatch("baseline: cached features disagree with subset labels");

    BaselineResult res;
    res.n_train = x_train.rows();
    res.n_test = x_test.rows();
    res.accuracy = cosine_nn_accuracy(x_train, y_train, x_test, y_test);

    KvReport kv;
    kv.add("baseline.n_train", res.n_train);
    kv.add("baseline.n_test", res.n_test);
    kv.add_acc("baseline.accuracy", res.accuracy);
    kv.write(join_path(cfg.out_dir, "baseline.kv"));
    return res;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TrainResult cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg.out_dir);

    std::vector<int> y_train = load_split_labels(cfg, "train");
    std::vector<int> y_test = load_split_labels(cfg, "test");
    const std::size_t classes = class_count(y_train);

    DanTraining tr;
    {
        Matrix x_train = io::load_features(train_features_path(cfg));
        if (y_train.size() != x_train.rows())
            throw CountMismatch("train: cached features disagree with subset labels");
        tr = dan_train(x_train, y_train, classes, cfg.dan, cfg.head);
    }
    io::save_model(join_path(cfg.out_dir, "model.danm"), tr.model);

    Matrix x_test = io::load_features(test_features_path(cfg));
    if (y_test.size() != x_test.rows())
        throw CountMismatch("train: cached test features disagree with subset labels");
    const DanBatchForward fwd = dan_forward_batch(tr.model, x_test);
    const LabelMatrix lm = center_labels(y_train, classes);

    TrainResult res;
    for (std::size_t l = 1; l <= cfg.dan.layers; ++l) {
        LayerLogRow row;
        row.layer = l;
        row.width = tr.model.input_dim + classes * (l - 1);
        row.test_accuracy = depth_accuracy(cfg, tr, fwd, lm, y_train, y_test, l);
        res.log.push_back(row);
    }
    res.final_accuracy = res.log.back().test_accuracy;
    res.best_layer = 1;
    res.best_accuracy = res.log.front().test_accuracy;
    for (const LayerLogRow& row : res.log)
        if (row.test_accuracy > res.best_accuracy) {
            res.best_accuracy = row.test_accuracy;
            res.best_layer = row.layer;
        }

    std::ofstream table(join_path(cfg.out_dir, "train_layers.txt"), std::ios::binary);
    table << "layer  width  test_accuracy\n";
    for (const LayerLogRow& row : res.log) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%5zu  %5zu  %s\n", row.layer, row.width,
                      fmt_acc(row.test_accuracy).c_str());
        table << buf;
    }
    table.flush();

    KvReport kv;
    kv.add("train.layers", cfg.dan.layers);
    kv.add("train.classes", classes);
    kv.add("train.input_dim", tr.model.input_dim);
    for (const LayerLogRow& row : res.log)
        kv.add_acc("train.layer." + std::to_string(row.layer) + ".test_accuracy",
                   row.test_accuracy);
    kv.add("train.best_layer", res.best_layer);
    kv.add_acc("train.best_accuracy", res.best_accuracy);
    kv.add_acc("train.final_accuracy", res.final_accuracy);
    kv.write(join_path(cfg.out_dir, "train.kv"));
    return res;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

EvalResult cmd_eval(const std::string& model_path, const std::string& features_path,
                    const std::string& labels_path, const std::string& report_dir) {
    const DanModel model = io::load_model(model_path);
    const Matrix x = io::load_features(features_path);
    const std::vector<int> labels = io::load_idx_labels(labels_path);
    if (labels.size() != x.rows())
        throw CountMismatch("eval: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(x.rows()) + " feature rows");
    if (x.cols() != model.input_dim)
        throw DimensionMismatch("eval: feature dim " + std::to_string(x.cols()) +
                                " vs model input dim " +
                                std::to_string(model.input_dim));
    const std::size_t c = model.classes;
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= c)
            throw ClassIndexOutOfRange("eval: label " + std::to_string(l) +
                                       " outside model classes");

    const std::vector<int> preds = dan_predict(model, x);

    EvalResult res;
    res.n = x.rows();
    res.confusion.assign(c, std::vector<std::size_t>(c, 0));
    std::vector<std::size_t> class_total(c, 0);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto t = static_cast<std::size_t>(labels[i]);
        const auto p = static_cast<std::size_t>(preds[i]);
        ++res.confusion[t][p];
        ++class_total[t];
        if (t == p) ++hit;
    }
    res.accuracy = static_cast<double>(hit) / static_cast<double>(res.n);
    res.per_class_accuracy.assign(c, 0.0);
    for (std::size_t k = 0; k < c; ++k)
        if (class_total[k] > 0)
            res.per_class_accuracy[k] = static_cast<double>(res.confusion[k][k]) /
                                        static_cast<double>(class_total[k]);

    ensure_out_dir(report_dir);
    KvReport kv;
    kv.add("eval.n", res.n);
    kv.add_acc("eval.accuracy", res.accuracy);
    for (std::size_t k = 0; k < c; ++k)
        kv.add_acc("eval.class." + std::to_string(k) + ".accuracy",
                   res.per_class_accuracy[k]);
    kv.write(join_path(report_dir, "eval.kv"));

    std::ofstream table(join_path(report_dir, "confusion.txt"), std::ios::binary);
    table << "true\\pred";
    for (std::size_t k = 0; k < c; ++k) table << "\t" << k;
    table << "\n";
    for (std::size_t t = 0; t < c; ++t) {
        table << t;
        for (std::size_t p = 0; p < c; ++p) table << "\t" << res.confusion[t][p];
        table << "\n";
    }
    table.flush();
    return res;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

AblateResult cmd_ablate(const ExperimentConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg.out_dir);

    std::vector<int> y_train = load_split_labels(cfg, "train");
    std::vector<int> y_test = load_split_labels(cfg, "test");
    const std::size_t classes = class_count(y_train);

    // Heads are fitted per depth below, so both trainings run without one.
    DanHyper hyper_relu = cfg.dan;
    hyper_relu.relu_enabled = true;
    hyper_relu.ft_enabled = false;
    DanHyper hyper_lin = cfg.dan;
    hyper_lin.relu_enabled = false;
    hyper_lin.ft_enabled = false;

    DanTraining tr_relu, tr_lin;
    {
        Matrix x_train = io::load_features(train_features_path(cfg));
        if (y_train.size() != x_train.rows())
            throw CountMismatch("ablate: cached features disagree with subset labels");
        tr_relu = dan_train(x_train, y_train, classes, hyper_relu, HeadConfig{});
        tr_lin = dan_train(x_train, y_train, classes, hyper_lin, HeadConfig{});
    }

    Matrix x_test = io::load_features(test_features_path(cfg));
    if (y_test.size() != x_test.rows())
        throw CountMismatch("ablate: cached test features disagree with subset labels");
    const DanBatchForward fwd_relu = dan_forward_batch(tr_relu.model, x_test);
    const DanBatchForward fwd_lin = dan_forward_batch(tr_lin.model, x_test);
    const LabelMatrix lm = center_labels(y_train, classes);

    AblateResult res;
    for (std::size_t l = 1; l <= cfg.dan.layers; ++l) {
        const std::size_t width = l * classes;
        std::array<double, 4> row{};
        row[0] = accuracy_of(fwd_lin.raw[l - 1], tr_lin.model.class_ids, y_test);
        {
            Matrix w = ridge_fit(take_columns(tr_lin.q, width), lm.yc, cfg.dan.lambda_ft);
            row[1] = accuracy_of(matmul(take_columns(fwd_lin.q, width), w),
                                 tr_lin.model.class_ids, y_test);
        }
        row[2] = accuracy_of(fwd_relu.raw[l - 1], tr_relu.model.class_ids, y_test);
        {
            Matrix w = ridge_fit(take_columns(tr_relu.q, width), lm.yc, cfg.dan.lambda_ft);
            row[3] = accuracy_of(matmul(take_columns(fwd_relu.q, width), w),
                                 tr_relu.model.class_ids, y_test);
        }
        res.grid.push_back(row);
    }

    std::ofstream table(join_path(cfg.out_dir, "ablate.txt"), std::ios::binary);
    table << "layer  linear    w_ft      relu_only relu_ft\n";
    for (std::size_t l = 0; l < res.grid.size(); ++l) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%5zu  %s  %s  %s  %s\n", l + 1,
                      fmt_acc(res.grid[l][0]).c_str(), fmt_acc(res.grid[l][1]).c_str(),
                      fmt_acc(res.grid[l][2]).c_str(), fmt_acc(res.grid[l][3]).c_str());
        table << buf;
    }
    table.flush();

    KvReport kv;
    static const char* kCols[4] = {"linear", "w_ft", "relu_only", "relu_ft"};
    for (std::size_t l = 0; l < res.grid.size(); ++l)
        for (std::size_t j = 0; j < 4; ++j)
            kv.add_acc("ablate.layer." + std::to_string(l + 1) + "." + kCols[j],
                       res.grid[l][j]);
    kv.write(join_path(cfg.out_dir, "ablate.kv"));
    return res;
}

}  // namespace dan::cli
