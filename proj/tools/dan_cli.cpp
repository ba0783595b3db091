// Experiment front end: feature extraction, nearest-neighbor baselines,
// layer-stacked ridge training with ablation flags, and evaluation reports.

#include "dan/errors.hpp"
#include "dan/experiment.hpp"
#include "dan/kernels.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

namespace {

struct CommonFlags {
    std::string config;
    std::string preset;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t subset_train = 0, subset_test = 0;
    bool subset_train_set = false, subset_test_set = false;
    std::size_t layers = 0;
    std::string head;
    bool no_relu = false, no_ft = false;
    double beta = -1.0;
    double lambda = -1.0;
    long long pca_dim = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key=value config file");
    cmd->add_option("--preset", f.preset, "named preset: feret, mnist, cifar10");
    cmd->add_option("--out", f.out_dir, "output directory for artifacts and reports");
    cmd->add_option("--seed", f.seed, "subsetting seed")->each([&](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--subset-train", f.subset_train, "stratified training subset size")
        ->each([&](const std::string&) { f.subset_train_set = true; });
    cmd->add_option("--subset-test", f.subset_test, "stratified test subset size")
        ->each([&](const std::string&) { f.subset_test_set = true; });
    cmd->add_option("--layers", f.layers, "network depth L");
    cmd->add_option("--head", f.head, "output head: ridge | svm");
    cmd->add_flag("--no-relu", f.no_relu, "disable the ReLU rectification");
    cmd->add_flag("--no-ft", f.no_ft, "disable the fine-tuning output layer");
    cmd->add_option("--beta", f.beta, "power-normalization exponent");
    cmd->add_option("--lambda", f.lambda, "ridge parameter for every layer");
    cmd->add_option("--pca-dim", f.pca_dim, "PCA compression target (0 disables)");
}

dan::cli::ExperimentConfig build_config(const CommonFlags& f) {
    dan::cli::ExperimentConfig cfg;
    if (!f.preset.empty()) cfg = dan::cli::ExperimentConfig::preset(f.preset);
    if (!f.config.empty()) cfg = dan::cli::load_config_file(f.config, cfg);
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.seed_set) {
        cfg.dataset.seed = f.seed;
        cfg.dataset.seed_set = true;
    }
    if (f.subset_train_set) cfg.dataset.subset_train = f.subset_train;
    if (f.subset_test_set) cfg.dataset.subset_test = f.subset_test;
    if (f.layers > 0)
        dan::cli::apply_config_entry(cfg, "dan.layers", std::to_string(f.layers));
    if (!f.head.empty()) dan::cli::apply_config_entry(cfg, "head.kind", f.head);
    if (f.no_relu) cfg.dan.relu_enabled = false;
    if (f.no_ft) cfg.dan.ft_enabled = false;
    if (f.beta >= 0.0) cfg.dan.beta = f.beta;
    if (f.lambda >= 0.0) cfg.dan.lambda.assign(cfg.dan.layers, f.lambda);
    if (f.pca_dim >= 0) cfg.pca_dim = static_cast<std::size_t>(f.pca_dim);
    return cfg;
}

// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
int classify_error(const std::exception& e) {
    if (dynamic_cast<const dan::ConfigError*>(&e)) return 1;
    if (dynamic_cast<const dan::IoError*>(&e)) return 2;
    if (dynamic_cast<const dan::DimensionMismatch*>(&e)) return 2;
    if (dynamic_cast<const dan::EmptyInput*>(&e)) return 2;
    if (dynamic_cast<const dan::ClassIndexOutOfRange*>(&e)) return 2;
    if (dynamic_cast<const dan::ImageTooSmall*>(&e)) return 2;
    if (dynamic_cast<const dan::BlockTooLarge*>(&e)) return 2;
    if (dynamic_cast<const dan::GridTooFine*>(&e)) return 2;
    return 3;  // NotPositiveDefinite, NoConvergence, DegenerateData, ...
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep analytic network on spectral-histogram features"};
    app.require_subcommand(1);

    CommonFlags f;
    std::string model_path, features_path, labels_path, report_dir = "out";

    CLI::App* c_extract =
        app.add_subcommand("extract", "learn filter banks and cache features");
    add_common(c_extract, f);

    CLI::App* c_baseline =
        app.add_subcommand("baseline", "cosine 1-NN over cached features");
    add_common(c_baseline, f);

    CLI::App* c_train =
        app.add_subcommand("train", "train the stacked model, log per-layer accuracy");
    add_common(c_train, f);

    CLI::App* c_ablate =
        app.add_subcommand("ablate", "linear / +FT / +ReLU / +ReLU+FT grid");
    add_common(c_ablate, f);

    CLI::App* c_eval = app.add_subcommand("eval", "evaluate a saved model");
    c_eval->add_option("--model", model_path, "DANM model file")->required();
    c_eval->add_option("--features", features_path, "SHFM feature file")->required();
    c_eval->add_option("--labels", labels_path, "IDX label file")->required();
    c_eval->add_option("--report", report_dir, "report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_extract->parsed()) {
            const auto cfg = build_config(f);
            const auto res = dan::cli::cmd_extract(cfg);
            std::printf("extracted %zu train / %zu test rows, dim %zu (%zu zero rows)\n",
                        res.n_train, res.n_test, res.dim, res.zero_rows);
        } else if (c_baseline->parsed()) {
            const auto cfg = build_config(f);
            const auto res = dan::cli::cmd_baseline(cfg);
            std::printf("cosine 1-NN rank-1 accuracy: %.4f (%zu train, %zu test)\n",
                        res.accuracy, res.n_train, res.n_test);
        } else if (c_train->parsed()) {
            const auto cfg = build_config(f);
            const auto res = dan::cli::cmd_train(cfg);
            for (const auto& row : res.log)
                std::printf("layer %2zu  width %6zu  test accuracy %.4f\n", row.layer,
                            row.width, row.test_accuracy);
            std::printf("best layer %zu: %.4f\n", res.best_layer, res.best_accuracy);
        } else if (c_ablate->parsed()) {
            const auto cfg = build_config(f);
            const auto res = dan::cli::cmd_ablate(cfg);
            std::printf("layer  linear   w_ft     relu     relu_ft\n");
            for (std::size_t l = 0; l < res.grid.size(); ++l)
                std::printf("%5zu  %.4f   %.4f   %.4f   %.4f\n", l + 1, res.grid[l][0],
                            res.grid[l][1], res.grid[l][2], res.grid[l][3]);
        } else if (c_eval->parsed()) {
            const auto res =
                dan::cli::cmd_eval(model_path, features_path, labels_path, report_dir);
            std::printf("rank-1 accuracy: %.4f over %zu samples\n", res.accuracy, res.n);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return classify_error(e);
    }
    return 0;
}
