#pragma once

#include "dan/dan_core.hpp"
#include "dan/matrix.hpp"
#include "dan/sh_features.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dan::cli {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DatasetConfig {
    std::string kind = "mnist";  // mnist | cifar10 | shfm
    // mnist: IDX pairs. shfm: pre-extracted feature caches + IDX label files.
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    std::string train_features;
    std::string test_features;
    std::vector<std::string> cifar_train_batches;
    std::vector<std::string> cifar_test_batches;
    std::size_t subset_train = 0;  // 0 = full split
    std::size_t subset_test = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    sh::ShConfig sh;
    DanHyper dan = DanHyper::uniform(10, 10.0, 10.0, 0.6);
    HeadConfig head;
    std::size_t pca_dim = 0;  // 0 = no compression
    std::string out_dir = "out";

    /// Named hyper-parameter presets (feret, mnist, cifar10).
    static ExperimentConfig preset(const std::string& name);

    /// Cross-field checks (seed present when subsetting, paths for the kind).
    void validate() const;
};

/// Applies one key=value pair; unknown keys are rejected with ConfigError.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

/// Parses a key=value config file ('#' comments) on top of `base`.
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base);

// ---------------------------------------------------------------------------
// Deterministic stratified subsetting
// ---------------------------------------------------------------------------

/// Picks `count` indices stratified by class (proportional quotas, largest
/// remainder), shuffled per class with the seed, returned ascending. count = 0
/// or count >= labels.size() selects everything.
std::vector<std::size_t> stratified_subset(const std::vector<int>& labels,
                                           std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Commands. Each is a pure function of (config, input files, seed); the
// cmd_* wrappers also write the report artifacts under out_dir.
// ---------------------------------------------------------------------------

struct ExtractResult {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t dim = 0;
    std::size_t zero_rows = 0;
};

struct BaselineResult {
    double accuracy = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

struct LayerLogRow {
    std::size_t layer = 0;
    std::size_t width = 0;  // D_l
    double test_accuracy = 0.0;
};

struct TrainResult {
    std::vector<LayerLogRow> log;
    double final_accuracy = 0.0;
    std::size_t best_layer = 0;
    double best_accuracy = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::size_t n = 0;
};

/// Ablation grid row: LINEAR, W/ FT, W/ RELU ONLY, W/ RELU + W/ FT.
struct AblateResult {
    std::vector<std::array<double, 4>> grid;  // one row per layer depth
};

ExtractResult cmd_extract(const ExperimentConfig& cfg);
BaselineResult cmd_baseline(const ExperimentConfig& cfg);
TrainResult cmd_train(const ExperimentConfig& cfg);
EvalResult cmd_eval(const std::string& model_path, const std::string& features_path,
                    const std::string& labels_path, const std::string& report_dir);
AblateResult cmd_ablate(const ExperimentConfig& cfg);

/// Labels of the requested split ("train"/"test"), already subset exactly the
/// way cmd_extract subsets images.
std::vector<int> load_split_labels(const ExperimentConfig& cfg, const std::string& split);

/// Rank-1 accuracy of cosine 1-NN, brute force over all pairs.
double cosine_nn_accuracy(const Matrix& train_x, const std::vector<int>& train_y,
                          const Matrix& test_x, const std::vector<int>& test_y);

}  // namespace dan::cli
