#include "dan/errors.hpp"
#include "dan/experiment.hpp"
#include "dan/rng.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace dan::cli {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: " + key + " expects a boolean, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
    return x;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: " + key + " expects an unsigned integer, got '" + v +
                          "'");
    return x;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        // trim
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
    // dataset.*
    if (key == "dataset.kind") {
        if (value != "mnist" && value != "cifar10" && value != "shfm")
            throw ConfigError("config: unknown dataset.kind '" + value + "'");
        cfg.dataset.kind = value;
    } else if (key == "dataset.train_images") cfg.dataset.train_images = value;
    else if (key == "dataset.train_labels") cfg.dataset.train_labels = value;
    else if (key == "dataset.test_images") cfg.dataset.test_images = value;
    else if (key == "dataset.test_labels") cfg.dataset.test_labels = value;
    else if (key == "dataset.train_features") cfg.dataset.train_features = value;
    else if (key == "dataset.test_features") cfg.dataset.test_features = value;
    else if (key == "dataset.cifar_train_batches")
        cfg.dataset.cifar_train_batches = split_list(value);
    else if (key == "dataset.cifar_test_batches")
        cfg.dataset.cifar_test_batches = split_list(value);
    else if (key == "dataset.subset_train")
        cfg.dataset.subset_train = parse_u64(value, key);
    else if (key == "dataset.subset_test")
        cfg.dataset.subset_test = parse_u64(value, key);
    else if (key == "dataset.seed") {
        cfg.dataset.seed = parse_u64(value, key);
        cfg.dataset.seed_set = true;
    }
    // sh.*
    else if (key == "sh.patch_h") cfg.sh.patch_h = parse_u64(value, key);
    else if (key == "sh.patch_w") cfg.sh.patch_w = parse_u64(value, key);
    else if (key == "sh.stage1_filters") cfg.sh.stage1_filters = parse_u64(value, key);
    else if (key == "sh.stage2_filters") cfg.sh.stage2_filters = parse_u64(value, key);
    else if (key == "sh.block_h") cfg.sh.block_h = parse_u64(value, key);
    else if (key == "sh.block_w") cfg.sh.block_w = parse_u64(value, key);
    else if (key == "sh.block_overlap") cfg.sh.block_overlap = parse_double(value, key);
    else if (key == "sh.pooling") {
        if (value == "blocks") cfg.sh.pooling = sh::Pooling::blocks;
        else if (value == "pyramid") cfg.sh.pooling = sh::Pooling::pyramid;
        else throw ConfigError("config: sh.pooling must be 'blocks' or 'pyramid'");
    } else if (key == "sh.pyramid_levels") {
        cfg.sh.pyramid_levels.clear();
        for (const std::string& s : split_list(value))
            cfg.sh.pyramid_levels.push_back(parse_u64(s, key));
    } else if (key == "sh.pad") cfg.sh.pad = parse_bool(value, key);
    else if (key == "sh.norm_scale") {
        if (value == "1") cfg.sh.norm_scale = sh::NormScale::one;
        else if (value == "1/n") cfg.sh.norm_scale = sh::NormScale::inv_n;
        else if (value == "1/sqrt_n") cfg.sh.norm_scale = sh::NormScale::inv_sqrt_n;
        else
            throw ConfigError("config: sh.norm_scale must be '1', '1/n' or '1/sqrt_n'");
    }
    // dan.*
    else if (key == "dan.layers") {
        const std::size_t old = cfg.dan.layers;
        cfg.dan.layers = parse_u64(value, key);
        if (cfg.dan.lambda.size() == old && !cfg.dan.lambda.empty())
            cfg.dan.lambda.assign(cfg.dan.layers, cfg.dan.lambda.front());
    } else if (key == "dan.lambda") {
        const std::vector<std::string> parts = split_list(value);
        if (parts.size() == 1) {
            cfg.dan.lambda.assign(cfg.dan.layers, parse_double(parts[0], key));
        } else {
            cfg.dan.lambda.clear();
            for (const std::string& s : parts)
                cfg.dan.lambda.push_back(parse_double(s, key));
        }
    } else if (key == "dan.lambda_ft") cfg.dan.lambda_ft = parse_double(value, key);
    else if (key == "dan.beta") cfg.dan.beta = parse_double(value, key);
    else if (key == "dan.relu") cfg.dan.relu_enabled = parse_bool(value, key);
    else if (key == "dan.ft") cfg.dan.ft_enabled = parse_bool(value, key);
    else if (key == "dan.max_width") cfg.dan.max_layer_width = parse_u64(value, key);
    // head.*
    else if (key == "head.kind") {
        if (value == "ridge") cfg.head.kind = HeadKind::ridge_ft;
        else if (value == "svm") cfg.head.kind = HeadKind::linear_svm;
        else throw ConfigError("config: head.kind must be 'ridge' or 'svm'");
    } else if (key == "head.svm_c") cfg.head.svm_c_penalty = parse_double(value, key);
    else if (key == "head.svm_input") {
        if (value == "pnorm") cfg.head.svm_on_pnorm = true;
        else if (value == "raw") cfg.head.svm_on_pnorm = false;
        else throw ConfigError("config: head.svm_input must be 'pnorm' or 'raw'");
    }
    // misc
    else if (key == "pca.dim") cfg.pca_dim = parse_u64(value, key);
    else if (key == "out.dir") cfg.out_dir = value;
    else
        throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t\r\n");
            if (x == std::string::npos) return std::string();
            const auto y = s.find_last_not_of(" \t\r\n");
            return s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                              ": empty key");
        apply_config_entry(base, key, value);
    }
    return base;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    ExperimentConfig cfg;
    if (name == "mnist") {
        cfg.dataset.kind = "mnist";
        cfg.dataset.train_images = "data/mnist/train-images-idx3-ubyte";
        cfg.dataset.train_labels = "data/mnist/train-labels-idx1-ubyte";
        cfg.dataset.test_images = "data/mnist/t10k-images-idx3-ubyte";
        cfg.dataset.test_labels = "data/mnist/t10k-labels-idx1-ubyte";
        cfg.sh.patch_h = cfg.sh.patch_w = 7;
        cfg.sh.stage1_filters = cfg.sh.stage2_filters = 8;
        cfg.sh.block_h = cfg.sh.block_w = 7;
        cfg.sh.block_overlap = 0.5;
        cfg.sh.pooling = sh::Pooling::blocks;
        cfg.sh.pad = true;
        cfg.dan = DanHyper::uniform(10, 10.0, 10.0, 0.6);
        cfg.head.kind = HeadKind::ridge_ft;
        cfg.out_dir = "out/mnist";
    } else if (name == "cifar10") {
        cfg.dataset.kind = "cifar10";
        cfg.dataset.cifar_train_batches = {
            "data/cifar10/data_batch_1.bin", "data/cifar10/data_batch_2.bin",
            "data/cifar10/data_batch_3.bin", "data/cifar10/data_batch_4.bin",
            "data/cifar10/data_batch_5.bin"};
        cfg.dataset.cifar_test_batches = {"data/cifar10/test_batch.bin"};
        cfg.sh.patch_h = cfg.sh.patch_w = 5;
        cfg.sh.stage1_filters = 40;
        cfg.sh.stage2_filters = 8;
        cfg.sh.pooling = sh::Pooling::pyramid;
        cfg.sh.pyramid_levels = {4, 2, 1};
        cfg.sh.pad = true;
        cfg.dan = DanHyper::uniform(10, 10.0, 10.0, 0.6);
        cfg.head.kind = HeadKind::linear_svm;
        cfg.head.svm_c_penalty = 10.0;
        cfg.pca_dim = 5000;
        cfg.out_dir = "out/cifar10";
    } else if (name == "feret") {
        // The image corpus is access-restricted; features arrive as SHFM caches.
        cfg.dataset.kind = "shfm";
        cfg.dan = DanHyper::uniform(10, 0.1, 0.1, 0.5);
        cfg.head.kind = HeadKind::ridge_ft;
        cfg.out_dir = "out/feret";
    } else {
        throw ConfigError("unknown preset '" + name + "' (feret, mnist, cifar10)");
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    sh.validate();
    dan.validate();
    if ((dataset.subset_train > 0 || dataset.subset_test > 0) && !dataset.seed_set)
        throw ConfigError("config: subsetting requires an explicit dataset.seed");
    if (dataset.kind == "mnist") {
        if (dataset.train_images.empty() || dataset.train_labels.empty())
            throw ConfigError("config: mnist dataset needs train image/label paths");
    } else if (dataset.kind == "cifar10") {
        if (dataset.cifar_train_batches.empty())
            throw ConfigError("config: cifar10 dataset needs train batch paths");
    } else if (dataset.kind == "shfm") {
        if (dataset.train_features.empty() || dataset.train_labels.empty())
            throw ConfigError("config: shfm dataset needs feature and label paths");
    }
    if (head.kind == HeadKind::linear_svm && head.svm_c_penalty <= 0.0)
        throw ConfigError("config: head.svm_c must be positive");
}

// ---------------------------------------------------------------------------
// Stratified subsetting
// ---------------------------------------------------------------------------

std::vector<std::size_t> stratified_subset(const std::vector<int>& labels,
                                           std::size_t count, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (count == 0 || count >= n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }

    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

    std::vector<std::vector<std::size_t>> per_class(classes);
    for (std::size_t i = 0; i < n; ++i)
        per_class[static_cast<std::size_t>(labels[i])].push_back(i);

    // Proportional quotas, remainders to the largest fractional parts
    // (ties to the lower class index).
    std::vector<std::size_t> quota(classes, 0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double exact = static_cast<double>(count) *
                             static_cast<double>(per_class[c].size()) /
                             static_cast<double>(n);
        quota[c] = std::min<std::size_t>(static_cast<std::size_t>(exact),
                                         per_class[c].size());
        assigned += quota[c];
        frac.emplace_back(exact - static_cast<double>(quota[c]), c);
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [f, c] : frac) {
        if (assigned >= count) break;
        if (quota[c] < per_class[c].size()) {
            ++quota[c];
            ++assigned;
        }
    }
    // If some classes ran dry, fill from classes with spare samples.
    for (std::size_t c = 0; c < classes && assigned < count; ++c) {
        while (quota[c] < per_class[c].size() && assigned < count) {
            ++quota[c];
            ++assigned;
        }
    }

    std::vector<std::size_t> picked;
    picked.reserve(count);
    for (std::size_t c = 0; c < classes; ++c) {
        Rng rng(seed * 0x9e3779b97f4a7c15ULL + c + 1);
        std::vector<std::size_t>& idx = per_class[c];
        rng.shuffle(idx);
        picked.insert(picked.end(), idx.begin(), idx.begin() + quota[c]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace dan::cli
