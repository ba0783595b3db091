#pragma once

#include "dan/dan_core.hpp"
#include "dan/image.hpp"
#include "dan/matrix.hpp"
#include "dan/sh_features.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dan::io {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct ImageDataset {
    std::vector<Image> images;  // all share H, W, C; pixels in [0, 1]
    std::vector<int> labels;
    std::string name;
    std::string split;  // "train" | "test"
};

/// IDX-format pair (big-endian magics 0x803 images / 0x801 labels); pixel v
/// stored as v/255. Declared sizes are checked against the file length before
/// anything is allocated.
ImageDataset load_mnist_idx(const std::string& images_path,
                            const std::string& labels_path);

/// CIFAR-10 binary batches: 3073-byte records, 1 label byte + three 1024-byte
/// channel planes, reassembled to 32x32x3.
ImageDataset load_cifar10(const std::vector<std::string>& batch_paths);

/// Just the labels of an IDX label file (magic 0x801); the label source for
/// externally produced feature caches.
std::vector<int> load_idx_labels(const std::string& labels_path);

/// Writes labels in the IDX label format (values must fit a byte), so subset
/// label files round-trip through the same loader as the originals.
void save_idx_labels(const std::string& labels_path, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Persistence containers. All three are little-endian with a magic, a u32
// version, and a trailing CRC-32 over every preceding byte; loaders validate
// the total size exactly and reject any checksum mismatch.
// ---------------------------------------------------------------------------

/// "SHFB": filter bank (L, patch_h, patch_w, channels, then the filter rows).
void save_filter_bank(const std::string& path, const sh::FilterBank& bank);
sh::FilterBank load_filter_bank(const std::string& path);

/// "SHFM": feature-matrix cache (n, d, row-major values).
void save_features(const std::string& path, const Matrix& x);
Matrix load_features(const std::string& path);

/// "DANM": trained model (hyper block, per-layer weights, head block).
void save_model(const std::string& path, const DanModel& model);
DanModel load_model(const std::string& path);

/// IEEE CRC-32 (the zlib polynomial), exposed for fixture tests.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace dan::io
