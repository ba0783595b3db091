#pragma once

#include "dan/image.hpp"
#include "dan/matrix.hpp"

#include <cstdint>
#include <cstddef>
#include <vector>

namespace dan::sh {

enum class Pooling { blocks, pyramid };

/// Extra scale applied to every row after unit ell-2 normalization. The
/// normalization convention is configurable because a global 1/N (or 1/sqrt N)
/// factor interacts with the ridge regularizer.
enum class NormScale { one, inv_n, inv_sqrt_n };

/// Full feature-pipeline configuration: two convolution stages, binary
/// hashing, histogram pooling.
struct ShConfig {
    std::size_t patch_h = 7;
    std::size_t patch_w = 7;
    std::size_t stage1_filters = 8;  // L1
    std::size_t stage2_filters = 8;  // L2, bounded by the 32-bit code word
    std::size_t block_h = 7;
    std::size_t block_w = 7;
    double block_overlap = 0.5;  // in [0, 1)
    Pooling pooling = Pooling::blocks;
    std::vector<std::size_t> pyramid_levels = {4, 2, 1};
    bool pad = true;
    NormScale norm_scale = NormScale::one;

    std::size_t histogram_bins() const { return std::size_t{1} << stage2_filters; }

    /// Throws ConfigError on out-of-contract values (even patch, L2 > 31, ...).
    void validate() const;
};

struct FilterBank {
    enum class Origin { pca_learned, loaded };

    std::size_t patch_h = 0;
    std::size_t patch_w = 0;
    std::size_t channels = 1;
    Matrix weights;  // L x (patch_h * patch_w * channels), one filter per row
    Origin origin = Origin::pca_learned;

    std::size_t filter_count() const { return weights.rows(); }
};

/// Per-pixel hash codes in [0, 2^L2 - 1].
struct CodeMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> codes;  // row-major

    std::uint32_t at(std::size_t y, std::size_t x) const { return codes[y * width + x]; }
};

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

/// All sliding patches (stride fixed spacing, row-major scan), vectorized as
/// (y, x, channel) with the per-patch mean subtracted from each row.
Matrix extract_patches(const Image& image, std::size_t patch_h, std::size_t patch_w,
                       std::size_t stride = 1);

/// PCA filters from the aggregate patch covariance of the sample set.
/// For stage 2 the samples are the stage-1 response maps (single channel).
/// Deterministic: fixed sample order, largest-magnitude entry of each filter
/// flipped positive. Throws DegenerateData when the covariance rank is below
/// the requested filter count.
FilterBank learn_pca_filters(const std::vector<Image>& samples, const ShConfig& cfg,
                             int stage);

/// Correlation (no kernel flip) of the image with every filter in the bank;
/// channels are summed. pad=true zero-pads by (patch-1)/2 so maps keep the
/// input's spatial size, pad=false yields valid-region maps.
std::vector<Matrix> convolve_bank(const Image& image, const FilterBank& bank, bool pad);

/// codes(x, y) = sum_i 2^(i-1) * [map_i(x, y) > 0]; exact zeros hash to 0.
CodeMap binarize_hash(const std::vector<Matrix>& stage2_maps);

/// One 2^L2-bin histogram per block, blocks tiled at
/// stride = max(1, round(block * (1 - overlap))), concatenated in row-major
/// block order. Entries are raw pixel counts.
std::vector<double> block_histogram(const CodeMap& code, const ShConfig& cfg);

/// Spatial pyramid: for each level g, one histogram per cell of a g x g
/// partition (cell sizes equal within one pixel), concatenated in the order
/// the levels are given (conventionally finest to coarsest).
std::vector<double> spp_histogram(const CodeMap& code,
                                  const std::vector<std::size_t>& levels,
                                  std::size_t bins);

/// Full pipeline for one image: stage-1 convolution -> per-map stage-2
/// convolution -> binary hash per stage-1 channel -> pooled histograms,
/// concatenated over stage-1 channels.
std::vector<double> extract_sh(const Image& image, const FilterBank& stage1,
                               const FilterBank& stage2, const ShConfig& cfg);

/// Pooled-cell count for this config given the code-map size.
std::size_t pooling_cells(const ShConfig& cfg, std::size_t map_h, std::size_t map_w);

/// Output dimension of extract_sh for images of the given size.
std::size_t feature_dim(const ShConfig& cfg, std::size_t image_h, std::size_t image_w);

/// Batch extraction, one row per image (input order), parallel over images.
Matrix extract_features(const std::vector<Image>& images, const FilterBank& stage1,
                        const FilterBank& stage2, const ShConfig& cfg);

/// Scales every nonzero row to unit ell-2 norm (then by the configured extra
/// factor); zero rows are left zero and their indices returned.
std::vector<std::size_t> l2_normalize_rows(Matrix& x, NormScale scale = NormScale::one);

/// Stage-1 response maps of every image, flattened in (image, filter) order;
/// the sample set for stage-2 filter learning.
std::vector<Image> stage1_response_maps(const std::vector<Image>& images,
                                        const FilterBank& stage1, const ShConfig& cfg);

}  // namespace dan::sh
