#include "dan/sh_features.hpp"

#include "dan/errors.hpp"
#include "dan/kernels.hpp"
#include "dan/numerics.hpp"
#include "dan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace dan::sh {

void ShConfig::validate() const {
    if (patch_h < 3 || patch_w < 3 || patch_h % 2 == 0 || patch_w % 2 == 0)
        throw ConfigError("sh: patch dims must be odd and >= 3");
    if (stage1_filters < 1 || stage2_filters < 1)
        throw ConfigError("sh: filter counts must be >= 1");
    if (stage2_filters > 31)
        throw ConfigError("sh: stage2_filters > 31 overflows the code word");
    if (block_h < 1 || block_w < 1)
        throw ConfigError("sh: block dims must be >= 1");
    if (!(block_overlap >= 0.0 && block_overlap < 1.0))
        throw ConfigError("sh: block_overlap must lie in [0, 1)");
    if (pooling == Pooling::pyramid) {
        if (pyramid_levels.empty())
            throw ConfigError("sh: pyramid pooling needs at least one level");
        for (std::size_t g : pyramid_levels)
            if (g < 1) throw ConfigError("sh: pyramid level must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// Patches
// ---------------------------------------------------------------------------

Matrix extract_patches(const Image& image, std::size_t patch_h, std::size_t patch_w,
                       std::size_t stride) {
    if (image.height < patch_h || image.width < patch_w)
        throw ImageTooSmall("extract_patches: image " + std::to_string(image.height) +
                            "x" + std::to_string(image.width) + " below patch " +
                            std::to_string(patch_h) + "x" + std::to_string(patch_w));
    if (stride < 1) stride = 1;
    const std::size_t ch = image.channels;
    const std::size_t ny = (image.height - patch_h) / stride + 1;
    const std::size_t nx = (image.width - patch_w) / stride + 1;
    const std::size_t dim = patch_h * patch_w * ch;

    Matrix out(ny * nx, dim);
    std::size_t r = 0;
    for (std::size_t y0 = 0; y0 < ny * stride; y0 += stride) {
        for (std::size_t x0 = 0; x0 < nx * stride; x0 += stride, ++r) {
            double* row = out.row(r);
            std::size_t k = 0;
            double mean = 0.0;
            for (std::size_t u = 0; u < patch_h; ++u)
                for (std::size_t v = 0; v < patch_w; ++v)
                    for (std::size_t c = 0; c < ch; ++c, ++k) {
                        const double val = image.at(y0 + u, x0 + v, c);
                        row[k] = val;
                        mean += val;
                    }
            mean /= static_cast<double>(dim);
            for (std::size_t i = 0; i < dim; ++i) row[i] -= mean;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filter learning
// ---------------------------------------------------------------------------

FilterBank learn_pca_filters(const std::vector<Image>& samples, const ShConfig& cfg,
                             int stage) {
    cfg.validate();
    if (stage != 1 && stage != 2)
        throw ConfigError("learn_pca_filters: stage must be 1 or 2");
    if (samples.empty()) throw EmptyInput("learn_pca_filters: no samples");

    const std::size_t ch = samples.front().channels;
    if (stage == 2 && ch != 1)
        throw DimensionMismatch("learn_pca_filters: stage-2 samples must be single-channel");
    for (const Image& im : samples)
        if (im.channels != ch)
            throw DimensionMismatch("learn_pca_filters: mixed channel counts");

    const std::size_t filters = stage == 1 ? cfg.stage1_filters : cfg.stage2_filters;
    const std::size_t dim = cfg.patch_h * cfg.patch_w * ch;
    if (filters > dim)
        throw DimensionMismatch("learn_pca_filters: " + std::to_string(filters) +
                                " filters exceed patch dimension " + std::to_string(dim));

    // Aggregate scatter and column sums over all patches, accumulated in
    // chunks so the SYRK sees long panels.
    Matrix scatter(dim, dim);
    std::vector<double> colsum(dim, 0.0);
    std::size_t total = 0;

    const std::size_t chunk_rows = 8192;
    std::vector<double> chunk;
    chunk.reserve(chunk_rows * dim);
    std::size_t rows_in_chunk = 0;

    auto flush = [&]() {
        if (rows_in_chunk == 0) return;
        kernels::syrk_lower(true, dim, rows_in_chunk, 1.0, chunk.data(), dim, 1.0,
                            scatter.data(), dim);
        chunk.clear();
        rows_in_chunk = 0;
    };

    for (const Image& im : samples) {
        Matrix p = extract_patches(im, cfg.patch_h, cfg.patch_w, 1);
        for (std::size_t r = 0; r < p.rows(); ++r) {
            kernels::axpy(1.0, p.row(r), colsum.data(), dim);
            chunk.insert(chunk.end(), p.row(r), p.row(r) + dim);
            if (++rows_in_chunk == chunk_rows) flush();
        }
        total += p.rows();
    }
    flush();

    // Covariance of the patch ensemble: E[p p^T] - mu mu^T (lower triangle).
    const double inv_m = 1.0 / static_cast<double>(total);
    std::vector<double> mu(dim);
    for (std::size_t i = 0; i < dim; ++i) mu[i] = colsum[i] * inv_m;
    for (std::size_t i = 0; i < dim; ++i) {
        double* row = scatter.row(i);
        for (std::size_t j = 0; j <= i; ++j) row[j] = row[j] * inv_m - mu[i] * mu[j];
    }
    symmetrize_from_lower(scatter);

    SymEig eig = sym_eig_top_k(scatter, filters);
    const double lmax = std::max(eig.values[0], 0.0);
    const double tol = std::max(lmax * 1e-10, 1e-14);
    for (std::size_t i = 0; i < filters; ++i)
        if (!(eig.values[i] > tol))
            throw DegenerateData("learn_pca_filters: patch covariance rank " +
                                 std::to_string(i) + " below requested " +
                                 std::to_string(filters));

    FilterBank bank;
    bank.patch_h = cfg.patch_h;
    bank.patch_w = cfg.patch_w;
    bank.channels = ch;
    bank.origin = FilterBank::Origin::pca_learned;
    bank.weights = std::move(eig.vectors);

    // Fixed sign: largest-magnitude entry positive.
    for (std::size_t i = 0; i < filters; ++i) {
        double* row = bank.weights.row(i);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < dim; ++j)
            if (std::fabs(row[j]) > std::fabs(row[arg])) arg = j;
        if (row[arg] < 0.0) kernels::scale(-1.0, row, dim);
    }
    return bank;
}

// ---------------------------------------------------------------------------
// Convolution (correlation convention)
// ---------------------------------------------------------------------------

std::vector<Matrix> convolve_bank(const Image& image, const FilterBank& bank, bool pad) {
    if (bank.channels != image.channels)
        throw DimensionMismatch("convolve_bank: bank has " + std::to_string(bank.channels) +
                                " channels, image has " + std::to_string(image.channels));
    const std::size_t ph = bank.patch_h, pw = bank.patch_w;
    if (!pad && (image.height < ph || image.width < pw))
        throw DimensionMismatch("convolve_bank: filter does not fit unpadded image");

    const std::size_t oh = pad ? image.height : image.height - ph + 1;
    const std::size_t ow = pad ? image.width : image.width - pw + 1;
    const std::size_t off_h = pad ? (ph - 1) / 2 : 0;
    const std::size_t off_w = pad ? (pw - 1) / 2 : 0;
    const std::size_t ch = image.channels;

    // Channel planes, contiguous rows, so the inner loop is a plain axpy.
    std::vector<std::vector<double>> planes(ch,
                                            std::vector<double>(image.height * image.width));
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < image.width; ++x)
            for (std::size_t c = 0; c < ch; ++c)
                planes[c][y * image.width + x] = image.at(y, x, c);

    std::vector<Matrix> maps;
    maps.reserve(bank.filter_count());
    for (std::size_t f = 0; f < bank.filter_count(); ++f) {
        Matrix out(oh, ow);
        const double* w = bank.weights.row(f);
        for (std::size_t u = 0; u < ph; ++u) {
            for (std::size_t v = 0; v < pw; ++v) {
                // Output columns whose input column x0 = ox + v - off_w is valid.
                const std::size_t ox_lo =
                    off_w > v ? off_w - v : 0;
                const std::size_t ox_hi_excl =
                    std::min(ow, image.width + off_w >= v ? image.width + off_w - v
                                                          : std::size_t{0});
                if (ox_lo >= ox_hi_excl) continue;
                for (std::size_t c = 0; c < ch; ++c) {
                    const double wv = w[(u * pw + v) * ch + c];
                    if (wv == 0.0) continue;
                    const double* plane = planes[c].data();
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const std::size_t iy = oy + u;
                        if (iy < off_h) continue;
                        const std::size_t y_in = iy - off_h;
                        if (y_in >= image.height) break;
                        const double* src =
                            plane + y_in * image.width + (ox_lo + v - off_w);
                        kernels::axpy(wv, src, out.row(oy) + ox_lo, ox_hi_excl - ox_lo);
                    }
                }
            }
        }
        maps.push_back(std::move(out));
    }
    return maps;
}

// ---------------------------------------------------------------------------
// Hashing and pooling
// ---------------------------------------------------------------------------

CodeMap binarize_hash(const std::vector<Matrix>& stage2_maps) {
    if (stage2_maps.empty())
        throw DimensionMismatch("binarize_hash: no maps");
    if (stage2_maps.size() > 31)
        throw DimensionMismatch("binarize_hash: more than 31 maps overflow the code word");
    const std::size_t h = stage2_maps.front().rows();
    const std::size_t w = stage2_maps.front().cols();
    for (const Matrix& m : stage2_maps)
        if (m.rows() != h || m.cols() != w)
            throw DimensionMismatch("binarize_hash: maps disagree on spatial size");

    CodeMap code;
    code.height = h;
    code.width = w;
    code.codes.assign(h * w, 0);
    for (std::size_t i = 0; i < stage2_maps.size(); ++i) {
        const double* m = stage2_maps[i].data();
        const std::uint32_t bit = std::uint32_t{1} << i;
        for (std::size_t p = 0; p < h * w; ++p)
            if (m[p] > 0.0) code.codes[p] |= bit;
    }
    return code;
}

namespace {

std::size_t block_stride(std::size_t block, double overlap) {
    const auto s = static_cast<std::size_t>(
        std::llround(static_cast<double>(block) * (1.0 - overlap)));
    return std::max<std::size_t>(1, s);
}

void accumulate_cell(const CodeMap& code, std::size_t y0, std::size_t y1, std::size_t x0,
                     std::size_t x1, std::size_t bins, double* hist) {
    for (std::size_t y = y0; y < y1; ++y) {
        const std::uint32_t* row = code.codes.data() + y * code.width;
        for (std::size_t x = x0; x < x1; ++x) {
            const std::uint32_t c = row[x];
            if (c >= bins)
                throw DimensionMismatch("histogram: code " + std::to_string(c) +
                                        " exceeds bin count " + std::to_string(bins));
            hist[c] += 1.0;
        }
    }
}

}  // namespace

std::vector<double> block_histogram(const CodeMap& code, const ShConfig& cfg) {
    if (cfg.block_h > code.height || cfg.block_w > code.width)
        throw BlockTooLarge("block_histogram: block " + std::to_string(cfg.block_h) + "x" +
                            std::to_string(cfg.block_w) + " exceeds map " +
                            std::to_string(code.height) + "x" + std::to_string(code.width));
    const std::size_t bins = cfg.histogram_bins();
    const std::size_t sy = block_stride(cfg.block_h, cfg.block_overlap);
    const std::size_t sx = block_stride(cfg.block_w, cfg.block_overlap);

    std::vector<double> out;
    for (std::size_t y0 = 0; y0 + cfg.block_h <= code.height; y0 += sy) {
        for (std::size_t x0 = 0; x0 + cfg.block_w <= code.width; x0 += sx) {
            out.resize(out.size() + bins, 0.0);
            accumulate_cell(code, y0, y0 + cfg.block_h, x0, x0 + cfg.block_w, bins,
                            out.data() + out.size() - bins);
        }
    }
    return out;
}

std::vector<double> spp_histogram(const CodeMap& code,
                                  const std::vector<std::size_t>& levels,
                                  std::size_t bins) {
    std::vector<double> out;
    for (std::size_t g : levels) {
        if (g > code.height || g > code.width)
            throw GridTooFine("spp_histogram: level " + std::to_string(g) +
                              " finer than map " + std::to_string(code.height) + "x" +
                              std::to_string(code.width));
        for (std::size_t i = 0; i < g; ++i) {
            const std::size_t y0 = i * code.height / g;
            const std::size_t y1 = (i + 1) * code.height / g;
            for (std::size_t j = 0; j < g; ++j) {
                const std::size_t x0 = j * code.width / g;
                const std::size_t x1 = (j + 1) * code.width / g;
                out.resize(out.size() + bins, 0.0);
                accumulate_cell(code, y0, y1, x0, x1, bins, out.data() + out.size() - bins);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

namespace {

Image image_from_map(const Matrix& m) {
    Image im(m.rows(), m.cols(), 1);
    std::memcpy(im.pix.data(), m.data(), m.size() * sizeof(double));
    return im;
}

}  // namespace

std::vector<double> extract_sh(const Image& image, const FilterBank& stage1,
                               const FilterBank& stage2, const ShConfig& cfg) {
    cfg.validate();
    if (stage1.filter_count() != cfg.stage1_filters ||
        stage2.filter_count() != cfg.stage2_filters)
        throw DimensionMismatch("extract_sh: bank sizes disagree with config");

    std::vector<double> feature;
    const std::vector<Matrix> maps1 = convolve_bank(image, stage1, cfg.pad);
    for (const Matrix& m1 : maps1) {
        const Image chan = image_from_map(m1);
        const std::vector<Matrix> maps2 = convolve_bank(chan, stage2, cfg.pad);
        const CodeMap code = binarize_hash(maps2);
        std::vector<double> hist =
            cfg.pooling == Pooling::blocks
                ? block_histogram(code, cfg)
                : spp_histogram(code, cfg.pyramid_levels, cfg.histogram_bins());
        feature.insert(feature.end(), hist.begin(), hist.end());
    }
    return feature;
}

std::size_t pooling_cells(const ShConfig& cfg, std::size_t map_h, std::size_t map_w) {
    if (cfg.pooling == Pooling::blocks) {
        if (cfg.block_h > map_h || cfg.block_w > map_w) return 0;
        const std::size_t sy = block_stride(cfg.block_h, cfg.block_overlap);
        const std::size_t sx = block_stride(cfg.block_w, cfg.block_overlap);
        return ((map_h - cfg.block_h) / sy + 1) * ((map_w - cfg.block_w) / sx + 1);
    }
    std::size_t cells = 0;
    for (std::size_t g : cfg.pyramid_levels) cells += g * g;
    return cells;
}

std::size_t feature_dim(const ShConfig& cfg, std::size_t image_h, std::size_t image_w) {
    std::size_t mh = image_h, mw = image_w;
    if (!cfg.pad) {
        // Two valid convolutions shrink the map twice.
        mh = mh - cfg.patch_h + 1;
        mw = mw - cfg.patch_w + 1;
        mh = mh - cfg.patch_h + 1;
        mw = mw - cfg.patch_w + 1;
    }
    return cfg.stage1_filters * cfg.histogram_bins() * pooling_cells(cfg, mh, mw);
}

Matrix extract_features(const std::vector<Image>& images, const FilterBank& stage1,
                        const FilterBank& stage2, const ShConfig& cfg) {
    if (images.empty()) throw EmptyInput("extract_features: no images");
    const std::size_t d = feature_dim(cfg, images.front().height, images.front().width);
    if (d == 0) throw BlockTooLarge("extract_features: pooling yields no cells");

    Matrix x(images.size(), d);
    parallel_for(0, images.size(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const std::vector<double> f = extract_sh(images[i], stage1, stage2, cfg);
            if (f.size() != d)
                throw DimensionMismatch("extract_features: inconsistent image sizes");
            std::memcpy(x.row(i), f.data(), d * sizeof(double));
        }
    });
    return x;
}

std::vector<std::size_t> l2_normalize_rows(Matrix& x, NormScale scale) {
    double extra = 1.0;
    if (scale == NormScale::inv_n) extra = 1.0 / static_cast<double>(x.rows());
    if (scale == NormScale::inv_sqrt_n)
        extra = 1.0 / std::sqrt(static_cast<double>(x.rows()));

    std::vector<std::size_t> zero_rows;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double nrm = std::sqrt(kernels::sum_sq(x.row(i), x.cols()));
        if (nrm == 0.0) {
            zero_rows.push_back(i);
            continue;
        }
        kernels::scale(extra / nrm, x.row(i), x.cols());
    }
    return zero_rows;
}

std::vector<Image> stage1_response_maps(const std::vector<Image>& images,
                                        const FilterBank& stage1, const ShConfig& cfg) {
    std::vector<Image> maps(images.size() * stage1.filter_count());
    parallel_for(0, images.size(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            std::vector<Matrix> m = convolve_bank(images[i], stage1, cfg.pad);
            for (std::size_t f = 0; f < m.size(); ++f)
                maps[i * stage1.filter_count() + f] = image_from_map(m[f]);
        }
    });
    return maps;
}

}  // namespace dan::sh
