#pragma once

// Independent reference implementations for the DERIVED test expectations.
// Everything here is deliberately naive (nested loops, explicit inverses,
// exhaustive enumeration) and shares no code path with the library under test.

#include "dan/image.hpp"
#include "dan/matrix.hpp"

#include <cstdint>
#include <vector>

namespace oracle {

using VV = std::vector<std::vector<double>>;

VV to_vv(const dan::Matrix& m);
dan::Matrix from_vv(const VV& v);

// Gaussian elimination with partial pivoting.
VV gauss_solve(VV a, VV b);
VV gauss_inverse(const VV& a);

VV vv_mul(const VV& a, const VV& b);
VV vv_transpose(const VV& a);

// Cyclic Jacobi sweeps to 1e-12, eigenpairs sorted descending; vectors are
// returned as rows.
struct JacobiEig {
    std::vector<double> values;
    VV vectors;
};
JacobiEig jacobi_eig(VV a);

// Sliding-window patch extraction with per-patch mean removal, stride 1.
VV naive_patches(const dan::Image& img, std::size_t ph, std::size_t pw);

// Correlation (no flip); pad=true zero-pads by (p-1)/2.
VV naive_correlate(const dan::Image& img, const std::vector<double>& filter,
                   std::size_t ph, std::size_t pw, bool pad);

// code = sum 2^(i-1) [map_i > 0].
std::vector<std::uint32_t> naive_hash(const std::vector<VV>& maps);

std::vector<double> naive_block_hist(const std::vector<std::uint32_t>& codes,
                                     std::size_t h, std::size_t w, std::size_t bh,
                                     std::size_t bw, std::size_t stride_y,
                                     std::size_t stride_x, std::size_t bins);

std::vector<double> naive_spp_hist(const std::vector<std::uint32_t>& codes,
                                   std::size_t h, std::size_t w,
                                   const std::vector<std::size_t>& levels,
                                   std::size_t bins);

// Literal layer-stacked ridge training: explicit H_l concatenation, explicit
// primal inverse, explicit ReLU and power transform.
struct DanOracle {
    std::vector<VV> weights;  // W_l
    VV w_ft;
    std::vector<VV> p;  // training P_l
    VV q;
    std::size_t d = 0;
    std::size_t classes = 0;
    double beta = 1.0;
    bool relu = true;
};

DanOracle dan_oracle_train(const VV& x, const std::vector<int>& labels,
                           std::size_t n_classes, std::size_t layers, double lambda,
                           double lambda_ft, double beta, bool relu);

// Replays the recurrence for one row; returns the power-transformed stack.
std::vector<double> dan_oracle_forward_q(const DanOracle& m,
                                         const std::vector<double>& x);

std::vector<double> dan_oracle_scores(const DanOracle& m, const std::vector<double>& x);

int dan_oracle_predict(const DanOracle& m, const std::vector<double>& x);

// Exhaustive cosine nearest neighbor.
double naive_cosine_nn(const VV& train_x, const std::vector<int>& train_y,
                       const VV& test_x, const std::vector<int>& test_y);

// Brute-force search over a coarse direction grid for a linear separator of
// +-1 signs in low dimension; returns (w, b) with every margin positive, or
// an empty w when the grid finds none.
struct GridSeparator {
    std::vector<double> w;
    double b = 0.0;
};
GridSeparator grid_separator_2d(const VV& x, const std::vector<double>& sign);

}  // namespace oracle
