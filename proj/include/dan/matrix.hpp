#pragma once

#include "dan/errors.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace dan {

/// Dense row-major matrix of 64-bit reals. The one value type every module
/// trades in: feature matrices, weight blocks, Gram matrices, filter stacks.
/// Dimensions are always >= 1; an "empty matrix" is not a valid state.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0)
            throw DimensionMismatch("Matrix: dimensions must be >= 1, got " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (rows == 0 || cols == 0)
            throw DimensionMismatch("Matrix: dimensions must be >= 1");
        if (data_.size() != rows * cols)
            throw DimensionMismatch("Matrix: value count " + std::to_string(data_.size()) +
                                    " does not fill " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    /// Throws if any stored value is NaN or infinite. `context` names the
    /// producer in the error message.
    void check_finite(const char* context) const {
        for (double v : data_)
            if (!std::isfinite(v))
                throw Error(std::string(context) + ": non-finite value in matrix");
    }

    void fill(double v) { data_.assign(data_.size(), v); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("max_abs_diff: shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::fabs(a.data()[i] - b.data()[i]));
    return d;
}

}  // namespace dan
