#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"

namespace cpcc {

// Dense row-major matrix of doubles. Rows are samples, columns are features.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {a.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {a.data() + i * cols, cols}; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Features of N samples in d dimensions.
using FeatureMatrix = Matrix;

// Cluster index per sample, values in [0, K).
using HardLabels = std::vector<int>;

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(idx[i], j);
    return out;
}

inline void check_same_shape(const Matrix& x, const Matrix& y, const std::string& what) {
    if (!x.same_shape(y))
        throw DimensionMismatch(what + ": shapes " + std::to_string(x.rows) + "x" +
                                std::to_string(x.cols) + " vs " + std::to_string(y.rows) + "x" +
                                std::to_string(y.cols));
}

} // namespace cpcc
