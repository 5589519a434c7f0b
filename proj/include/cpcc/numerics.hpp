#pragma once

#include <cmath>
#include <string>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/rng.hpp"

namespace cpcc {

inline constexpr double kZeroNormTolerance = 1e-12;

// Scales every row to unit L2 norm. A row with norm below kZeroNormTolerance
// signals feature collapse and is an error rather than a silent zero.
inline Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double n = norm2(m.row(i));
        if (n < kZeroNormTolerance)
            throw ZeroNormRow("row " + std::to_string(i) + " has near-zero norm " +
                              std::to_string(n));
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(i, j) / n;
    }
    return out;
}

// Gradient of a loss through row normalization: given raw rows y and the
// gradient g w.r.t. y/|y|, returns the gradient w.r.t. y.
inline Matrix l2_normalize_rows_grad(const Matrix& raw, const Matrix& g_normalized) {
    check_same_shape(raw, g_normalized, "l2_normalize_rows_grad");
    Matrix out(raw.rows, raw.cols);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        double n = norm2(raw.row(i));
        if (n < kZeroNormTolerance)
            throw ZeroNormRow("row " + std::to_string(i) + " has near-zero norm");
        double proj = 0.0;
        for (std::size_t j = 0; j < raw.cols; ++j) proj += raw(i, j) * g_normalized(i, j);
        proj /= n * n;
        for (std::size_t j = 0; j < raw.cols; ++j)
            out(i, j) = (g_normalized(i, j) - raw(i, j) * proj) / n;
    }
    return out;
}

inline double squared_euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionMismatch("squared_euclidean: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// Mean over dimensions of the per-dimension standard deviation of the rows,
// population convention (divide by n). Larger means the rows spread more
// uniformly around their mean.
inline double feature_std(const Matrix& m) {
    if (m.rows < 2)
        throw InsufficientRows("feature_std needs at least 2 rows, got " + std::to_string(m.rows));
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) mean += m(i, j);
        mean /= static_cast<double>(m.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) {
            double d = m(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(m.rows);
        acc += std::sqrt(var);
    }
    return acc / static_cast<double>(m.cols);
}

// n x d matrix of i.i.d. standard normal entries, deterministic given rng state.
inline Matrix gaussian_noise(Rng& rng, std::size_t n, std::size_t d) {
    Matrix out(n, d);
    for (double& v : out.a) v = rng.next_gaussian();
    return out;
}

// Inverse standard normal CDF by bisection on erf; monotone and deterministic.
inline double standard_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigInvalid("quantile argument must lie in (0,1)");
    double lo = -12.0, hi = 12.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double cdf = 0.5 * (1.0 + std::erf(mid / std::sqrt(2.0)));
        if (cdf < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace cpcc
