#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/kmeans.hpp"
#include "cpcc/matrix.hpp"

namespace cpcc {

// Row-stochastic membership probabilities of N samples to K centers.
struct SoftAssignment {
    Matrix q;
    double alpha = 1.0;
};

// Confidence weights with per-cluster frequency balancing; rows sum to 1.
struct WeightMatrix {
    Matrix w;
    std::vector<double> f; // soft cluster frequencies, column sums of q
};

// Student-t kernel membership: q_ik proportional to
// (1 + |z_i - mu_k|^2 / alpha)^(-(alpha+1)/2).
inline SoftAssignment soft_assign(const Matrix& z, const Centers& c, double alpha) {
    if (!(alpha > 0.0)) throw NonPositiveAlpha("soft_assign: alpha must be > 0");
    if (z.cols != c.mu.cols)
        throw DimensionMismatch("soft_assign: points dim " + std::to_string(z.cols) +
                                ", centers dim " + std::to_string(c.mu.cols));
    const double expo = -(alpha + 1.0) / 2.0;
    SoftAssignment out{Matrix(z.rows, c.mu.rows), alpha};
    for (std::size_t i = 0; i < z.rows; ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < c.mu.rows; ++k) {
            double t = std::pow(1.0 + squared_euclidean(z.row(i), c.mu.row(k)) / alpha, expo);
            t = std::max(t, 1e-30); // guard against underflow at extreme distances
            out.q(i, k) = t;
            total += t;
        }
        for (std::size_t k = 0; k < c.mu.rows; ++k) out.q(i, k) /= total;
    }
    return out;
}

// Squared-sharpened, frequency-normalized weights:
// w_ik = (q_ik^2 / f_k) / sum_k' (q_ik'^2 / f_k'), with f_k = sum_i q_ik.
inline WeightMatrix compute_weights(const SoftAssignment& sa) {
    const Matrix& q = sa.q;
    WeightMatrix out{Matrix(q.rows, q.cols), std::vector<double>(q.cols, 0.0)};
    for (std::size_t k = 0; k < q.cols; ++k) {
        for (std::size_t i = 0; i < q.rows; ++i) out.f[k] += q(i, k);
        if (out.f[k] < 1e-12)
            throw DegenerateFrequency("compute_weights: cluster " + std::to_string(k) +
                                      " has vanishing soft frequency");
    }
    for (std::size_t i = 0; i < q.rows; ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < q.cols; ++k) {
            double v = q(i, k) * q(i, k) / out.f[k];
            out.w(i, k) = v;
            total += v;
        }
        for (std::size_t k = 0; k < q.cols; ++k) out.w(i, k) /= total;
    }
    return out;
}

} // namespace cpcc
