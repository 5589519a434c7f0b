#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/numerics.hpp"
#include "cpcc/rng.hpp"

namespace cpcc {

// K cluster centers, one per row.
struct Centers {
    Matrix mu;
    std::size_t k() const { return mu.rows; }
};

// labels[i] = argmin_k |z_i - mu_k|^2, lowest index on ties.
inline HardLabels assign_nearest(const Matrix& z, const Centers& c) {
    if (z.cols != c.mu.cols)
        throw DimensionMismatch("assign_nearest: points have dim " + std::to_string(z.cols) +
                                ", centers " + std::to_string(c.mu.cols));
    HardLabels labels(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t k = 0; k < c.mu.rows; ++k) {
            double d = squared_euclidean(z.row(i), c.mu.row(k));
            if (d < best) {
                best = d;
                arg = static_cast<int>(k);
            }
        }
        labels[i] = arg;
    }
    return labels;
}

namespace detail {

// k-means++ seeding: first center uniform, the rest D^2-weighted.
inline Matrix kmeanspp_seed(const Matrix& z, std::size_t k, Rng& rng) {
    Matrix centers(k, z.cols);
    std::size_t first = rng.next_below(z.rows);
    for (std::size_t j = 0; j < z.cols; ++j) centers(0, j) = z(first, j);

    std::vector<double> d2(z.rows);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < z.rows; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < c; ++p)
                best = std::min(best, squared_euclidean(z.row(i), centers.row(p)));
            d2[i] = best;
            total += best;
        }
        if (total < kZeroNormTolerance)
            throw EmptyClusterUnrecoverable(
                "kmeans++ seeding: all remaining points coincide with chosen centers");
        double target = rng.next_uniform() * total;
        double cum = 0.0;
        std::size_t pick = z.rows - 1;
        for (std::size_t i = 0; i < z.rows; ++i) {
            cum += d2[i];
            if (cum >= target) {
                pick = i;
                break;
            }
        }
        for (std::size_t j = 0; j < z.cols; ++j) centers(c, j) = z(pick, j);
    }
    return centers;
}

} // namespace detail

// Lloyd's iterations from explicit initial centers. Terminates when the
// assignment reaches a fixed point, the maximum center displacement drops
// below tol, or max_iter is hit. Empty clusters are re-seeded from the point
// farthest from its own center; k failed re-seedings abort the fit.
inline std::pair<Centers, HardLabels> kmeans_fit_from(const Matrix& z, Matrix init_centers,
                                                      std::size_t max_iter, double tol) {
    const std::size_t k = init_centers.rows;
    if (z.rows < k)
        throw TooFewPoints("kmeans: " + std::to_string(z.rows) + " points for " +
                           std::to_string(k) + " clusters");
    if (max_iter < 1 || !(tol > 0.0))
        throw ConfigInvalid("kmeans: max_iter >= 1 and tol > 0 required");

    Centers cur{std::move(init_centers)};
    HardLabels labels = assign_nearest(z, cur);
    std::size_t reseeds = 0;

    for (std::size_t it = 0; it < max_iter; ++it) {
        Matrix sums(k, z.cols);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < z.rows; ++i) {
            auto c = static_cast<std::size_t>(labels[i]);
            counts[c]++;
            for (std::size_t j = 0; j < z.cols; ++j) sums(c, j) += z(i, j);
        }

        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            if (++reseeds > k)
                throw EmptyClusterUnrecoverable("kmeans: re-seeded empty clusters " +
                                                std::to_string(k) + " times without recovery");
            double worst = -1.0;
            std::size_t far = 0;
            for (std::size_t i = 0; i < z.rows; ++i) {
                double d =
                    squared_euclidean(z.row(i), cur.mu.row(static_cast<std::size_t>(labels[i])));
                if (d > worst) {
                    worst = d;
                    far = i;
                }
            }
            auto old = static_cast<std::size_t>(labels[far]);
            if (counts[old] <= 1)
                throw EmptyClusterUnrecoverable("kmeans: cannot re-seed from singleton cluster");
            counts[old]--;
            counts[c] = 1;
            for (std::size_t j = 0; j < z.cols; ++j) {
                sums(old, j) -= z(far, j);
                sums(c, j) = z(far, j);
            }
            labels[far] = static_cast<int>(c);
        }

        double max_move = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double move2 = 0.0;
            for (std::size_t j = 0; j < z.cols; ++j) {
                double next = sums(c, j) / static_cast<double>(counts[c]);
                double d = next - cur.mu(c, j);
                move2 += d * d;
                cur.mu(c, j) = next;
            }
            max_move = std::max(max_move, std::sqrt(move2));
        }

        HardLabels next_labels = assign_nearest(z, cur);
        bool stable = (next_labels == labels);
        labels = std::move(next_labels);
        if (stable || max_move < tol) break;
    }

    // coincident centers mean the fit degenerated
    for (std::size_t a = 0; a + 1 < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if (squared_euclidean(cur.mu.row(a), cur.mu.row(b)) < kZeroNormTolerance)
                throw EmptyClusterUnrecoverable("kmeans: centers " + std::to_string(a) + " and " +
                                                std::to_string(b) + " coincide");
    return {std::move(cur), std::move(labels)};
}

inline double within_cluster_sse(const Matrix& z, const Centers& c, const HardLabels& labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i)
        s += squared_euclidean(z.row(i), c.mu.row(static_cast<std::size_t>(labels[i])));
    return s;
}

// n_init independent seedings, lowest within-cluster SSE wins.
inline std::pair<Centers, HardLabels> kmeans_fit(const Matrix& z, std::size_t k, Rng& rng,
                                                 std::size_t max_iter = 100, double tol = 1e-6,
                                                 std::size_t n_init = 1) {
    if (z.rows < k)
        throw TooFewPoints("kmeans: " + std::to_string(z.rows) + " points for " +
                           std::to_string(k) + " clusters");
    if (n_init < 1) throw ConfigInvalid("kmeans: n_init must be >= 1");
    std::pair<Centers, HardLabels> best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (std::size_t attempt = 0; attempt < n_init; ++attempt) {
        auto fit = kmeans_fit_from(z, detail::kmeanspp_seed(z, k, rng), max_iter, tol);
        double sse = within_cluster_sse(z, fit.first, fit.second);
        if (sse < best_sse) {
            best_sse = sse;
            best = std::move(fit);
        }
    }
    return best;
}

} // namespace cpcc
