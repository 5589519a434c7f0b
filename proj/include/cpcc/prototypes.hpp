#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/kmeans.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/numerics.hpp"
#include "cpcc/rng.hpp"
#include "cpcc/soft_assignment.hpp"

namespace cpcc {

enum class View { online, target };

// K unit-norm per-cluster representatives for one augmentation view.
struct PrototypeSet {
    Matrix p;
    View view = View::online;
};

namespace detail {

// Per-cluster weighted sums over the batch; present[k] marks clusters whose
// weighted sum has usable norm.
struct PrototypeSums {
    Matrix sums;                // K x d
    std::vector<bool> present;  // norm(sums_k) >= tolerance
};

inline PrototypeSums prototype_sums(const Matrix& z, const Matrix& w, std::size_t k) {
    if (w.rows != z.rows)
        throw DimensionMismatch("prototypes: " + std::to_string(z.rows) + " feature rows vs " +
                                std::to_string(w.rows) + " weight rows");
    if (w.cols != k)
        throw DimensionMismatch("prototypes: weight matrix has " + std::to_string(w.cols) +
                                " columns for k=" + std::to_string(k));
    PrototypeSums out{Matrix(k, z.cols), std::vector<bool>(k, false)};
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < z.cols; ++j) out.sums(c, j) += w(i, c) * z(i, j);
    for (std::size_t c = 0; c < k; ++c)
        out.present[c] = norm2(out.sums.row(c)) >= kZeroNormTolerance;
    return out;
}

inline Matrix one_hot_weights(const HardLabels& labels, std::size_t k) {
    Matrix w(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto c = static_cast<std::size_t>(labels[i]);
        if (labels[i] < 0 || c >= k)
            throw DimensionMismatch("one_hot_weights: label " + std::to_string(labels[i]) +
                                    " outside [0," + std::to_string(k) + ")");
        w(i, c) = 1.0;
    }
    return w;
}

} // namespace detail

// p_k = (sum_i w_ik z_i) / |sum_i w_ik z_i| over a mini-batch. A cluster whose
// weighted sum has near-zero norm carries no batch mass and is an error here;
// the trainer uses the partial variant below to skip such clusters instead.
inline PrototypeSet soft_prototypes(const Matrix& z, const Matrix& w_batch, std::size_t k,
                                    View view = View::online) {
    auto ps = detail::prototype_sums(z, w_batch, k);
    for (std::size_t c = 0; c < k; ++c)
        if (!ps.present[c])
            throw EmptyPrototype("cluster " + std::to_string(c) + " has no mass in this batch");
    return {l2_normalize_rows(ps.sums), view};
}

// Unweighted variant: normalized mean of the features with each hard label.
inline PrototypeSet hard_prototypes(const Matrix& z, const HardLabels& labels, std::size_t k,
                                    View view = View::online) {
    if (labels.size() != z.rows)
        throw DimensionMismatch("hard_prototypes: label count mismatch");
    return soft_prototypes(z, detail::one_hot_weights(labels, k), k, view);
}

// Prototypes restricted to the clusters present in the batch, with the
// surviving cluster ids. Normalizing a mean and normalizing a sum agree, so
// rescaling any weight column leaves the result unchanged.
struct PartialPrototypes {
    Matrix p;                          // rows for present clusters only
    std::vector<std::size_t> clusters; // original cluster index per row
};

inline PartialPrototypes soft_prototypes_present(const Matrix& z, const Matrix& w_batch,
                                                 std::size_t k) {
    auto ps = detail::prototype_sums(z, w_batch, k);
    PartialPrototypes out;
    for (std::size_t c = 0; c < k; ++c)
        if (ps.present[c]) out.clusters.push_back(c);
    out.p = Matrix(out.clusters.size(), z.cols);
    for (std::size_t r = 0; r < out.clusters.size(); ++r) {
        auto c = out.clusters[r];
        double n = norm2(ps.sums.row(c));
        for (std::size_t j = 0; j < z.cols; ++j) out.p(r, j) = ps.sums(c, j) / n;
    }
    return out;
}

// Mini-batch prototype drift against known centers: angular distance between
// the batch prototype and the normalized true center, for unweighted (hard)
// and confidence-weighted (soft) estimation over repeated random batches.
struct DriftReport {
    std::vector<double> hard;
    std::vector<double> soft;
    double hard_mean = 0.0;
    double soft_mean = 0.0;
    double soft_win_fraction = 0.0; // trials where soft drift < hard drift
};

struct DriftOptions {
    double alpha = 1.0;
    bool one_hot_weights = false; // diagnostic: route the soft path through hard labels
};

inline DriftReport drift_experiment(const Matrix& population, const Centers& true_centers,
                                    std::size_t batch_size, std::size_t trials, Rng& rng,
                                    const DriftOptions& opt = {}) {
    if (batch_size >= population.rows)
        throw ConfigInvalid("drift_experiment: batch_size must be smaller than the population");
    const std::size_t k = true_centers.k();

    HardLabels labels = assign_nearest(population, true_centers);
    Matrix weights;
    if (opt.one_hot_weights) {
        weights = detail::one_hot_weights(labels, k);
    } else {
        weights = compute_weights(soft_assign(population, true_centers, opt.alpha)).w;
    }
    Matrix center_dir = l2_normalize_rows(true_centers.mu);

    std::vector<std::size_t> all(population.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    DriftReport rep;
    std::size_t wins = 0, valid = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        rng.shuffle(all);
        std::vector<std::size_t> batch(all.begin(), all.begin() + static_cast<long>(batch_size));
        Matrix z = gather_rows(population, batch);
        Matrix w = gather_rows(weights, batch);
        HardLabels bl(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) bl[i] = labels[batch[i]];

        auto soft = detail::prototype_sums(z, w, k);
        auto hard = detail::prototype_sums(z, detail::one_hot_weights(bl, k), k);

        double hard_acc = 0.0, soft_acc = 0.0;
        std::size_t common = 0;
        for (std::size_t c = 0; c < k; ++c) {
            if (!soft.present[c] || !hard.present[c]) continue;
            double hn = norm2(hard.sums.row(c));
            double sn = norm2(soft.sums.row(c));
            double hcos = dot(hard.sums.row(c), center_dir.row(c)) / hn;
            double scos = dot(soft.sums.row(c), center_dir.row(c)) / sn;
            hard_acc += std::acos(std::clamp(hcos, -1.0, 1.0));
            soft_acc += std::acos(std::clamp(scos, -1.0, 1.0));
            ++common;
        }
        if (common == 0) continue;
        double h = hard_acc / static_cast<double>(common);
        double s = soft_acc / static_cast<double>(common);
        rep.hard.push_back(h);
        rep.soft.push_back(s);
        rep.hard_mean += h;
        rep.soft_mean += s;
        if (s < h) ++wins;
        ++valid;
    }
    if (valid > 0) {
        rep.hard_mean /= static_cast<double>(valid);
        rep.soft_mean /= static_cast<double>(valid);
        rep.soft_win_fraction = static_cast<double>(wins) / static_cast<double>(valid);
    }
    return rep;
}

inline void write_drift_csv(const std::string& path, const DriftReport& rep) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "trial,hard_drift,soft_drift\n";
    char buf[128];
    for (std::size_t t = 0; t < rep.hard.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", t, rep.hard[t], rep.soft[t]);
        out << buf;
    }
}

} // namespace cpcc
