#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"

namespace cpcc {

// Joint label counts; the shared substrate for all three clustering metrics.
struct ContingencyTable {
    std::vector<std::vector<long long>> counts; // K_pred x K_true
    long long n = 0;
};

namespace detail {

inline void check_labels(const HardLabels& pred, const HardLabels& truth) {
    if (pred.size() != truth.size())
        throw LengthMismatch("metrics: " + std::to_string(pred.size()) + " vs " +
                             std::to_string(truth.size()) + " labels");
    if (pred.empty()) throw LengthMismatch("metrics: empty label vectors");
}

inline int label_range(const HardLabels& l) {
    int hi = 0;
    for (int v : l) {
        if (v < 0) throw LengthMismatch("metrics: negative label");
        hi = std::max(hi, v + 1);
    }
    return hi;
}

// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
// potentials, O(n^3)); returns the column matched to each row.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

inline double comb2(long long x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

} // namespace detail

inline ContingencyTable contingency(const HardLabels& pred, const HardLabels& truth) {
    detail::check_labels(pred, truth);
    int kp = detail::label_range(pred);
    int kt = detail::label_range(truth);
    ContingencyTable t;
    t.counts.assign(kp, std::vector<long long>(kt, 0));
    t.n = static_cast<long long>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) t.counts[pred[i]][truth[i]]++;
    return t;
}

// Normalized mutual information with geometric-mean normalization. Two
// constant partitions carry the same (empty) information and score 1; if only
// one side is constant there is no shared information and the score is 0.
inline double nmi(const HardLabels& pred, const HardLabels& truth) {
    ContingencyTable t = contingency(pred, truth);
    const double n = static_cast<double>(t.n);
    double hp = 0.0, ht = 0.0, mi = 0.0;
    std::vector<long long> a(t.counts.size(), 0), b(t.counts.front().size(), 0);
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            a[i] += t.counts[i][j];
            b[j] += t.counts[i][j];
        }
    for (long long ai : a)
        if (ai > 0) hp -= (ai / n) * std::log(ai / n);
    for (long long bj : b)
        if (bj > 0) ht -= (bj / n) * std::log(bj / n);
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            long long c = t.counts[i][j];
            if (c > 0) mi += (c / n) * std::log(c * n / (static_cast<double>(a[i]) * b[j]));
        }
    if (hp <= 0.0 && ht <= 0.0) return 1.0; // both single-cluster: identical partitions
    if (hp <= 0.0 || ht <= 0.0) return 0.0;
    double v = mi / std::sqrt(hp * ht);
    return std::clamp(v, 0.0, 1.0);
}

// Best one-to-one cluster-to-class matching accuracy; the contingency table
// is zero-padded to square before the assignment.
inline double acc(const HardLabels& pred, const HardLabels& truth) {
    ContingencyTable t = contingency(pred, truth);
    std::size_t k = std::max(t.counts.size(), t.counts.front().size());
    std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (std::size_t j = 0; j < t.counts[i].size(); ++j)
            cost[i][j] = -static_cast<double>(t.counts[i][j]);
    std::vector<int> match = detail::hungarian(cost);
    double hits = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        auto j = static_cast<std::size_t>(match[i]);
        if (j < t.counts[i].size()) hits += static_cast<double>(t.counts[i][j]);
    }
    return hits / static_cast<double>(t.n);
}

// Adjusted Rand index via pair counting; 0/0 (both partitions all-singleton
// or both single-cluster) means the partitions coincide, scored 1.
inline double ari(const HardLabels& pred, const HardLabels& truth) {
    detail::check_labels(pred, truth);
    if (pred.size() < 2) throw TooFewSamples("ari: need at least 2 samples");
    ContingencyTable t = contingency(pred, truth);
    std::vector<long long> a(t.counts.size(), 0), b(t.counts.front().size(), 0);
    double index = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            a[i] += t.counts[i][j];
            b[j] += t.counts[i][j];
            index += detail::comb2(t.counts[i][j]);
        }
    double sum_a = 0.0, sum_b = 0.0;
    for (long long ai : a) sum_a += detail::comb2(ai);
    for (long long bj : b) sum_b += detail::comb2(bj);
    double total = detail::comb2(t.n);
    double expected = sum_a * sum_b / total;
    double maximum = 0.5 * (sum_a + sum_b);
    if (std::abs(maximum - expected) < 1e-12) return 1.0;
    return (index - expected) / (maximum - expected);
}

} // namespace cpcc
