#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"

namespace cpcc {

// Losses take unit-norm rows and return the scalar value plus analytic
// gradients with respect to their direct inputs. Inputs that act as
// alignment targets are gradient-stopped by contract and get no gradient.

// Instance-level contrast between two views: each sample's other view is the
// positive, every other sample in either view is a negative.
struct InstanceContrastiveResult {
    double value = 0.0;
    Matrix d_z_t;
    Matrix d_z_t2;
};

inline InstanceContrastiveResult instance_contrastive(const Matrix& z_t, const Matrix& z_t2,
                                                      double tau) {
    if (!(tau > 0.0)) throw NonPositiveTau("instance_contrastive: tau must be > 0");
    check_same_shape(z_t, z_t2, "instance_contrastive");
    const std::size_t n = z_t.rows;
    if (n < 2) throw BatchTooSmall("instance_contrastive: need at least 2 samples");

    InstanceContrastiveResult out;
    out.d_z_t = Matrix(n, z_t.cols);
    out.d_z_t2 = Matrix(n, z_t.cols);
    const double inv_n = 1.0 / static_cast<double>(n);

    // e_tt[i][j] = exp(<u_i, u_j>/tau), e_tv[i][j] = exp(<u_i, v_j>/tau)
    Matrix e_tt(n, n), e_tv(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            e_tt(i, j) = std::exp(dot(z_t.row(i), z_t.row(j)) / tau);
            e_tv(i, j) = std::exp(dot(z_t.row(i), z_t2.row(j)) / tau);
        }

    std::vector<double> denom(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            denom[i] += e_tt(i, j) + e_tv(i, j);
        }
        out.value += -inv_n * (std::log(e_tv(i, i)) - std::log(denom[i]));
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double inv_d = 1.0 / denom[i];
        for (std::size_t c = 0; c < z_t.cols; ++c) {
            // anchor term: d/du_i of -<u_i,v_i>/tau + log denom_i
            double g = -z_t2(i, c) / tau;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                g += inv_d * (e_tt(i, j) * z_t(j, c) + e_tv(i, j) * z_t2(j, c)) / tau;
            }
            out.d_z_t(i, c) += inv_n * g;
            out.d_z_t2(i, c) += -inv_n * z_t(i, c) / tau;
        }
        // u_i and v_i as negatives inside other anchors' denominators
        for (std::size_t a = 0; a < n; ++a) {
            if (a == i) continue;
            const double ga_tt = inv_n * e_tt(a, i) / (denom[a] * tau);
            const double ga_tv = inv_n * e_tv(a, i) / (denom[a] * tau);
            for (std::size_t c = 0; c < z_t.cols; ++c) {
                out.d_z_t(i, c) += ga_tt * z_t(a, c);
                out.d_z_t2(i, c) += ga_tv * z_t(a, c);
            }
        }
    }
    return out;
}

// Prototype-level contrast: same-cluster prototypes of the two views are the
// positive pair; the denominator sums only the j != k cross terms.
struct SpcOptions {
    bool include_positive_in_denominator = false;
};

struct SpcResult {
    double value = 0.0;
    Matrix d_p;  // online-view prototypes, the trainable side
    Matrix d_p2; // target-view prototypes, gradient-stopped by the trainer
};

inline SpcResult spc_loss(const Matrix& p, const Matrix& p2, double tau,
                          const SpcOptions& opt = {}) {
    if (!(tau > 0.0)) throw NonPositiveTau("spc_loss: tau must be > 0");
    check_same_shape(p, p2, "spc_loss");
    const std::size_t k = p.rows;
    if (k < 2) throw TooFewPrototypes("spc_loss: need at least 2 prototypes, got " +
                                      std::to_string(k));

    SpcResult out;
    out.d_p = Matrix(k, p.cols);
    out.d_p2 = Matrix(k, p.cols);
    const double inv_k = 1.0 / static_cast<double>(k);

    Matrix e_pp(k, k), e_pq(k, k); // exp(<p_a,p_b>/tau), exp(<p_a,p2_b>/tau)
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            e_pp(a, b) = std::exp(dot(p.row(a), p.row(b)) / tau);
            e_pq(a, b) = std::exp(dot(p.row(a), p2.row(b)) / tau);
        }

    std::vector<double> denom(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            if (b == a) continue;
            denom[a] += e_pp(a, b) + e_pq(a, b);
        }
        if (opt.include_positive_in_denominator) denom[a] += e_pq(a, a);
        out.value += -inv_k * (std::log(e_pq(a, a)) - std::log(denom[a]));
    }

    for (std::size_t a = 0; a < k; ++a) {
        const double inv_d = 1.0 / denom[a];
        for (std::size_t c = 0; c < p.cols; ++c) {
            double g = -p2(a, c) / tau; // positive pair
            for (std::size_t b = 0; b < k; ++b) {
                if (b == a) continue;
                g += inv_d * (e_pp(a, b) * p(b, c) + e_pq(a, b) * p2(b, c)) / tau;
            }
            if (opt.include_positive_in_denominator)
                g += inv_d * e_pq(a, a) * p2(a, c) / tau;
            out.d_p(a, c) += inv_k * g;
            // positive-pair dependence on p2_a
            double g2 = -p(a, c) / tau;
            if (opt.include_positive_in_denominator)
                g2 += inv_d * e_pq(a, a) * p(a, c) / tau;
            out.d_p2(a, c) += inv_k * g2;
        }
        // p_a and p2_a as negatives in other anchors' denominators
        for (std::size_t b = 0; b < k; ++b) {
            if (b == a) continue;
            const double gb_pp = inv_k * e_pp(b, a) / (denom[b] * tau);
            const double gb_pq = inv_k * e_pq(b, a) / (denom[b] * tau);
            for (std::size_t c = 0; c < p.cols; ++c) {
                out.d_p(a, c) += gb_pp * p(b, c);
                out.d_p2(a, c) += gb_pq * p(b, c);
            }
        }
    }
    return out;
}

// Dual consistency: transformation consistency between a sample's prediction
// and its other view, and neighborhood consistency between the noisy-view
// prediction and the sample's first view. Each active term contributes
// 1 - mean cosine alignment, so the full value is 2 - mean sum of the two
// inner products. Gradients flow only into the two prediction inputs.
struct DclTerms {
    bool transformation = true; // term 1
    bool neighborhood = true;   // term 2
};

struct DclResult {
    double value = 0.0;
    Matrix d_pred_t;
    Matrix d_pred_t2_noisy;
};

inline DclResult dcl_loss(const Matrix& pred_t, const Matrix& z_t2, const Matrix& pred_t2_noisy,
                          const Matrix& z_t, const DclTerms& terms = {}) {
    check_same_shape(pred_t, z_t2, "dcl_loss term 1");
    check_same_shape(pred_t2_noisy, z_t, "dcl_loss term 2");
    check_same_shape(pred_t, pred_t2_noisy, "dcl_loss views");
    const std::size_t n = pred_t.rows;
    if (n == 0) throw BatchTooSmall("dcl_loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(n);

    DclResult out;
    out.d_pred_t = Matrix(n, pred_t.cols);
    out.d_pred_t2_noisy = Matrix(n, pred_t.cols);
    if (terms.transformation) {
        double align = 0.0;
        for (std::size_t i = 0; i < n; ++i) align += dot(pred_t.row(i), z_t2.row(i));
        out.value += 1.0 - inv_n * align;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < pred_t.cols; ++c) out.d_pred_t(i, c) = -inv_n * z_t2(i, c);
    }
    if (terms.neighborhood) {
        double align = 0.0;
        for (std::size_t i = 0; i < n; ++i) align += dot(pred_t2_noisy.row(i), z_t.row(i));
        out.value += 1.0 - inv_n * align;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < pred_t.cols; ++c)
                out.d_pred_t2_noisy(i, c) = -inv_n * z_t(i, c);
    }
    return out;
}

// Weighted combination of the consistency and prototype objectives. The
// component gradients stay attached to their own tensors; the trainer scales
// the prototype side by lambda when accumulating parameter gradients.
struct TotalLossResult {
    double value = 0.0;
    double lambda = 0.0;
    DclResult dcl;
    SpcResult spc;
};

inline TotalLossResult total_loss(DclResult ld, SpcResult ls, double lambda) {
    if (lambda < 0.0) throw ConfigInvalid("total_loss: lambda must be >= 0");
    TotalLossResult out;
    out.value = ld.value + lambda * ls.value;
    out.lambda = lambda;
    out.dcl = std::move(ld);
    out.spc = std::move(ls);
    return out;
}

} // namespace cpcc
