// Independent naive-loop reference implementations and finite-difference
// helpers. Everything here works on plain nested vectors and deliberately
// avoids the library's own code paths.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cpcc/matrix.hpp"
#include "cpcc/rng.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const cpcc::Matrix& m) {
    Rows out(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
    return out;
}

inline cpcc::Matrix to_matrix(const Rows& r) {
    cpcc::Matrix m(r.size(), r.front().size());
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r[i].size(); ++j) m(i, j) = r[i][j];
    return m;
}

inline double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// membership kernel, one scalar at a time
inline Rows soft_assign(const Rows& z, const Rows& mu, double alpha) {
    Rows q(z.size(), std::vector<double>(mu.size()));
    for (std::size_t i = 0; i < z.size(); ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            double t = std::pow(1.0 + sqdist(z[i], mu[k]) / alpha, -(alpha + 1.0) / 2.0);
            q[i][k] = t;
            total += t;
        }
        for (std::size_t k = 0; k < mu.size(); ++k) q[i][k] /= total;
    }
    return q;
}

inline Rows weights(const Rows& q) {
    std::size_t n = q.size(), k = q.front().size();
    std::vector<double> f(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) f[c] += q[i][c];
    Rows w(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            w[i][c] = q[i][c] * q[i][c] / f[c];
            total += w[i][c];
        }
        for (std::size_t c = 0; c < k; ++c) w[i][c] /= total;
    }
    return w;
}

// weighted sums normalized one cluster at a time
inline Rows prototypes(const Rows& z, const Rows& w, std::size_t k) {
    std::size_t d = z.front().size();
    Rows p(k, std::vector<double>(d, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < z.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) p[c][j] += w[i][c] * z[i][j];
        double n = std::sqrt(vdot(p[c], p[c]));
        for (std::size_t j = 0; j < d; ++j) p[c][j] /= n;
    }
    return p;
}

inline double spc_value(const Rows& p, const Rows& p2, double tau, bool include_positive = false) {
    std::size_t k = p.size();
    double loss = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        double denom = include_positive ? std::exp(vdot(p[a], p2[a]) / tau) : 0.0;
        for (std::size_t b = 0; b < k; ++b) {
            if (b == a) continue;
            denom += std::exp(vdot(p[a], p[b]) / tau) + std::exp(vdot(p[a], p2[b]) / tau);
        }
        loss += -std::log(std::exp(vdot(p[a], p2[a]) / tau) / denom);
    }
    return loss / static_cast<double>(k);
}

inline double instance_value(const Rows& u, const Rows& v, double tau) {
    std::size_t n = u.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            denom += std::exp(vdot(u[i], u[j]) / tau) + std::exp(vdot(u[i], v[j]) / tau);
        }
        loss += -std::log(std::exp(vdot(u[i], v[i]) / tau) / denom);
    }
    return loss / static_cast<double>(n);
}

// squared-distance form of the consistency loss, valid for unit-norm rows
inline double dcl_value_sqdist(const Rows& pred_t, const Rows& z_t2, const Rows& pred_t2,
                               const Rows& z_t) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred_t.size(); ++i)
        s += sqdist(pred_t[i], z_t2[i]) + sqdist(pred_t2[i], z_t[i]);
    return s / (2.0 * static_cast<double>(pred_t.size()));
}

inline double dcl_value_inner(const Rows& pred_t, const Rows& z_t2, const Rows& pred_t2,
                              const Rows& z_t) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred_t.size(); ++i)
        s += vdot(pred_t[i], z_t2[i]) + vdot(pred_t2[i], z_t[i]);
    return 2.0 - s / static_cast<double>(pred_t.size());
}

// central finite differences over the entries of one matrix input
inline cpcc::Matrix finite_difference(const std::function<double(const cpcc::Matrix&)>& f,
                                      cpcc::Matrix x, double h = 1e-5) {
    cpcc::Matrix g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        double keep = x.a[i];
        x.a[i] = keep + h;
        double up = f(x);
        x.a[i] = keep - h;
        double down = f(x);
        x.a[i] = keep;
        g.a[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double max_relative_error(const cpcc::Matrix& analytic, const cpcc::Matrix& fd,
                                 double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.a.size(); ++i) {
        double denom = std::max(std::abs(fd.a[i]), floor);
        worst = std::max(worst, std::abs(analytic.a[i] - fd.a[i]) / denom);
    }
    return worst;
}

inline cpcc::Matrix random_unit_rows(std::size_t n, std::size_t d, cpcc::Rng& rng) {
    cpcc::Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            m(i, j) = rng.next_gaussian();
            norm += m(i, j) * m(i, j);
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < d; ++j) m(i, j) /= norm;
    }
    return m;
}

// random rotation assembled from Givens rotations; orthogonal by construction
inline Rows random_rotation(std::size_t d, cpcc::Rng& rng) {
    Rows r(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) r[i][i] = 1.0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) {
            double theta = rng.next_uniform() * 6.283185307179586;
            double c = std::cos(theta), s = std::sin(theta);
            for (std::size_t j = 0; j < d; ++j) {
                double ra = r[a][j], rb = r[b][j];
                r[a][j] = c * ra - s * rb;
                r[b][j] = s * ra + c * rb;
            }
        }
    return r;
}

inline cpcc::Matrix rotate_rows(const cpcc::Matrix& m, const Rows& rot) {
    cpcc::Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < m.cols; ++c) s += rot[j][c] * m(i, c);
            out(i, j) = s;
        }
    return out;
}

} // namespace oracle
