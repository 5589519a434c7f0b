#pragma once

#include <string>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/numerics.hpp"
#include "cpcc/rng.hpp"

namespace cpcc {

// Stochastic vector-space transformations standing in for image augmentation:
// additive Gaussian jitter, a per-sample global scale, and coordinate masking.
struct TransformSpec {
    double jitter_std = 0.1;
    double scale_lo = 0.9;
    double scale_hi = 1.1;
    double mask_prob = 0.1;

    void validate() const {
        if (jitter_std < 0.0) throw ConfigInvalid("augment: jitter_std must be >= 0");
        if (!(scale_lo > 0.0) || scale_lo > scale_hi)
            throw ConfigInvalid("augment: scale range needs 0 < lo <= hi");
        if (mask_prob < 0.0 || mask_prob >= 1.0)
            throw ConfigInvalid("augment: mask_prob must lie in [0,1)");
    }
};

// Per-sample independent draws; a parameter at its identity value consumes no
// randomness, so the all-identity spec reproduces the input exactly.
inline Matrix augment(const Matrix& x, const TransformSpec& spec, Rng& rng) {
    spec.validate();
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows; ++i) {
        if (spec.jitter_std > 0.0)
            for (std::size_t j = 0; j < out.cols; ++j)
                out(i, j) += spec.jitter_std * rng.next_gaussian();
        if (spec.scale_lo < spec.scale_hi) {
            double s = spec.scale_lo + (spec.scale_hi - spec.scale_lo) * rng.next_uniform();
            for (std::size_t j = 0; j < out.cols; ++j) out(i, j) *= s;
        } else if (spec.scale_lo != 1.0) {
            for (std::size_t j = 0; j < out.cols; ++j) out(i, j) *= spec.scale_lo;
        }
        if (spec.mask_prob > 0.0)
            for (std::size_t j = 0; j < out.cols; ++j)
                if (rng.next_uniform() < spec.mask_prob) out(i, j) = 0.0;
    }
    return out;
}

// z + sigma * eps with eps i.i.d. standard normal; sigma controls how far the
// sampled neighbor strays from the feature it perturbs.
inline Matrix neighborhood_sample(const Matrix& z, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ConfigInvalid("neighborhood_sample: sigma must be >= 0");
    if (sigma == 0.0) return z;
    Matrix out = z;
    for (double& v : out.a) v += sigma * rng.next_gaussian();
    return out;
}

} // namespace cpcc
