#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/rng.hpp"

namespace cpcc {

// One affine layer, y = x W + b with W of shape in x out.
struct Affine {
    Matrix w;
    std::vector<double> b;
};

// Encoder + projector + predictor as one ordered affine stack with tanh on
// the hidden layers. Layers [0, projector_end) form the encoder+projector
// trunk shared by both networks; the remaining layers are the predictor head
// that only the online network evaluates. The target network carries the
// same shapes and is only ever written through ema_update.
struct ModelState {
    std::vector<Affine> layers;
    std::vector<std::uint8_t> tanh_after; // nonlinearity flag per layer
    std::size_t projector_end = 0;

    std::size_t input_dim() const { return layers.front().w.rows; }
    std::size_t projector_dim() const { return layers[projector_end - 1].w.cols; }
    std::size_t output_dim() const { return layers.back().w.cols; }
};

// Gradient holder congruent with a ModelState's parameters.
struct Gradients {
    std::vector<Affine> layers;
};

enum class Stage { projector, predictor };

// Weights uniform in +-1/sqrt(fan_in), biases zero.
inline ModelState make_model(std::size_t input_dim, const std::vector<std::size_t>& encoder_widths,
                             std::size_t projector_dim,
                             const std::vector<std::size_t>& predictor_widths, Rng& rng) {
    ModelState m;
    std::vector<std::size_t> dims{input_dim};
    for (std::size_t w : encoder_widths) dims.push_back(w);
    dims.push_back(projector_dim);
    m.projector_end = dims.size() - 1;
    for (std::size_t w : predictor_widths) dims.push_back(w);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Affine layer{Matrix(dims[l], dims[l + 1]), std::vector<double>(dims[l + 1], 0.0)};
        double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (double& v : layer.w.a) v = (2.0 * rng.next_uniform() - 1.0) * bound;
        m.layers.push_back(std::move(layer));
    }
    m.tanh_after.assign(m.layers.size(), 1);
    m.tanh_after[m.projector_end - 1] = 0;    // projector output is linear
    m.tanh_after[m.layers.size() - 1] = 0;    // predictor output is linear
    return m;
}

// Activations cached by a forward pass over layers [lo, hi).
struct ForwardCache {
    std::size_t lo = 0, hi = 0;
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> outputs; // post-activation output of each layer
};

inline Matrix forward_range(const ModelState& m, const Matrix& x, std::size_t lo, std::size_t hi,
                            ForwardCache* cache = nullptr) {
    if (lo >= hi || hi > m.layers.size())
        throw DimensionMismatch("forward_range: bad layer range");
    if (x.cols != m.layers[lo].w.rows)
        throw DimensionMismatch("forward: input dim " + std::to_string(x.cols) +
                                ", layer expects " + std::to_string(m.layers[lo].w.rows));
    if (cache) {
        cache->lo = lo;
        cache->hi = hi;
        cache->inputs.clear();
        cache->outputs.clear();
    }
    Matrix cur = x;
    for (std::size_t l = lo; l < hi; ++l) {
        const Affine& layer = m.layers[l];
        Matrix next(cur.rows, layer.w.cols);
        for (std::size_t i = 0; i < cur.rows; ++i)
            for (std::size_t j = 0; j < layer.w.cols; ++j) {
                double s = layer.b[j];
                for (std::size_t c = 0; c < cur.cols; ++c) s += cur(i, c) * layer.w(c, j);
                next(i, j) = s;
            }
        if (m.tanh_after[l])
            for (double& v : next.a) v = std::tanh(v);
        if (cache) {
            cache->inputs.push_back(std::move(cur));
            cache->outputs.push_back(next);
        }
        cur = std::move(next);
    }
    return cur;
}

inline Matrix forward(const ModelState& m, const Matrix& x, Stage stage,
                      ForwardCache* cache = nullptr) {
    std::size_t hi = stage == Stage::projector ? m.projector_end : m.layers.size();
    return forward_range(m, x, 0, hi, cache);
}

inline Gradients zero_gradients(const ModelState& m) {
    Gradients g;
    for (const Affine& l : m.layers)
        g.layers.push_back({Matrix(l.w.rows, l.w.cols), std::vector<double>(l.b.size(), 0.0)});
    return g;
}

// Backpropagates dout (gradient w.r.t. the range's output) through the cached
// range, accumulating parameter gradients into accum; returns the gradient
// w.r.t. the range's input.
inline Matrix backward_range(const ModelState& m, const ForwardCache& cache, const Matrix& dout,
                             Gradients& accum) {
    if (cache.inputs.size() != cache.hi - cache.lo || accum.layers.size() != m.layers.size())
        throw StaleCache("backward_range: cache does not match model");
    Matrix cur = dout;
    for (std::size_t step = cache.hi; step > cache.lo; --step) {
        std::size_t l = step - 1;
        const Affine& layer = m.layers[l];
        const Matrix& input = cache.inputs[l - cache.lo];
        const Matrix& output = cache.outputs[l - cache.lo];
        if (!cur.same_shape(output)) throw StaleCache("backward_range: gradient shape mismatch");

        Matrix dpre = cur; // gradient w.r.t. pre-activation
        if (m.tanh_after[l])
            for (std::size_t i = 0; i < dpre.a.size(); ++i)
                dpre.a[i] *= 1.0 - output.a[i] * output.a[i];

        Affine& g = accum.layers[l];
        for (std::size_t i = 0; i < input.rows; ++i)
            for (std::size_t c = 0; c < input.cols; ++c) {
                const double xv = input(i, c);
                for (std::size_t j = 0; j < layer.w.cols; ++j) g.w(c, j) += xv * dpre(i, j);
            }
        for (std::size_t i = 0; i < input.rows; ++i)
            for (std::size_t j = 0; j < layer.w.cols; ++j) g.b[j] += dpre(i, j);

        Matrix dinput(input.rows, input.cols);
        for (std::size_t i = 0; i < input.rows; ++i)
            for (std::size_t c = 0; c < input.cols; ++c) {
                double s = 0.0;
                for (std::size_t j = 0; j < layer.w.cols; ++j) s += dpre(i, j) * layer.w(c, j);
                dinput(i, c) = s;
            }
        cur = std::move(dinput);
    }
    return cur;
}

inline Gradients backward(const ModelState& m, const ForwardCache& cache, const Matrix& dout) {
    Gradients g = zero_gradients(m);
    backward_range(m, cache, dout, g);
    return g;
}

inline void sgd_step(ModelState& m, const Gradients& g, double lr) {
    if (lr < 0.0) throw ConfigInvalid("sgd_step: negative learning rate");
    if (g.layers.size() != m.layers.size()) throw DimensionMismatch("sgd_step: layer count");
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        for (std::size_t i = 0; i < m.layers[l].w.a.size(); ++i)
            m.layers[l].w.a[i] -= lr * g.layers[l].w.a[i];
        for (std::size_t i = 0; i < m.layers[l].b.size(); ++i)
            m.layers[l].b[i] -= lr * g.layers[l].b[i];
    }
}

// theta_T <- m * theta_T + (1 - m) * theta_O, elementwise.
inline void ema_update(ModelState& target, const ModelState& online, double m) {
    if (!(m >= 0.0 && m < 1.0))
        throw InvalidMomentum("ema_update: momentum must lie in [0,1), got " + std::to_string(m));
    if (target.layers.size() != online.layers.size())
        throw DimensionMismatch("ema_update: layer count");
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        Affine& t = target.layers[l];
        const Affine& o = online.layers[l];
        if (!t.w.same_shape(o.w) || t.b.size() != o.b.size())
            throw DimensionMismatch("ema_update: layer " + std::to_string(l) + " shape");
        for (std::size_t i = 0; i < t.w.a.size(); ++i)
            t.w.a[i] = m * t.w.a[i] + (1.0 - m) * o.w.a[i];
        for (std::size_t i = 0; i < t.b.size(); ++i) t.b[i] = m * t.b[i] + (1.0 - m) * o.b[i];
    }
}

// Checkpoint: "CPCC" magic, u32 version, u32 layer count, u32 projector_end,
// per-layer u32 in/out dims plus a nonlinearity byte, then all parameters as
// little-endian 64-bit floats (weights row-major, then biases, per layer).
namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ofstream& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const ModelState& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.write("CPCC", 4);
    detail::put_u32(out, 1u);
    detail::put_u32(out, static_cast<std::uint32_t>(m.layers.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.projector_end));
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        detail::put_u32(out, static_cast<std::uint32_t>(m.layers[l].w.rows));
        detail::put_u32(out, static_cast<std::uint32_t>(m.layers[l].w.cols));
        out.put(static_cast<char>(m.tanh_after[l]));
    }
    for (const Affine& l : m.layers) {
        for (double v : l.w.a) detail::put_f64(out, v);
        for (double v : l.b) detail::put_f64(out, v);
    }
    if (!out) throw Error("short write to " + path);
}

inline ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CPCC", 4) != 0)
        throw ParseError(path + ": bad checkpoint magic");
    std::uint32_t version = detail::get_u32(in);
    if (version != 1u) throw ParseError(path + ": unsupported checkpoint version");
    std::uint32_t n_layers = detail::get_u32(in);
    ModelState m;
    m.projector_end = detail::get_u32(in);
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        std::uint32_t in_dim = detail::get_u32(in);
        std::uint32_t out_dim = detail::get_u32(in);
        int act = in.get();
        if (act < 0) throw ParseError(path + ": truncated header");
        m.layers.push_back({Matrix(in_dim, out_dim), std::vector<double>(out_dim, 0.0)});
        m.tanh_after.push_back(static_cast<std::uint8_t>(act));
    }
    for (Affine& l : m.layers) {
        for (double& v : l.w.a) v = detail::get_f64(in);
        for (double& v : l.b) v = detail::get_f64(in);
    }
    if (!in) throw ParseError(path + ": truncated parameters");
    if (m.projector_end == 0 || m.projector_end > m.layers.size())
        throw ParseError(path + ": invalid projector boundary");
    return m;
}

} // namespace cpcc
