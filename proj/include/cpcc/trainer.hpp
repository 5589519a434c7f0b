#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpcc/augmentation.hpp"
#include "cpcc/errors.hpp"
#include "cpcc/kmeans.hpp"
#include "cpcc/losses.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/metrics.hpp"
#include "cpcc/model.hpp"
#include "cpcc/numerics.hpp"
#include "cpcc/prototypes.hpp"
#include "cpcc/rng.hpp"
#include "cpcc/soft_assignment.hpp"

namespace cpcc {

enum class Ablation { full, no_spc, no_dcl, no_dcl1, no_dcl2, no_w };

inline const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::no_spc: return "no_spc";
        case Ablation::no_dcl: return "no_dcl";
        case Ablation::no_dcl1: return "no_dcl1";
        case Ablation::no_dcl2: return "no_dcl2";
        case Ablation::no_w: return "no_w";
    }
    return "full";
}

inline Ablation ablation_from_name(const std::string& s) {
    for (Ablation a : {Ablation::full, Ablation::no_spc, Ablation::no_dcl, Ablation::no_dcl1,
                       Ablation::no_dcl2, Ablation::no_w})
        if (s == ablation_name(a)) return a;
    throw ConfigInvalid("unknown ablation variant '" + s + "'");
}

struct TrainConfig {
    std::size_t k = 0;
    std::size_t epochs = 150;
    std::size_t pretrain_epochs = 50;
    std::size_t batch_size = 128;
    double lr_start = 0.05;
    double tau = 0.5;
    double lambda = 0.1;
    double sigma = 0.001;
    double alpha = 1.0;
    double momentum = 0.996;
    std::uint64_t seed = 1;
    Ablation ablation = Ablation::full;

    std::vector<std::size_t> encoder_widths = {64, 32};
    std::size_t projector_dim = 16;
    std::vector<std::size_t> predictor_widths = {16, 16};
    TransformSpec transform;

    bool reuse_centers = false;
    bool normalize_before_assign = false;
    bool spc_include_positive_in_denominator = false;
    bool dcl2_use_target_features = false;

    std::size_t kmeans_max_iter = 100;
    double kmeans_tol = 1e-6;
    std::size_t kmeans_restarts = 10;

    void validate(std::size_t n_samples) const {
        if (k < 2) throw ConfigInvalid("config: k must be >= 2");
        if (n_samples < k) throw ConfigInvalid("config: fewer samples than clusters");
        if (pretrain_epochs > epochs)
            throw ConfigInvalid("config: pretrain_epochs must not exceed epochs");
        if (batch_size < 2) throw ConfigInvalid("config: batch_size must be >= 2");
        if (epochs > 0 && n_samples < batch_size)
            throw ConfigInvalid("config: batch_size exceeds dataset size");
        if (!(lr_start >= 0.0)) throw ConfigInvalid("config: lr_start must be >= 0");
        if (!(tau > 0.0)) throw ConfigInvalid("config: tau must be > 0");
        if (lambda < 0.0) throw ConfigInvalid("config: lambda must be >= 0");
        if (sigma < 0.0) throw ConfigInvalid("config: sigma must be >= 0");
        if (!(alpha > 0.0)) throw ConfigInvalid("config: alpha must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw ConfigInvalid("config: momentum must lie in [0,1)");
        transform.validate();
    }
};

// One row of the per-epoch training log; metric fields are NaN when no
// ground-truth labels were supplied, loss_s is NaN for batches where too few
// prototype pairs were present.
struct EpochLog {
    std::size_t epoch = 0;
    double loss_d = 0.0;
    double loss_s = 0.0;
    double nmi = 0.0;
    double acc = 0.0;
    double ari = 0.0;
    double feature_std = 0.0;
    double lr = 0.0;
};

inline void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "epoch,loss_d,loss_s,nmi,acc,ari,feature_std,lr\n";
    char buf[256];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.loss_d, e.loss_s, e.nmi, e.acc, e.ari, e.feature_std, e.lr);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Mini-batch objective. The target-side tensors are captured once and treated
// as constants, which realizes the stop-gradient contract: parameter
// gradients flow only through the online prediction and prototype paths.

struct BatchTargets {
    Matrix z_t_hat;        // normalized online projection of view t (term-2 target)
    Matrix z_t2_hat;       // normalized target projection of view t' (term-1 target)
    Matrix target_proj_raw; // raw target projection of view t', feeds P'
};

inline BatchTargets capture_batch_targets(const ModelState& online, const ModelState& target,
                                          const Matrix& x_t, const Matrix& x_t2) {
    BatchTargets out;
    out.z_t_hat = l2_normalize_rows(forward(online, x_t, Stage::projector));
    out.target_proj_raw = forward(target, x_t2, Stage::projector);
    out.z_t2_hat = l2_normalize_rows(out.target_proj_raw);
    return out;
}

struct BatchLossFlags {
    double tau = 0.5;
    double lambda = 0.1;
    double sigma = 0.001;
    bool dcl_term1 = true;
    bool dcl_term2 = true;
    bool dcl_in_grads = true;
    bool compute_spc = true;
    bool spc_in_grads = true;
    bool spc_include_positive = false;
    bool dcl2_use_target_features = false;
};

struct BatchLossResult {
    double loss_d = 0.0;
    double loss_s = std::numeric_limits<double>::quiet_NaN();
    bool spc_evaluated = false;
    Gradients grads;
};

// w_rows: one weight row per batch sample (soft weights, or one-hot rows on
// the hard-prototype path).
inline BatchLossResult batch_loss_and_grads(const ModelState& online, const BatchTargets& stopped,
                                            const Matrix& x_t, const Matrix& x_t2,
                                            const Matrix& eps, const Matrix& w_rows,
                                            const BatchLossFlags& flags) {
    BatchLossResult res;
    res.grads = zero_gradients(online);
    const std::size_t k = w_rows.cols;

    // online forward passes
    ForwardCache cache_proj_t, cache_pred_t, cache_proj_t2, cache_pred_t2;
    Matrix y_t = forward(online, x_t, Stage::projector, &cache_proj_t);
    Matrix u = forward_range(online, y_t, online.projector_end, online.layers.size(),
                             &cache_pred_t);
    Matrix u_hat = l2_normalize_rows(u);

    Matrix noisy_base;
    Matrix y_t2;
    if (flags.dcl2_use_target_features) {
        noisy_base = stopped.target_proj_raw;
    } else {
        y_t2 = forward(online, x_t2, Stage::projector, &cache_proj_t2);
        noisy_base = y_t2;
    }
    Matrix noisy = noisy_base;
    for (std::size_t i = 0; i < noisy.a.size(); ++i) noisy.a[i] += flags.sigma * eps.a[i];
    Matrix v = forward_range(online, noisy, online.projector_end, online.layers.size(),
                             &cache_pred_t2);
    Matrix v_hat = l2_normalize_rows(v);

    DclTerms terms{flags.dcl_term1, flags.dcl_term2};
    DclResult dcl = dcl_loss(u_hat, stopped.z_t2_hat, v_hat, stopped.z_t_hat, terms);
    res.loss_d = dcl.value;

    // prototype pairs over clusters present in both views
    SpcResult spc;
    std::vector<std::size_t> present;
    if (flags.compute_spc) {
        PartialPrototypes po = soft_prototypes_present(y_t, w_rows, k);
        PartialPrototypes pt = soft_prototypes_present(stopped.target_proj_raw, w_rows, k);
        std::vector<std::size_t> rows_o, rows_t;
        for (std::size_t a = 0; a < po.clusters.size(); ++a)
            for (std::size_t b = 0; b < pt.clusters.size(); ++b)
                if (po.clusters[a] == pt.clusters[b]) {
                    present.push_back(po.clusters[a]);
                    rows_o.push_back(a);
                    rows_t.push_back(b);
                }
        if (present.size() >= 2) {
            Matrix p = gather_rows(po.p, rows_o);
            Matrix p2 = gather_rows(pt.p, rows_t);
            spc = spc_loss(p, p2, flags.tau, SpcOptions{flags.spc_include_positive});
            res.loss_s = spc.value;
            res.spc_evaluated = true;
        }
    }

    // backward: predictor paths first, then the shared trunk per view
    Matrix dy_t(y_t.rows, y_t.cols);
    bool dy_t_used = false;
    if (flags.dcl_in_grads) {
        if (flags.dcl_term1) {
            Matrix du = l2_normalize_rows_grad(u, dcl.d_pred_t);
            Matrix d = backward_range(online, cache_pred_t, du, res.grads);
            for (std::size_t i = 0; i < dy_t.a.size(); ++i) dy_t.a[i] += d.a[i];
            dy_t_used = true;
        }
        if (flags.dcl_term2) {
            Matrix dv = l2_normalize_rows_grad(v, dcl.d_pred_t2_noisy);
            Matrix dnoisy = backward_range(online, cache_pred_t2, dv, res.grads);
            if (!flags.dcl2_use_target_features)
                backward_range(online, cache_proj_t2, dnoisy, res.grads);
        }
    }
    if (flags.spc_in_grads && res.spc_evaluated) {
        // d loss/d y_i += sum_k w_ik * d loss/d S_k, through sum normalization
        Matrix sums(present.size(), y_t.cols);
        for (std::size_t r = 0; r < present.size(); ++r) {
            std::size_t c = present[r];
            for (std::size_t i = 0; i < y_t.rows; ++i)
                for (std::size_t j = 0; j < y_t.cols; ++j) sums(r, j) += w_rows(i, c) * y_t(i, j);
        }
        Matrix dp = spc.d_p;
        for (double& g : dp.a) g *= flags.lambda;
        Matrix dsums = l2_normalize_rows_grad(sums, dp);
        for (std::size_t r = 0; r < present.size(); ++r) {
            std::size_t c = present[r];
            for (std::size_t i = 0; i < y_t.rows; ++i) {
                double w = w_rows(i, c);
                if (w == 0.0) continue;
                for (std::size_t j = 0; j < y_t.cols; ++j) dy_t(i, j) += w * dsums(r, j);
            }
        }
        dy_t_used = true;
    }
    if (dy_t_used) backward_range(online, cache_proj_t, dy_t, res.grads);
    return res;
}

// ---------------------------------------------------------------------------
// Full training loop.

struct BatchEvent {
    std::size_t epoch = 0; // 1-based
    std::size_t batch = 0;
    double lr = 0.0;
    double loss_d = 0.0;
    double loss_s = 0.0;
    const std::vector<std::size_t>& sample_indices;
    const Matrix& weight_rows;
    const ModelState& online;
    const ModelState& target;
};

using BatchObserver = std::function<void(const BatchEvent&)>;

struct TrainResult {
    ModelState online;
    ModelState target;
    HardLabels labels;
    std::vector<EpochLog> log;
};

namespace detail {

struct EvalOutcome {
    Matrix features;
    HardLabels labels;
};

inline EvalOutcome evaluate_features(const ModelState& target, const Matrix& data,
                                     const TrainConfig& cfg, Rng& rng) {
    EvalOutcome out;
    out.features = forward(target, data, Stage::projector);
    if (cfg.normalize_before_assign) out.features = l2_normalize_rows(out.features);
    out.labels = kmeans_fit(out.features, cfg.k, rng, cfg.kmeans_max_iter, cfg.kmeans_tol,
                            cfg.kmeans_restarts)
                     .second;
    return out;
}

} // namespace detail

// Runs the two-stage procedure: every epoch extracts target features, fits
// k-means, computes confidence weights, then sweeps shuffled mini-batches
// training the online network and synchronizing the target by EMA. During
// the pretraining stage only the consistency loss reaches the parameters;
// the prototype loss joins afterwards. Both loss values are evaluated every
// batch for logging regardless of what the variant feeds to the optimizer.
inline TrainResult train(const Matrix& data, const std::optional<HardLabels>& truth,
                         const TrainConfig& cfg, const BatchObserver& observer = {}) {
    cfg.validate(data.rows);
    if (truth && truth->size() != data.rows)
        throw ConfigInvalid("train: ground-truth label count does not match data");

    Rng master(cfg.seed);
    Rng init_rng = master.split();
    Rng kmeans_rng = master.split();
    Rng batch_rng = master.split();
    Rng aug_rng = master.split();

    TrainResult res;
    res.online = make_model(data.cols, cfg.encoder_widths, cfg.projector_dim,
                            cfg.predictor_widths, init_rng);
    res.target = res.online;

    if (cfg.epochs == 0) {
        res.labels = detail::evaluate_features(res.target, data, cfg, kmeans_rng).labels;
        return res;
    }

    // warm-up probe: degenerate initialization surfaces here, not mid-epoch
    {
        std::size_t probe_n = std::min<std::size_t>(data.rows, cfg.batch_size);
        std::vector<std::size_t> head(probe_n);
        for (std::size_t i = 0; i < probe_n; ++i) head[i] = i;
        Matrix probe = gather_rows(data, head);
        l2_normalize_rows(forward(res.online, probe, Stage::predictor));
        l2_normalize_rows(forward(res.target, probe, Stage::projector));
    }

    const std::size_t n = data.rows;
    const std::size_t n_batches = n / cfg.batch_size;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::optional<Centers> carried_centers;
    HardLabels final_labels;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // epoch setup on full-dataset target features
        Matrix z = forward(res.target, data, Stage::projector);
        if (cfg.normalize_before_assign) z = l2_normalize_rows(z);
        Centers centers;
        HardLabels epoch_labels;
        if (cfg.reuse_centers && carried_centers) {
            auto fit = kmeans_fit_from(z, carried_centers->mu, cfg.kmeans_max_iter, cfg.kmeans_tol);
            centers = std::move(fit.first);
            epoch_labels = std::move(fit.second);
        } else {
            auto fit = kmeans_fit(z, cfg.k, kmeans_rng, cfg.kmeans_max_iter, cfg.kmeans_tol,
                                  cfg.kmeans_restarts);
            centers = std::move(fit.first);
            epoch_labels = std::move(fit.second);
        }
        if (cfg.reuse_centers) carried_centers = centers;
        Matrix weights = compute_weights(soft_assign(z, centers, cfg.alpha)).w;

        const bool contrastive_stage = epoch > cfg.pretrain_epochs;
        const double lr = cfg.lr_start * (1.0 - static_cast<double>(epoch) /
                                                    static_cast<double>(cfg.epochs));

        BatchLossFlags flags;
        flags.tau = cfg.tau;
        flags.lambda = cfg.lambda;
        flags.sigma = cfg.sigma;
        flags.dcl_term1 = cfg.ablation != Ablation::no_dcl1;
        flags.dcl_term2 = cfg.ablation != Ablation::no_dcl2;
        flags.dcl_in_grads = cfg.ablation != Ablation::no_dcl;
        flags.compute_spc = true;
        flags.spc_in_grads = contrastive_stage && cfg.ablation != Ablation::no_spc;
        flags.spc_include_positive = cfg.spc_include_positive_in_denominator;
        flags.dcl2_use_target_features = cfg.dcl2_use_target_features;

        batch_rng.shuffle(order);

        double sum_d = 0.0, sum_s = 0.0;
        std::size_t count_d = 0, count_s = 0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            std::vector<std::size_t> idx(order.begin() + static_cast<long>(b * cfg.batch_size),
                                         order.begin() +
                                             static_cast<long>((b + 1) * cfg.batch_size));
            Matrix x_raw = gather_rows(data, idx);
            Matrix x_t = augment(x_raw, cfg.transform, aug_rng);
            Matrix x_t2 = augment(x_raw, cfg.transform, aug_rng);
            Matrix eps = gaussian_noise(aug_rng, cfg.batch_size, cfg.projector_dim);

            Matrix w_rows;
            if (cfg.ablation == Ablation::no_w) {
                HardLabels bl(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) bl[i] = epoch_labels[idx[i]];
                w_rows = detail::one_hot_weights(bl, cfg.k);
            } else {
                w_rows = gather_rows(weights, idx);
            }

            BatchTargets stopped = capture_batch_targets(res.online, res.target, x_t, x_t2);
            BatchLossResult bl = batch_loss_and_grads(res.online, stopped, x_t, x_t2, eps,
                                                      w_rows, flags);
            sgd_step(res.online, bl.grads, lr);
            ema_update(res.target, res.online, cfg.momentum);

            sum_d += bl.loss_d;
            ++count_d;
            if (bl.spc_evaluated) {
                sum_s += bl.loss_s;
                ++count_s;
            }
            if (observer)
                observer(BatchEvent{epoch, b, lr, bl.loss_d, bl.loss_s, idx, w_rows, res.online,
                                    res.target});
        }

        // post-epoch evaluation on fresh target features
        auto eval = detail::evaluate_features(res.target, data, cfg, kmeans_rng);
        final_labels = eval.labels;

        EpochLog entry;
        entry.epoch = epoch;
        entry.loss_d = count_d ? sum_d / static_cast<double>(count_d)
                               : std::numeric_limits<double>::quiet_NaN();
        entry.loss_s = count_s ? sum_s / static_cast<double>(count_s)
                               : std::numeric_limits<double>::quiet_NaN();
        entry.lr = lr;
        entry.feature_std = feature_std(eval.features);
        if (truth) {
            entry.nmi = nmi(eval.labels, *truth);
            entry.acc = acc(eval.labels, *truth);
            entry.ari = ari(eval.labels, *truth);
        } else {
            entry.nmi = entry.acc = entry.ari = std::numeric_limits<double>::quiet_NaN();
        }
        res.log.push_back(entry);
    }

    res.labels = std::move(final_labels);
    return res;
}

struct AblationRow {
    std::string variant;
    double nmi = 0.0;
    double acc = 0.0;
    double ari = 0.0;
};

// All six variants with a shared seed and otherwise identical configuration.
inline std::vector<AblationRow> run_ablation_suite(const Matrix& data, const HardLabels& truth,
                                                   const TrainConfig& cfg) {
    std::vector<AblationRow> table;
    for (Ablation a : {Ablation::full, Ablation::no_spc, Ablation::no_dcl, Ablation::no_dcl1,
                       Ablation::no_dcl2, Ablation::no_w}) {
        TrainConfig variant = cfg;
        variant.ablation = a;
        TrainResult r = train(data, truth, variant);
        table.push_back({ablation_name(a), nmi(r.labels, truth), acc(r.labels, truth),
                         ari(r.labels, truth)});
    }
    return table;
}

inline void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& table) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "variant,nmi,acc,ari\n";
    char buf[160];
    for (const AblationRow& r : table) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", r.variant.c_str(), r.nmi, r.acc,
                      r.ari);
        out << buf;
    }
}

} // namespace cpcc
