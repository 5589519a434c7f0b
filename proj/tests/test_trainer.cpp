#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "cpcc/data.hpp"
#include "cpcc/trainer.hpp"
#include "oracles.hpp"

using namespace cpcc;

namespace {

std::vector<double> flatten(const ModelState& m) {
    std::vector<double> out;
    for (const Affine& l : m.layers) {
        out.insert(out.end(), l.w.a.begin(), l.w.a.end());
        out.insert(out.end(), l.b.begin(), l.b.end());
    }
    return out;
}

bool bit_equal(double a, double b) {
    std::uint64_t ua, ub;
    std::memcpy(&ua, &a, 8);
    std::memcpy(&ub, &b, 8);
    return ua == ub;
}

TrainConfig small_config(std::size_t k) {
    TrainConfig cfg;
    cfg.k = k;
    cfg.epochs = 6;
    cfg.pretrain_epochs = 2;
    cfg.batch_size = 16;
    cfg.encoder_widths = {12, 8};
    cfg.projector_dim = 6;
    cfg.predictor_widths = {6};
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST(BatchLoss, ParameterGradientsMatchFiniteDifferences) {
    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng init(seed * 31 + 7);
        ModelState online = make_model(3, {4}, 3, {3}, init);
        ModelState target = online;
        // nudge the target so stopped tensors differ from the online path
        for (Affine& l : target.layers)
            for (double& v : l.w.a) v += 0.01;

        const std::size_t batch = 4, k = 2;
        Matrix x_t(batch, 3), x_t2(batch, 3), eps(batch, 3), w_rows(batch, k);
        for (double& v : x_t.a) v = rng.next_gaussian();
        for (double& v : x_t2.a) v = rng.next_gaussian();
        for (double& v : eps.a) v = rng.next_gaussian();
        for (double& v : w_rows.a) v = 0.2 + rng.next_uniform();

        BatchLossFlags flags;
        flags.lambda = 0.3;
        flags.sigma = 0.05;
        BatchTargets stopped = capture_batch_targets(online, target, x_t, x_t2);

        BatchLossResult base =
            batch_loss_and_grads(online, stopped, x_t, x_t2, eps, w_rows, flags);
        ASSERT_TRUE(base.spc_evaluated);

        auto objective = [&](const ModelState& m) {
            BatchLossResult r = batch_loss_and_grads(m, stopped, x_t, x_t2, eps, w_rows, flags);
            return r.loss_d + flags.lambda * r.loss_s;
        };

        const double h = 1e-5;
        for (std::size_t l = 0; l < online.layers.size(); ++l) {
            auto check = [&](double& slot, double grad) {
                double keep = slot;
                slot = keep + h;
                double up = objective(online);
                slot = keep - h;
                double down = objective(online);
                slot = keep;
                double fd = (up - down) / (2.0 * h);
                double denom = std::max(std::abs(fd), 1e-6);
                EXPECT_LT(std::abs(grad - fd) / denom, 1e-3)
                    << "seed " << seed << " layer " << l;
            };
            for (std::size_t i = 0; i < online.layers[l].w.a.size(); ++i)
                check(online.layers[l].w.a[i], base.grads.layers[l].w.a[i]);
            for (std::size_t i = 0; i < online.layers[l].b.size(); ++i)
                check(online.layers[l].b[i], base.grads.layers[l].b[i]);
        }
    }
}

TEST(BatchLoss, GradientDecompositionIsLinear) {
    Rng rng(9);
    Rng init(21);
    ModelState online = make_model(3, {4}, 3, {3}, init);
    ModelState target = online;

    const std::size_t batch = 5, k = 2;
    Matrix x_t(batch, 3), x_t2(batch, 3), eps(batch, 3), w_rows(batch, k);
    for (double& v : x_t.a) v = rng.next_gaussian();
    for (double& v : x_t2.a) v = rng.next_gaussian();
    for (double& v : eps.a) v = rng.next_gaussian();
    for (double& v : w_rows.a) v = 0.2 + rng.next_uniform();
    BatchTargets stopped = capture_batch_targets(online, target, x_t, x_t2);

    BatchLossFlags both;
    both.lambda = 0.4;
    BatchLossFlags only_dcl = both;
    only_dcl.spc_in_grads = false;
    BatchLossFlags only_spc = both;
    only_spc.dcl_in_grads = false;

    Gradients g_both =
        batch_loss_and_grads(online, stopped, x_t, x_t2, eps, w_rows, both).grads;
    Gradients g_d =
        batch_loss_and_grads(online, stopped, x_t, x_t2, eps, w_rows, only_dcl).grads;
    Gradients g_s =
        batch_loss_and_grads(online, stopped, x_t, x_t2, eps, w_rows, only_spc).grads;

    for (std::size_t l = 0; l < g_both.layers.size(); ++l) {
        for (std::size_t i = 0; i < g_both.layers[l].w.a.size(); ++i)
            EXPECT_NEAR(g_both.layers[l].w.a[i], g_d.layers[l].w.a[i] + g_s.layers[l].w.a[i],
                        1e-12);
        for (std::size_t i = 0; i < g_both.layers[l].b.size(); ++i)
            EXPECT_NEAR(g_both.layers[l].b[i], g_d.layers[l].b[i] + g_s.layers[l].b[i], 1e-12);
    }
}

TEST(Train, ZeroEpochsReturnsInitialState) {
    Rng rng(1);
    LabeledDataset ds = make_blobs(3, 20, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(3);
    cfg.epochs = 0;
    cfg.pretrain_epochs = 0;
    TrainResult res = train(ds.features, ds.labels, cfg);
    EXPECT_TRUE(res.log.empty());
    EXPECT_EQ(res.labels.size(), ds.features.rows);
    // target must equal online at initialization
    auto o = flatten(res.online), t = flatten(res.target);
    for (std::size_t i = 0; i < o.size(); ++i) EXPECT_TRUE(bit_equal(o[i], t[i]));
}

TEST(Train, DeterministicLogsGivenSeed) {
    Rng rng(2);
    LabeledDataset ds = make_blobs(3, 24, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(3);
    TrainResult a = train(ds.features, ds.labels, cfg);
    TrainResult b = train(ds.features, ds.labels, cfg);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        EXPECT_TRUE(bit_equal(a.log[e].loss_d, b.log[e].loss_d));
        EXPECT_TRUE(bit_equal(a.log[e].loss_s, b.log[e].loss_s) ||
                    (std::isnan(a.log[e].loss_s) && std::isnan(b.log[e].loss_s)));
        EXPECT_TRUE(bit_equal(a.log[e].nmi, b.log[e].nmi));
        EXPECT_TRUE(bit_equal(a.log[e].feature_std, b.log[e].feature_std));
    }
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Train, LambdaIrrelevantDuringPretrain) {
    Rng rng(3);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 4;
    cfg.pretrain_epochs = 4; // entire run is pretraining
    cfg.lambda = 0.1;
    TrainResult a = train(ds.features, ds.labels, cfg);
    cfg.lambda = 0.9;
    TrainResult b = train(ds.features, ds.labels, cfg);
    auto fa = flatten(a.online), fb = flatten(b.online);
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_TRUE(bit_equal(fa[i], fb[i]));
}

TEST(Train, NoSpcMatchesZeroLambda) {
    Rng rng(4);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(2);
    cfg.ablation = Ablation::no_spc;
    TrainResult a = train(ds.features, ds.labels, cfg);
    cfg.ablation = Ablation::full;
    cfg.lambda = 0.0;
    TrainResult b = train(ds.features, ds.labels, cfg);
    auto fa = flatten(a.online), fb = flatten(b.online);
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_TRUE(bit_equal(fa[i], fb[i]));
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Train, LearningRateDecaysLinearlyToZero) {
    Rng rng(5);
    LabeledDataset ds = make_blobs(2, 20, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 5;
    cfg.pretrain_epochs = 1;
    TrainResult res = train(ds.features, ds.labels, cfg);
    ASSERT_EQ(res.log.size(), 5u);
    for (std::size_t e = 0; e < res.log.size(); ++e) {
        double expected =
            cfg.lr_start * (1.0 - static_cast<double>(e + 1) / static_cast<double>(cfg.epochs));
        EXPECT_DOUBLE_EQ(res.log[e].lr, expected);
        EXPECT_GE(res.log[e].lr, 0.0);
    }
    EXPECT_DOUBLE_EQ(res.log.back().lr, 0.0);
}

TEST(Train, EmaHoldsBitExactlyAfterEveryBatch) {
    Rng rng(6);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    for (double m : {0.0, 0.5, 0.996}) {
        TrainConfig cfg = small_config(2);
        cfg.epochs = 3;
        cfg.pretrain_epochs = 1;
        cfg.momentum = m;

        bool have_prev = false;
        std::vector<double> prev_target;
        std::size_t checked = 0;
        auto observer = [&](const BatchEvent& ev) {
            std::vector<double> online = flatten(ev.online);
            std::vector<double> target = flatten(ev.target);
            if (m == 0.0) {
                for (std::size_t i = 0; i < online.size(); ++i)
                    EXPECT_TRUE(bit_equal(target[i], online[i]));
                ++checked;
            } else if (have_prev) {
                for (std::size_t i = 0; i < online.size(); ++i) {
                    double expected = m * prev_target[i] + (1.0 - m) * online[i];
                    EXPECT_TRUE(bit_equal(target[i], expected));
                }
                ++checked;
            }
            prev_target = std::move(target);
            have_prev = true;
        };
        train(ds.features, ds.labels, cfg, observer);
        EXPECT_GT(checked, 0u);
    }
}

TEST(Train, NoWVariantUsesOneHotRows) {
    Rng rng(7);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 2;
    cfg.pretrain_epochs = 0;
    cfg.ablation = Ablation::no_w;
    std::size_t rows_seen = 0;
    auto observer = [&](const BatchEvent& ev) {
        for (std::size_t i = 0; i < ev.weight_rows.rows; ++i) {
            double sum = 0.0;
            int ones = 0;
            for (std::size_t c = 0; c < ev.weight_rows.cols; ++c) {
                double v = ev.weight_rows(i, c);
                EXPECT_TRUE(v == 0.0 || v == 1.0);
                if (v == 1.0) ++ones;
                sum += v;
            }
            EXPECT_EQ(ones, 1);
            EXPECT_DOUBLE_EQ(sum, 1.0);
            ++rows_seen;
        }
    };
    train(ds.features, ds.labels, cfg, observer);
    EXPECT_GT(rows_seen, 0u);

    // the full variant's rows are soft: strictly inside (0,1)
    cfg.ablation = Ablation::full;
    bool saw_soft = false;
    auto observer2 = [&](const BatchEvent& ev) {
        for (std::size_t i = 0; i < ev.weight_rows.rows && !saw_soft; ++i)
            for (std::size_t c = 0; c < ev.weight_rows.cols; ++c) {
                double v = ev.weight_rows(i, c);
                if (v > 0.0 && v < 1.0) saw_soft = true;
            }
    };
    train(ds.features, ds.labels, cfg, observer2);
    EXPECT_TRUE(saw_soft);
}

TEST(Train, CompleteLogsForEveryVariant) {
    Rng rng(8);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 4;
    cfg.pretrain_epochs = 2;
    for (Ablation a : {Ablation::full, Ablation::no_spc, Ablation::no_dcl, Ablation::no_dcl1,
                       Ablation::no_dcl2, Ablation::no_w}) {
        cfg.ablation = a;
        TrainResult res = train(ds.features, ds.labels, cfg);
        ASSERT_EQ(res.log.size(), cfg.epochs) << ablation_name(a);
        for (const EpochLog& e : res.log) {
            EXPECT_GE(e.nmi, 0.0);
            EXPECT_LE(e.nmi, 1.0);
            EXPECT_GE(e.acc, 0.0);
            EXPECT_LE(e.acc, 1.0);
            EXPECT_GE(e.ari, -1.0);
            EXPECT_LE(e.ari, 1.0);
            EXPECT_TRUE(std::isfinite(e.loss_d));
        }
    }
}

TEST(Train, MetricsNanWithoutTruth) {
    Rng rng(9);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 2;
    cfg.pretrain_epochs = 1;
    TrainResult res = train(ds.features, std::nullopt, cfg);
    for (const EpochLog& e : res.log) {
        EXPECT_TRUE(std::isnan(e.nmi));
        EXPECT_TRUE(std::isnan(e.acc));
        EXPECT_TRUE(std::isnan(e.ari));
        EXPECT_TRUE(std::isfinite(e.feature_std));
    }
}

TEST(Train, InvalidConfigsThrow) {
    Rng rng(10);
    LabeledDataset ds = make_blobs(2, 10, 3, 3.0, 0.2, rng);
    TrainConfig cfg = small_config(2);
    cfg.pretrain_epochs = cfg.epochs + 1;
    EXPECT_THROW(train(ds.features, ds.labels, cfg), ConfigInvalid);

    cfg = small_config(2);
    cfg.batch_size = 1;
    EXPECT_THROW(train(ds.features, ds.labels, cfg), ConfigInvalid);

    cfg = small_config(2);
    cfg.batch_size = 1000; // larger than the dataset
    EXPECT_THROW(train(ds.features, ds.labels, cfg), ConfigInvalid);

    cfg = small_config(2);
    HardLabels wrong(3, 0);
    EXPECT_THROW(train(ds.features, wrong, cfg), ConfigInvalid);
}

TEST(BatchLoss, TargetSourcedNoiseGradientsMatchFiniteDifferences) {
    // alternate wiring: the noisy view is built from target features, so only
    // the predictor parameters carry term-2 gradients
    Rng rng(31);
    Rng init(77);
    ModelState online = make_model(3, {4}, 3, {3}, init);
    ModelState target = online;
    for (Affine& l : target.layers)
        for (double& v : l.w.a) v += 0.02;

    const std::size_t batch = 4, k = 2;
    Matrix x_t(batch, 3), x_t2(batch, 3), eps(batch, 3), w_rows(batch, k);
    for (double& v : x_t.a) v = rng.next_gaussian();
    for (double& v : x_t2.a) v = rng.next_gaussian();
    for (double& v : eps.a) v = rng.next_gaussian();
    for (double& v : w_rows.a) v = 0.2 + rng.next_uniform();

    BatchLossFlags flags;
    flags.lambda = 0.2;
    flags.sigma = 0.05;
    flags.dcl2_use_target_features = true;
    BatchTargets stopped = capture_batch_targets(online, target, x_t, x_t2);
    BatchLossResult base = batch_loss_and_grads(online, stopped, x_t, x_t2, eps, w_rows, flags);

    auto objective = [&](const ModelState& m) {
        BatchLossResult r = batch_loss_and_grads(m, stopped, x_t, x_t2, eps, w_rows, flags);
        return r.loss_d + flags.lambda * r.loss_s;
    };
    const double h = 1e-5;
    for (std::size_t l = 0; l < online.layers.size(); ++l)
        for (std::size_t i = 0; i < online.layers[l].w.a.size(); ++i) {
            double keep = online.layers[l].w.a[i];
            online.layers[l].w.a[i] = keep + h;
            double up = objective(online);
            online.layers[l].w.a[i] = keep - h;
            double down = objective(online);
            online.layers[l].w.a[i] = keep;
            double fd = (up - down) / (2.0 * h);
            double denom = std::max(std::abs(fd), 1e-6);
            EXPECT_LT(std::abs(base.grads.layers[l].w.a[i] - fd) / denom, 1e-3);
        }
}

TEST(Train, WiringFlagsRunAndChangeTrajectories) {
    Rng rng(12);
    LabeledDataset ds = make_blobs(2, 24, 4, 3.0, 0.3, rng);
    TrainConfig base = small_config(2);
    base.epochs = 4;
    base.pretrain_epochs = 1;
    TrainResult plain = train(ds.features, ds.labels, base);

    // warm-started clustering converges on the same data and stays finite;
    // losses can legitimately coincide because they ignore cluster order
    {
        TrainConfig cfg = base;
        cfg.reuse_centers = true;
        TrainResult res = train(ds.features, ds.labels, cfg);
        ASSERT_EQ(res.log.size(), cfg.epochs);
        for (const EpochLog& e : res.log) EXPECT_TRUE(std::isfinite(e.loss_d));
        EXPECT_GE(res.log.back().acc, 0.9);
    }

    for (int which = 1; which < 4; ++which) {
        TrainConfig cfg = base;
        if (which == 1) cfg.normalize_before_assign = true;
        if (which == 2) cfg.spc_include_positive_in_denominator = true;
        if (which == 3) cfg.dcl2_use_target_features = true;
        TrainResult res = train(ds.features, ds.labels, cfg);
        ASSERT_EQ(res.log.size(), cfg.epochs);
        for (const EpochLog& e : res.log) EXPECT_TRUE(std::isfinite(e.loss_d));
        // each flag must actually reroute some computation
        bool differs = false;
        for (std::size_t e = 0; e < res.log.size(); ++e)
            differs |= !bit_equal(res.log[e].loss_d, plain.log[e].loss_d) ||
                       !bit_equal(res.log[e].loss_s, plain.log[e].loss_s);
        EXPECT_TRUE(differs) << "flag " << which;
    }
}

TEST(Train, LearnsWellSeparatedBlobs) {
    Rng rng(11);
    LabeledDataset ds = make_blobs(3, 40, 8, 4.0, 0.2, rng);
    TrainConfig cfg = small_config(3);
    cfg.epochs = 20;
    cfg.pretrain_epochs = 8;
    cfg.batch_size = 32;
    TrainResult res = train(ds.features, ds.labels, cfg);
    EXPECT_GE(res.log.back().acc, 0.9);
}
