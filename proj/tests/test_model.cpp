#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aenode/model.hpp"
#include "oracles.hpp"

using namespace aenode;
using Catch::Approx;

namespace {

MlpParams single_layer(double w) {
    MlpParams p;
    p.layers.push_back({Mat::Constant(1, 1, w), Vec::Zero(1)});
    return p;
}

/// encode = x2, latent field = 0, decode = x0.5
AENodeModel hand_model() {
    AENodeModel m;
    m.encoder = single_layer(2.0);
    m.node = single_layer(0.0);
    m.decoder = single_layer(0.5);
    return m;
}

Dataset toy_dataset(std::uint64_t seed, int n_trajs = 6, int samples = 24) {
    const StiffSystem sys = make_ignition_system();
    GenerateOptions opt;
    opt.t_end = 5e-3;
    opt.tol = 1e-7;
    opt.seed = seed;
    opt.snapshot.samples_per_traj = samples;
    std::vector<InitialCondition> sweep;
    for (int i = 0; i < n_trajs; ++i)
        sweep.push_back({ignition_initial_state(1000.0 + 25.0 * i, 0.8 + 0.05 * i),
                         {{"T_init", 1000.0 + 25.0 * i}, {"phi", 0.8 + 0.05 * i}}});
    return generate_dataset(sys, sweep, opt);
}

bool models_equal(const AENodeModel& a, const AENodeModel& b) {
    auto eq = [](const MlpParams& x, const MlpParams& y) {
        if (x.layers.size() != y.layers.size()) return false;
        for (std::size_t l = 0; l < x.layers.size(); ++l)
            if (x.layers[l].weights != y.layers[l].weights || x.layers[l].bias != y.layers[l].bias)
                return false;
        return true;
    };
    return eq(a.encoder, b.encoder) && eq(a.node, b.node) && eq(a.decoder, b.decoder);
}

}  // namespace

TEST_CASE("hand-built linear model reproduces the worked loss values") {
    const AENodeModel m = hand_model();
    Vec one(1), two(1);
    one << 1.0;
    two << 2.0;
    const LossTriple fixed = loss_components(m, one, one, 0.1, 4);
    CHECK(fixed.l1 == Approx(0.0).margin(1e-15));
    CHECK(fixed.l2 == Approx(0.0).margin(1e-15));
    CHECK(fixed.l3 == Approx(0.0).margin(1e-15));

    const LossTriple moved = loss_components(m, one, two, 0.1, 4);
    CHECK(moved.l1 == Approx(1.0));  // decode(2) = 1 vs target 2
    CHECK(moved.l2 == Approx(0.0).margin(1e-15));
    CHECK(moved.l3 == Approx(2.0));  // encode(2) = 4 vs latent 2
}

TEST_CASE("losses are non-negative for arbitrary inputs") {
    Rng rng(17);
    AENodeModel m = build_model({3, 2, 6, 2}, rng);
    for (int k = 0; k < 20; ++k) {
        Vec a(3), b(3);
        for (int i = 0; i < 3; ++i) {
            a(i) = rng.uniform(-2, 2);
            b(i) = rng.uniform(-2, 2);
        }
        const LossTriple t = loss_components(m, a, b, 0.05, 2);
        CHECK(t.l1 >= 0.0);
        CHECK(t.l2 >= 0.0);
        CHECK(t.l3 >= 0.0);
    }
}

TEST_CASE("encode/decode: untrained output is finite; batches are row-independent") {
    Rng rng(23);
    const AENodeModel m = build_model({4, 3, 8, 2}, rng);
    Mat batch = Mat::Random(7, 4);
    const Mat z = encode(m, batch);
    const Mat back = decode(m, z);
    CHECK(all_finite(z));
    CHECK(all_finite(back));
    for (int r = 0; r < 7; ++r) {
        const Mat zr = encode(m, batch.row(r));
        CHECK((zr - z.row(r)).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("train_step: all-zero loss weights leave parameters untouched") {
    Rng rng(29);
    AENodeModel m = build_model({3, 2, 5, 2}, rng);
    const AENodeModel before = m;
    TrainConfig cfg;
    cfg.eps1 = cfg.eps2 = cfg.eps3 = 0.0;
    OptimizerStates opt = OptimizerStates::create(m, cfg.learning_rate);
    std::vector<detail::PairGroup> groups(1);
    groups[0].y0 = Mat::Random(4, 3);
    groups[0].y1 = Mat::Random(4, 3);
    groups[0].dt = 0.1;
    const StepRecord rec = train_step(m, groups, cfg, opt);
    CHECK(!rec.rejected);
    CHECK(models_equal(m, before));
}

TEST_CASE("every loss gradient matches end-to-end finite differences on a 3->2 toy") {
    Rng rng(31);
    AENodeModel m = build_model({3, 2, 4, 2}, rng);
    // two dt buckets in one batch to cover the grouped path
    std::vector<detail::PairGroup> groups(2);
    groups[0].y0 = Mat::Random(2, 3);
    groups[0].y1 = Mat::Random(2, 3);
    groups[0].dt = 0.3;
    groups[1].y0 = Mat::Random(1, 3);
    groups[1].y1 = Mat::Random(1, 3);
    groups[1].dt = 0.15;
    const int steps = 24;

    ModelGrads g1, g2, g3;
    const double l1 = detail::l1_gradients(m, groups, steps, g1);
    const double l2 = detail::l2_gradients(m, groups, g2);
    const double l3 = detail::l3_gradients(m, groups, steps, g3);
    CHECK(l1 > 0);
    CHECK(l2 > 0);
    CHECK(l3 > 0);

    auto check_block = [&](const char* tag, const MlpGrads& analytic, MlpParams AENodeModel::*block,
                           int which_loss) {
        AENodeModel probe = m;
        auto loss = [&](const MlpParams& q) {
            probe.*block = q;
            const LossTriple t = loss_components(probe, groups, steps);
            return which_loss == 1 ? t.l1 : which_loss == 2 ? t.l2 : t.l3;
        };
        const MlpGrads fd = oracles::fd_param_gradients(m.*block, loss);
        INFO(tag);
        CHECK(oracles::max_rel_error(analytic, fd, 1e-6) < 1e-3);
    };
    check_block("L1/theta", g1.encoder, &AENodeModel::encoder, 1);
    check_block("L1/beta", g1.node, &AENodeModel::node, 1);
    check_block("L1/gamma", g1.decoder, &AENodeModel::decoder, 1);
    check_block("L2/theta", g2.encoder, &AENodeModel::encoder, 2);
    check_block("L2/gamma", g2.decoder, &AENodeModel::decoder, 2);
    check_block("L3/theta", g3.encoder, &AENodeModel::encoder, 3);
    check_block("L3/beta", g3.node, &AENodeModel::node, 3);
}

TEST_CASE("train_step rejects a diverging step and rolls the parameters back") {
    Rng rng(37);
    AENodeModel m = build_model({2, 2, 4, 1}, rng);
    // blow up the latent field so the forward solve overflows
    for (auto& l : m.node.layers) l.weights *= 1e8;
    const AENodeModel before = m;
    TrainConfig cfg;
    OptimizerStates opt = OptimizerStates::create(m, cfg.learning_rate);
    std::vector<detail::PairGroup> groups(1);
    groups[0].y0 = Mat::Random(3, 2);
    groups[0].y1 = Mat::Random(3, 2);
    groups[0].dt = 10.0;
    const StepRecord rec = train_step(m, groups, cfg, opt);
    CHECK(rec.rejected);
    CHECK(models_equal(m, before));
    CHECK(opt.encoder.step == 0);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const Dataset ds = toy_dataset(5, 3, 10);
    TrainConfig cfg;
    cfg.passes = 2;
    cfg.batch_size = 16;
    cfg.latent_steps = 2;
    cfg.seed = 77;
    Rng r1(404), r2(404);
    AENodeModel m1 = build_model({4, 2, 8, 1}, r1);
    AENodeModel m2 = build_model({4, 2, 8, 1}, r2);
    train(m1, ds, cfg);
    train(m2, ds, cfg);
    CHECK(models_equal(m1, m2));
}

TEST_CASE("train: zero pass budget returns the model unchanged with a warning status") {
    const Dataset ds = toy_dataset(6, 3, 10);
    Rng rng(41);
    AENodeModel m = build_model({4, 2, 6, 1}, rng);
    const AENodeModel before = m;
    TrainConfig cfg;
    cfg.passes = 0;
    const TrainHistory hist = train(m, ds, cfg);
    CHECK(models_equal(m, before));
    CHECK(hist.status == TrainStatus::NoAcceptedEpoch);
    CHECK(hist.accepted_epochs == 0);
}

TEST_CASE("train: accepted epochs have strictly decreasing test losses and fire the hook") {
    const Dataset ds = toy_dataset(7, 4, 14);
    Rng rng(43);
    AENodeModel m = build_model({4, 2, 10, 2}, rng);
    TrainConfig cfg;
    cfg.passes = 6;
    cfg.batch_size = 32;
    cfg.latent_steps = 2;
    cfg.seed = 3;
    int hook_calls = 0;
    double last = std::numeric_limits<double>::infinity();
    const TrainHistory hist = train(m, ds, cfg, [&](int epoch, const AENodeModel&, double test_loss) {
        ++hook_calls;
        CHECK(epoch == hook_calls);
        CHECK(test_loss < last);
        last = test_loss;
    });
    CHECK(hist.accepted_epochs == hook_calls);
    CHECK(hook_calls >= 1);
    REQUIRE(hist.snapshots.size() == static_cast<std::size_t>(hist.accepted_epochs) + 1);
    CHECK(hist.snapshots.front().epoch == 0);
    for (std::size_t i = 2; i < hist.snapshots.size(); ++i)
        CHECK(hist.snapshots[i].test_loss < hist.snapshots[i - 1].test_loss);
}

TEST_CASE("train: short run reduces the autoencoder test loss on the toy dataset") {
    const Dataset ds = toy_dataset(8, 5, 16);
    Rng rng(47);
    AENodeModel m = build_model({4, 3, 16, 2}, rng);
    TrainConfig cfg;
    cfg.passes = 8;
    cfg.batch_size = 32;
    cfg.latent_steps = 2;
    cfg.seed = 9;
    const LossTriple before = evaluate_losses(m, ds, ds.test_idx, cfg.latent_steps);
    train(m, ds, cfg);
    const LossTriple after = evaluate_losses(m, ds, ds.test_idx, cfg.latent_steps);
    CHECK(after.l2 < before.l2);
    CHECK(after.total(cfg) < before.total(cfg));
}

TEST_CASE("train: interrupted run resumes bit-identically") {
    const Dataset ds = toy_dataset(9, 3, 12);
    TrainConfig cfg;
    cfg.batch_size = 24;
    cfg.latent_steps = 2;
    cfg.seed = 21;

    Rng r1(777), r2(777);
    AENodeModel straight = build_model({4, 2, 8, 1}, r1);
    cfg.passes = 6;
    TrainState state_straight;
    train(straight, ds, cfg, {}, &state_straight);

    AENodeModel resumed = build_model({4, 2, 8, 1}, r2);
    TrainConfig half = cfg;
    half.passes = 3;
    TrainState state;
    train(resumed, ds, half, {}, &state);
    train(resumed, ds, cfg, {}, &state);  // continue to the full budget

    CHECK(models_equal(straight, resumed));
    CHECK(state.iter == state_straight.iter);
    CHECK(state.best_test_loss == state_straight.best_test_loss);
}

TEST_CASE("predict: single-point grid is decode(encode(y0)); latent width is N_L") {
    Rng rng(53);
    const AENodeModel m = build_model({4, 3, 6, 1}, rng);
    NormInfo norm;
    norm.mins = Vec::Zero(4);
    norm.maxs = Vec::Ones(4);
    norm.degenerate.assign(4, 0);
    Vec y0(4);
    y0 << 0.3, 0.5, 0.1, 0.9;
    const Prediction p = predict_trajectory(m, norm, y0, {0.0});
    CHECK(p.latent.states.rows() == 1);
    CHECK(p.latent.width() == 3);
    const Mat expected = decode(m, encode(m, y0.transpose()));
    CHECK((p.physical.states - expected).cwiseAbs().maxCoeff() < 1e-14);

    const Prediction longer = predict_trajectory(m, norm, y0, {0.0, 0.1, 0.2, 0.35}, 3);
    CHECK(longer.latent.states.rows() == 4);
    CHECK(longer.latent.width() == 3);
    CHECK(longer.physical.states.rows() == 4);
    CHECK_THROWS_AS(predict_trajectory(m, norm, y0, {0.0, 0.2, 0.1}), ConfigError);
}

TEST_CASE("rrmse: exact zero, pure scaling, and zero-norm flagging") {
    Mat truth = Mat::Random(32, 3).array() + 2.0;
    const RrmseResult zero = rrmse(truth, truth);
    for (int j = 0; j < 3; ++j) CHECK(zero.percent(j) == 0.0);

    const RrmseResult scaled = rrmse(1.01 * truth, truth);
    for (int j = 0; j < 3; ++j) CHECK(scaled.percent(j) == Approx(1.0).epsilon(1e-9));

    Mat with_zero = truth;
    with_zero.col(1).setZero();
    const RrmseResult flagged = rrmse(truth, with_zero);
    CHECK(flagged.undefined[1] == 1);
    CHECK(std::isnan(flagged.percent(1)));
    CHECK(flagged.undefined[0] == 0);
}

TEST_CASE("trajectory sharpness separates a front from a ramp") {
    std::vector<double> times;
    Mat step(101, 1), ramp(101, 1);
    for (int i = 0; i <= 100; ++i) {
        times.push_back(i * 0.01);
        ramp(i, 0) = i * 0.01;
        step(i, 0) = 1.0 / (1.0 + std::exp(-(i - 50.0)));  // logistic front
    }
    const double s_ramp = trajectory_sharpness(times, ramp);
    const double s_step = trajectory_sharpness(times, step);
    CHECK(s_ramp == Approx(1.0).epsilon(1e-9));
    CHECK(s_step > 5.0 * s_ramp);
}

TEST_CASE("snapshot thinning keeps ends and halves the interior") {
    std::vector<EpochSnapshot> snaps;
    for (int e = 0; e <= 12; ++e) snaps.push_back({e, e * 10L, 1.0 / (e + 1), AENodeModel{}});
    detail::thin_snapshots(snaps, 8);
    CHECK(snaps.size() <= 8);
    CHECK(snaps.front().epoch == 0);
    CHECK(snaps.back().epoch == 12);
}
