#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aenode/net.hpp"
#include "oracles.hpp"

using namespace aenode;
using Catch::Approx;

TEST_CASE("elu matches its closed form") {
    CHECK(elu(0.0) == 0.0);
    CHECK(elu(3.0) == 3.0);
    CHECK(elu(-1.0) == Approx(std::exp(-1.0) - 1.0).epsilon(1e-12));  // ~ -0.632121
    CHECK(elu(-2.0, 0.5) == Approx(0.5 * (std::exp(-2.0) - 1.0)));
}

TEST_CASE("elu is strictly increasing and has a continuous derivative at 0 for alpha=1") {
    Rng rng(11);
    double prev_x = -20.0, prev_v = elu(prev_x);
    for (int i = 0; i < 2000; ++i) {
        const double x = -20.0 + 40.0 * (i + 1) / 2000.0;
        const double v = elu(x);
        CHECK(v > prev_v);
        prev_v = v;
        prev_x = x;
    }
    (void)prev_x;
    CHECK(elu_deriv(-1e-12) == Approx(1.0).margin(1e-9));
    CHECK(elu_deriv(1e-12) == Approx(1.0).margin(1e-9));
    // saturates instead of misbehaving for very negative inputs
    CHECK(elu(-1e4) == Approx(-1.0));
    (void)rng;
}

TEST_CASE("forward: identity single layer passes positive input through") {
    MlpParams p;
    p.layers.push_back({Mat::Identity(3, 3), Vec::Zero(3)});
    Mat in(2, 3);
    in << 0.3, 1.2, 0.7, 2.0, 0.1, 0.5;
    CHECK((mlp_forward(p, in) - in).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: zero weights give the bias on every row (linear output layer)") {
    MlpParams p;
    Vec b(2);
    b << -1.5, 2.5;
    p.layers.push_back({Mat::Zero(2, 3), b});
    Mat in = Mat::Random(5, 3);
    const Mat out = mlp_forward(p, in);
    for (int r = 0; r < 5; ++r) CHECK((out.row(r).transpose() - b).norm() == 0.0);
}

TEST_CASE("forward: two-layer net matches a hand computation") {
    // hidden: ELU(W1 x + b1), output: W2 h + b2
    MlpParams p;
    Mat w1(2, 2);
    w1 << 1.0, -1.0, 0.5, 0.25;
    Vec b1(2);
    b1 << 0.1, -0.2;
    Mat w2(1, 2);
    w2 << 2.0, -3.0;
    Vec b2(1);
    b2 << 0.05;
    p.layers.push_back({w1, b1});
    p.layers.push_back({w2, b2});

    Mat in(1, 2);
    in << 0.5, -0.5;
    const double z1 = 1.0 * 0.5 + (-1.0) * (-0.5) + 0.1;   // 1.1 -> positive branch
    const double z2 = 0.5 * 0.5 + 0.25 * (-0.5) - 0.2;     // -0.075 -> exp branch
    const double h1 = z1;
    const double h2 = std::exp(z2) - 1.0;
    const double expected = 2.0 * h1 - 3.0 * h2 + 0.05;
    CHECK(mlp_forward(p, in)(0, 0) == Approx(expected).epsilon(1e-14));
}

TEST_CASE("forward: dimension mismatch throws a shape error") {
    Rng rng(1);
    MlpParams p = init_params({3, 4, 2}, rng);
    CHECK_THROWS_AS(mlp_forward(p, Mat::Random(2, 5)), ShapeError);
}

TEST_CASE("forward determinism: identical params and input give bitwise identical output") {
    Rng rng(5);
    MlpParams p = init_params({4, 8, 8, 3}, rng);
    const Mat in = Mat::Random(6, 4);
    const Mat a = mlp_forward(p, in);
    const Mat b = mlp_forward(p, in);
    CHECK(a == b);
}

TEST_CASE("cache exposes exactly the hidden layers plus the output") {
    Rng rng(7);
    MlpParams p = init_params({4, 10, 10, 10, 2}, rng);
    ForwardCache cache;
    mlp_forward(p, Mat::Random(3, 4), &cache);
    CHECK(static_cast<int>(cache.post.size()) == 4);
    CHECK(p.hidden_count() == 3);
    for (int l = 0; l < 3; ++l) CHECK(cache.post[l].cols() == 10);
    CHECK(cache.post.back().cols() == 2);
}

TEST_CASE("backward: identity net propagates the output gradient unchanged") {
    MlpParams p;
    p.layers.push_back({Mat::Identity(3, 3), Vec::Zero(3)});
    ForwardCache cache;
    Mat in(2, 3);
    in << 1.0, 2.0, 3.0, -1.0, 0.5, 0.25;
    mlp_forward(p, in, &cache);
    Mat g = Mat::Random(2, 3);
    const auto bw = mlp_backward(p, cache, g);
    CHECK((bw.grad_input - g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: linear single layer has grad_W = grad_output^T * input") {
    MlpParams p;
    p.layers.push_back({Mat::Random(2, 3), Vec::Zero(2)});
    ForwardCache cache;
    const Mat in = Mat::Random(4, 3);
    mlp_forward(p, in, &cache);
    const Mat g = Mat::Random(4, 2);
    const auto bw = mlp_backward(p, cache, g);
    CHECK((bw.grads[0].weights - g.transpose() * in).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((bw.grads[0].bias - g.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward: stale cache is rejected") {
    Rng rng(2);
    MlpParams p = init_params({3, 4, 2}, rng);
    ForwardCache cache;
    mlp_forward(p, Mat::Random(2, 3), &cache);
    MlpParams other = init_params({3, 5, 2}, rng);
    CHECK_THROWS_AS(mlp_backward(other, cache, Mat::Random(2, 2)), ShapeError);
}

TEST_CASE("backward matches central finite differences on a 3-4-2 net") {
    Rng rng(42);
    MlpParams p = init_params({3, 4, 2}, rng);
    const Mat in = Mat::Random(5, 3);
    const Mat target = Mat::Random(5, 2);

    auto loss = [&](const MlpParams& q) {
        const Mat out = mlp_forward(q, in);
        return 0.5 * (out - target).squaredNorm();
    };
    ForwardCache cache;
    const Mat out = mlp_forward(p, in, &cache);
    const auto bw = mlp_backward(p, cache, out - target);
    const auto fd = oracles::fd_param_gradients(p, loss);
    CHECK(oracles::max_rel_error(bw.grads, fd) < 1e-4);
}

TEST_CASE("gradient correctness holds across random small nets") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed * 977 + 13);
        const int in_d = 2 + static_cast<int>(rng.below(3));
        const int hid = 3 + static_cast<int>(rng.below(4));
        const int out_d = 1 + static_cast<int>(rng.below(3));
        MlpParams p = init_params({in_d, hid, out_d}, rng);
        Mat in(4, in_d), target(4, out_d);
        for (long i = 0; i < in.size(); ++i) in.data()[i] = rng.uniform(-2, 2);
        for (long i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform(-2, 2);

        auto loss = [&](const MlpParams& q) { return 0.5 * (mlp_forward(q, in) - target).squaredNorm(); };
        ForwardCache cache;
        const Mat out = mlp_forward(p, in, &cache);
        const auto bw = mlp_backward(p, cache, out - target);
        const auto fd = oracles::fd_param_gradients(p, loss);
        CHECK(oracles::max_rel_error(bw.grads, fd) < 1e-4);

        // input gradient against finite differences too
        auto loss_of_row = [&](const Vec& x) {
            Mat one = in;
            one.row(0) = x.transpose();
            return 0.5 * (mlp_forward(p, one) - target).squaredNorm();
        };
        const Vec fd_in = oracles::fd_vec_gradient(in.row(0).transpose(), loss_of_row);
        CHECK((bw.grad_input.row(0).transpose() - fd_in).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("init: reproducible per seed, zero biases, chained dims") {
    Rng a(123), b(123);
    const MlpParams pa = init_params({5, 7, 3}, a);
    const MlpParams pb = init_params({5, 7, 3}, b);
    REQUIRE(pa.layers.size() == pb.layers.size());
    for (std::size_t l = 0; l < pa.layers.size(); ++l) {
        CHECK(pa.layers[l].weights == pb.layers[l].weights);
        CHECK(pa.layers[l].bias.isZero(0.0));
    }
    CHECK(pa.in_dim() == 5);
    CHECK(pa.out_dim() == 3);
}

TEST_CASE("init: rejects degenerate configurations") {
    Rng rng(1);
    CHECK_THROWS_AS(init_params({4}, rng), ConfigError);
    CHECK_THROWS_AS(init_params({4, 0, 2}, rng), ConfigError);
}

TEST_CASE("init: weight sample mean is zero within three standard errors") {
    Rng rng(2024);
    // 100k draws from U(-bound, bound), bound = sqrt(6/(fan_in+fan_out))
    const MlpParams p = init_params({250, 400}, rng);  // 100000 weights
    const double bound = std::sqrt(6.0 / (250 + 400));
    const double mean = p.layers[0].weights.mean();
    const double se = bound / std::sqrt(3.0 * 100000.0);  // std of U(-b,b) is b/sqrt(3)
    CHECK(std::abs(mean) < 3.0 * se);
    CHECK(p.layers[0].weights.cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Rng rng(3);
    MlpParams p = init_params({3, 4, 2}, rng);
    const MlpParams before = p;
    AdamState st = AdamState::create(p);
    adam_step(st, p, zero_grads(p));
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        CHECK(p.layers[l].weights == before.layers[l].weights);
        CHECK(p.layers[l].bias == before.layers[l].bias);
    }
}

TEST_CASE("adam: first step with constant gradient moves by ~lr per entry") {
    // at t=1 the bias-corrected moments cancel: step = lr * g/(|g| + eps)
    Rng rng(4);
    MlpParams p = init_params({2, 2}, rng);
    const MlpParams before = p;
    AdamState st = AdamState::create(p);
    MlpGrads g = zero_grads(p);
    g[0].weights.setConstant(0.37);
    adam_step(st, p, g);
    const Mat delta = before.layers[0].weights - p.layers[0].weights;
    for (long i = 0; i < delta.size(); ++i) CHECK(delta.data()[i] == Approx(1e-3).epsilon(1e-4));
    CHECK(st.step == 1);
}

TEST_CASE("adam: identical calls from identical state give identical results") {
    Rng rng(5);
    MlpParams p1 = init_params({3, 5, 2}, rng);
    MlpParams p2 = p1;
    AdamState s1 = AdamState::create(p1);
    AdamState s2 = AdamState::create(p2);
    Rng grng(9);
    MlpGrads g = zero_grads(p1);
    for (auto& l : g) {
        for (long i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = grng.uniform(-1, 1);
        for (long i = 0; i < l.bias.size(); ++i) l.bias(i) = grng.uniform(-1, 1);
    }
    for (int k = 0; k < 5; ++k) {
        adam_step(s1, p1, g);
        adam_step(s2, p2, g);
    }
    for (std::size_t l = 0; l < p1.layers.size(); ++l) {
        CHECK(p1.layers[l].weights == p2.layers[l].weights);
        CHECK(p1.layers[l].bias == p2.layers[l].bias);
    }
}

TEST_CASE("adam: non-finite gradient raises an optimizer error") {
    Rng rng(6);
    MlpParams p = init_params({2, 2}, rng);
    AdamState st = AdamState::create(p);
    MlpGrads g = zero_grads(p);
    g[0].weights(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(st, p, g), OptimizerError);
}
