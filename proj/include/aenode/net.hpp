#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aenode/common.hpp"
#include "aenode/rng.hpp"

namespace aenode {

/// Exponential linear unit: x for x > 0, alpha*(exp(x)-1) otherwise.
inline double elu(double x, double alpha = 1.0) {
    return x > 0.0 ? x : alpha * (std::exp(x) - 1.0);
}

/// d/dx elu(x). Continuous at 0 when alpha = 1.
inline double elu_deriv(double x, double alpha = 1.0) {
    return x > 0.0 ? 1.0 : alpha * std::exp(x);
}

struct Layer {
    Mat weights;  // out_dim x in_dim
    Vec bias;     // out_dim
};

/// Fully connected network. ELU on every layer except the last, which is
/// linear. Batches are row-major: one sample per row.
struct MlpParams {
    std::vector<Layer> layers;
    double elu_alpha = 1.0;

    int in_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols()); }
    int out_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows()); }
    int hidden_count() const { return static_cast<int>(layers.size()) - 1; }

    long param_count() const {
        long n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.bias.size();
        return n;
    }
};

/// Gradients (or any other quantity) shaped like an MlpParams.
using MlpGrads = std::vector<Layer>;

inline MlpGrads zero_grads(const MlpParams& p) {
    MlpGrads g;
    g.reserve(p.layers.size());
    for (const auto& l : p.layers)
        g.push_back({Mat::Zero(l.weights.rows(), l.weights.cols()), Vec::Zero(l.bias.size())});
    return g;
}

/// Pre- and post-activation values for each layer of one forward pass.
/// post[l] for hidden layers is what the information-plane probes read.
struct ForwardCache {
    Mat input;             // batch x in_dim
    std::vector<Mat> pre;  // batch x layer_out, one per layer
    std::vector<Mat> post; // batch x layer_out, one per layer (post.back() is the output)
};

inline void check_mlp_shapes(const MlpParams& p) {
    if (p.layers.empty()) throw ShapeError("mlp has no layers");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& lay = p.layers[l];
        if (lay.weights.rows() != lay.bias.size())
            throw ShapeError("layer " + std::to_string(l) + ": bias/weight row mismatch");
        if (l > 0 && p.layers[l - 1].weights.rows() != lay.weights.cols())
            throw ShapeError("layer " + std::to_string(l) + ": width does not chain");
    }
}

inline Mat mlp_forward(const MlpParams& p, const Mat& input, ForwardCache* cache = nullptr) {
    if (p.layers.empty()) throw ShapeError("mlp has no layers");
    if (input.cols() != p.in_dim())
        throw ShapeError("input width " + std::to_string(input.cols()) + " != first layer width " +
                         std::to_string(p.in_dim()));
    if (cache) {
        cache->input = input;
        cache->pre.clear();
        cache->post.clear();
        cache->pre.reserve(p.layers.size());
        cache->post.reserve(p.layers.size());
    }
    Mat x = input;
    const std::size_t n_layers = p.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& lay = p.layers[l];
        Mat z = x * lay.weights.transpose();
        z.rowwise() += lay.bias.transpose();
        const bool last = (l + 1 == n_layers);
        Mat t = last ? z : z.unaryExpr([a = p.elu_alpha](double v) { return elu(v, a); });
        if (cache) {
            cache->pre.push_back(z);
            cache->post.push_back(t);
        }
        x = std::move(t);
    }
    return x;
}

struct BackwardResult {
    MlpGrads grads;
    Mat grad_input;  // batch x in_dim
};

/// Reverse pass for the cached batch. grad_output is dL/d(output), same
/// shape as the forward output; parameter gradients are summed over the
/// batch rows.
inline BackwardResult mlp_backward(const MlpParams& p, const ForwardCache& cache, const Mat& grad_output) {
    const std::size_t n_layers = p.layers.size();
    if (cache.pre.size() != n_layers || cache.post.size() != n_layers)
        throw ShapeError("cache does not match network depth");
    if (grad_output.rows() != cache.input.rows() || grad_output.cols() != p.out_dim())
        throw ShapeError("grad_output shape mismatch");
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Mat& below = (l == 0) ? cache.input : cache.post[l - 1];
        if (cache.pre[l].cols() != p.layers[l].weights.rows() ||
            below.cols() != p.layers[l].weights.cols())
            throw ShapeError("stale cache: layer " + std::to_string(l) + " width changed");
    }

    BackwardResult out;
    out.grads.resize(n_layers);
    Mat dt = grad_output;
    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& lay = p.layers[l];
        if (dt.cols() != lay.weights.rows()) throw ShapeError("stale cache: layer width changed");
        Mat dz;
        if (l + 1 == n_layers) {
            dz = std::move(dt);  // linear output layer
        } else {
            dz = dt.cwiseProduct(
                cache.pre[l].unaryExpr([a = p.elu_alpha](double v) { return elu_deriv(v, a); }));
        }
        const Mat& below = (l == 0) ? cache.input : cache.post[l - 1];
        out.grads[l].weights = dz.transpose() * below;
        out.grads[l].bias = dz.colwise().sum().transpose();
        dt = dz * lay.weights;
    }
    out.grad_input = std::move(dt);
    return out;
}

/// Glorot-uniform weights, zero biases. dims = {in, hidden..., out}.
inline MlpParams init_params(const std::vector<int>& dims, Rng& rng, double elu_alpha = 1.0) {
    if (dims.size() < 2) throw ConfigError("init_params needs at least input and output dims");
    MlpParams p;
    p.elu_alpha = elu_alpha;
    for (std::size_t l = 1; l < dims.size(); ++l) {
        const int fan_in = dims[l - 1];
        const int fan_out = dims[l];
        if (fan_in <= 0 || fan_out <= 0) throw ConfigError("zero-width layer in dims");
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Layer lay{Mat(fan_out, fan_in), Vec::Zero(fan_out)};
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) lay.weights(i, j) = rng.uniform(-bound, bound);
        p.layers.push_back(std::move(lay));
    }
    return p;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    MlpGrads m;  // first moments, shaped like the params
    MlpGrads v;  // second moments
    long step = 0;
    AdamConfig cfg;

    static AdamState create(const MlpParams& p, const AdamConfig& cfg = {}) {
        return AdamState{zero_grads(p), zero_grads(p), 0, cfg};
    }
};

/// One Adam update in place. lr_scale multiplies the learning rate for
/// this call only (used for the per-loss epsilon weights).
inline void adam_step(AdamState& st, MlpParams& params, const MlpGrads& grads, double lr_scale = 1.0) {
    if (grads.size() != params.layers.size()) throw ShapeError("adam: grads/params layer count mismatch");
    for (const auto& g : grads)
        if (!all_finite(g.weights) || !all_finite(g.bias)) throw OptimizerError("non-finite gradient");

    st.step += 1;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    const double lr = st.cfg.lr * lr_scale;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto update = [&](Mat& m, Mat& v, Mat& p, const Mat& g) {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
            p -= lr * (m / corr1).cwiseQuotient(((v / corr2).cwiseSqrt().array() + st.cfg.eps).matrix());
        };
        update(st.m[l].weights, st.v[l].weights, params.layers[l].weights, grads[l].weights);
        Vec& mb = st.m[l].bias;
        Vec& vb = st.v[l].bias;
        const Vec& gb = grads[l].bias;
        mb = b1 * mb + (1.0 - b1) * gb;
        vb = b2 * vb + (1.0 - b2) * gb.cwiseProduct(gb);
        params.layers[l].bias -=
            lr * (mb / corr1).cwiseQuotient(((vb / corr2).cwiseSqrt().array() + st.cfg.eps).matrix());
    }
}

}  // namespace aenode
