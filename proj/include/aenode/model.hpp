#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "aenode/common.hpp"
#include "aenode/dataset.hpp"
#include "aenode/net.hpp"
#include "aenode/node.hpp"
#include "aenode/rng.hpp"

namespace aenode {

/// Encoder (theta), latent vector field (beta), decoder (gamma).
struct AENodeModel {
    MlpParams encoder;
    MlpParams node;
    MlpParams decoder;

    int n_physical() const { return encoder.in_dim(); }
    int n_latent() const { return encoder.out_dim(); }

    void check() const {
        check_mlp_shapes(encoder);
        check_mlp_shapes(node);
        check_mlp_shapes(decoder);
        if (encoder.out_dim() != node.in_dim() || node.out_dim() != node.in_dim() ||
            decoder.in_dim() != node.in_dim() || decoder.out_dim() != encoder.in_dim())
            throw ShapeError("encoder/node/decoder widths do not chain");
    }
};

struct ModelDims {
    int n_physical = 9;
    int n_latent = 5;
    int width = 100;
    int depth = 5;  // hidden layers per stack
};

inline AENodeModel build_model(const ModelDims& dims, Rng& rng, double elu_alpha = 1.0) {
    auto stack = [&](int in, int out) {
        std::vector<int> d{in};
        for (int l = 0; l < dims.depth; ++l) d.push_back(dims.width);
        d.push_back(out);
        return d;
    };
    AENodeModel m;
    m.encoder = init_params(stack(dims.n_physical, dims.n_latent), rng, elu_alpha);
    m.node = init_params(stack(dims.n_latent, dims.n_latent), rng, elu_alpha);
    m.decoder = init_params(stack(dims.n_latent, dims.n_physical), rng, elu_alpha);
    return m;
}

inline Mat encode(const AENodeModel& m, const Mat& y_batch) { return mlp_forward(m.encoder, y_batch); }
inline Mat decode(const AENodeModel& m, const Mat& latent_batch) {
    return mlp_forward(m.decoder, latent_batch);
}

struct TrainConfig {
    double eps1 = 1.0;
    double eps2 = 1.0;
    double eps3 = 1.0;
    double learning_rate = 1e-3;
    int batch_size = 32;
    int passes = 40;          // full passes over the training pairs
    int latent_steps = 4;     // RK4 steps per snapshot interval
    bool sequential = true;   // three per-loss Adam sub-updates; false = one summed update
    int snapshot_cap = 64;    // accepted-epoch snapshots kept (uniform thinning beyond)
    std::uint64_t seed = 0;

    void check() const {
        if (eps1 < 0 || eps2 < 0 || eps3 < 0) throw ConfigError("loss weights must be >= 0");
        if (eps1 + eps2 + eps3 <= 0) throw ConfigError("at least one loss weight must be positive");
        if (batch_size < 1 || passes < 0 || latent_steps < 1) throw ConfigError("bad training config");
    }
};

struct LossTriple {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    double total(const TrainConfig& c) const { return c.eps1 * l1 + c.eps2 * l2 + c.eps3 * l3; }
    bool finite() const { return std::isfinite(l1) && std::isfinite(l2) && std::isfinite(l3); }
};

namespace detail {

/// Pairs sharing one dt, gathered into normalized batch matrices.
struct PairGroup {
    Mat y0;  // B x N_p
    Mat y1;  // B x N_p
    double dt = 0.0;
};

inline std::vector<PairGroup> group_pairs(const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::map<double, std::vector<std::size_t>> buckets;
    for (auto i : idx) buckets[ds.pairs[i].dt].push_back(i);
    std::vector<PairGroup> groups;
    groups.reserve(buckets.size());
    for (const auto& [dt, members] : buckets) {
        PairGroup g;
        g.dt = dt;
        g.y0.resize(members.size(), ds.dim());
        g.y1.resize(members.size(), ds.dim());
        for (std::size_t r = 0; r < members.size(); ++r) {
            g.y0.row(r) = ds.input_normalized(members[r]).transpose();
            g.y1.row(r) = ds.target_normalized(members[r]).transpose();
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

/// Row-wise 2-norm residual loss: mean_b ||R_b||. Returns the loss sum
/// (caller divides by the total count) and writes dL/dR assuming that
/// final division.
inline double norm_loss_and_grad(const Mat& residual, double inv_count, Mat& grad) {
    grad.resize(residual.rows(), residual.cols());
    double sum = 0.0;
    for (Eigen::Index b = 0; b < residual.rows(); ++b) {
        const double n = residual.row(b).norm();
        sum += n;
        if (n > 0.0)
            grad.row(b) = residual.row(b) * (inv_count / n);
        else
            grad.row(b).setZero();  // subgradient at the kink
    }
    return sum;
}

inline void accumulate(MlpGrads& into, const MlpGrads& add) {
    for (std::size_t l = 0; l < into.size(); ++l) {
        into[l].weights += add[l].weights;
        into[l].bias += add[l].bias;
    }
}

inline bool grads_finite(const MlpGrads& g) {
    for (const auto& l : g)
        if (!all_finite(l.weights) || !all_finite(l.bias)) return false;
    return true;
}

}  // namespace detail

/// L1 = ||Y^{n+1} - decode(odesolve(encode(Y^n)))||
/// L2 = ||Y^{n+1} - decode(encode(Y^{n+1}))||
/// L3 = ||encode(Y^{n+1}) - odesolve(encode(Y^n))||
/// each averaged over the batch (row-wise 2-norms). Inputs are
/// normalized states.
inline LossTriple loss_components(const AENodeModel& m, const std::vector<detail::PairGroup>& groups,
                                  int latent_steps) {
    LossTriple out;
    long count = 0;
    for (const auto& g : groups) {
        count += g.y0.rows();
        const Mat z0 = encode(m, g.y0);
        const Mat zt = odesolve_batch_final(m.node, z0, 0.0, g.dt, latent_steps);
        const Mat z1 = encode(m, g.y1);
        const Mat rec = decode(m, z1);
        const Mat pred = decode(m, zt);
        for (Eigen::Index b = 0; b < g.y0.rows(); ++b) {
            out.l1 += (pred.row(b) - g.y1.row(b)).norm();
            out.l2 += (rec.row(b) - g.y1.row(b)).norm();
            out.l3 += (z1.row(b) - zt.row(b)).norm();
        }
    }
    if (count == 0) throw ConfigError("loss_components: empty batch");
    out.l1 /= count;
    out.l2 /= count;
    out.l3 /= count;
    return out;
}

/// Single-pair convenience overload.
inline LossTriple loss_components(const AENodeModel& m, const Vec& y_n, const Vec& y_np1, double dt,
                                  int latent_steps = 4) {
    if (y_n.size() != m.n_physical() || y_np1.size() != m.n_physical())
        throw ShapeError("loss_components: pair width mismatch");
    std::vector<detail::PairGroup> g(1);
    g[0].y0 = y_n.transpose();
    g[0].y1 = y_np1.transpose();
    g[0].dt = dt;
    return loss_components(m, g, latent_steps);
}

/// Batch view of dataset pairs, grouped by dt so each group integrates
/// as one matrix.
inline std::vector<detail::PairGroup> make_pair_groups(const Dataset& ds,
                                                       const std::vector<std::size_t>& idx) {
    return detail::group_pairs(ds, idx);
}

/// Mean losses over an index set of dataset pairs.
inline LossTriple evaluate_losses(const AENodeModel& m, const Dataset& ds,
                                  const std::vector<std::size_t>& idx, int latent_steps) {
    return loss_components(m, detail::group_pairs(ds, idx), latent_steps);
}

struct ModelGrads {
    MlpGrads encoder;
    MlpGrads node;
    MlpGrads decoder;
};

namespace detail {

/// Gradient of L1 (Algorithm 1 flow): decoder backprop, adjoint sweep
/// through the NODE, encoder backprop.
inline double l1_gradients(const AENodeModel& m, const std::vector<PairGroup>& groups, int latent_steps,
                           ModelGrads& grads) {
    double loss_sum = 0.0;
    long count = 0;
    for (const auto& g : groups) count += g.y0.rows();
    const double inv_count = 1.0 / count;
    grads = ModelGrads{zero_grads(m.encoder), zero_grads(m.node), zero_grads(m.decoder)};
    for (const auto& g : groups) {
        ForwardCache enc_cache, dec_cache;
        const Mat z0 = mlp_forward(m.encoder, g.y0, &enc_cache);
        const Mat zt = odesolve_batch_final(m.node, z0, 0.0, g.dt, latent_steps);
        const Mat pred = mlp_forward(m.decoder, zt, &dec_cache);
        Mat dL_dpred;
        loss_sum += norm_loss_and_grad(pred - g.y1, inv_count, dL_dpred);
        BackwardResult dec_bw = mlp_backward(m.decoder, dec_cache, dL_dpred);
        accumulate(grads.decoder, dec_bw.grads);
        AdjointBatchResult adj = adjoint_backward_batch(m.node, zt, dec_bw.grad_input, 0.0, g.dt, latent_steps);
        accumulate(grads.node, adj.dL_dbeta);
        BackwardResult enc_bw = mlp_backward(m.encoder, enc_cache, adj.dL_dy_t0);
        accumulate(grads.encoder, enc_bw.grads);
    }
    return loss_sum * inv_count;
}

/// Gradient of L2: plain autoencoder backprop on Y^{n+1}.
inline double l2_gradients(const AENodeModel& m, const std::vector<PairGroup>& groups, ModelGrads& grads) {
    double loss_sum = 0.0;
    long count = 0;
    for (const auto& g : groups) count += g.y0.rows();
    const double inv_count = 1.0 / count;
    grads = ModelGrads{zero_grads(m.encoder), zero_grads(m.node), zero_grads(m.decoder)};
    for (const auto& g : groups) {
        ForwardCache enc_cache, dec_cache;
        const Mat z1 = mlp_forward(m.encoder, g.y1, &enc_cache);
        const Mat rec = mlp_forward(m.decoder, z1, &dec_cache);
        Mat dL_drec;
        loss_sum += norm_loss_and_grad(rec - g.y1, inv_count, dL_drec);
        BackwardResult dec_bw = mlp_backward(m.decoder, dec_cache, dL_drec);
        accumulate(grads.decoder, dec_bw.grads);
        BackwardResult enc_bw = mlp_backward(m.encoder, enc_cache, dec_bw.grad_input);
        accumulate(grads.encoder, enc_bw.grads);
    }
    return loss_sum * inv_count;
}

/// Gradient of L3 (Algorithm 2 flow): the residual lives on the latent
/// trajectory, so the adjoint sweep feeds the Y^n encoder branch while
/// plain backprop handles the Y^{n+1} branch.
inline double l3_gradients(const AENodeModel& m, const std::vector<PairGroup>& groups, int latent_steps,
                           ModelGrads& grads) {
    double loss_sum = 0.0;
    long count = 0;
    for (const auto& g : groups) count += g.y0.rows();
    const double inv_count = 1.0 / count;
    grads = ModelGrads{zero_grads(m.encoder), zero_grads(m.node), zero_grads(m.decoder)};
    for (const auto& g : groups) {
        ForwardCache enc0_cache, enc1_cache;
        const Mat z0 = mlp_forward(m.encoder, g.y0, &enc0_cache);
        const Mat zt = odesolve_batch_final(m.node, z0, 0.0, g.dt, latent_steps);
        const Mat z1 = mlp_forward(m.encoder, g.y1, &enc1_cache);
        Mat dL_dz1;
        loss_sum += norm_loss_and_grad(z1 - zt, inv_count, dL_dz1);
        BackwardResult enc1_bw = mlp_backward(m.encoder, enc1_cache, dL_dz1);
        accumulate(grads.encoder, enc1_bw.grads);
        AdjointBatchResult adj = adjoint_backward_batch(m.node, zt, -dL_dz1, 0.0, g.dt, latent_steps);
        accumulate(grads.node, adj.dL_dbeta);
        BackwardResult enc0_bw = mlp_backward(m.encoder, enc0_cache, adj.dL_dy_t0);
        accumulate(grads.encoder, enc0_bw.grads);
    }
    return loss_sum * inv_count;
}

inline void scale_grads(MlpGrads& g, double c) {
    for (auto& l : g) {
        l.weights *= c;
        l.bias *= c;
    }
}

}  // namespace detail

struct OptimizerStates {
    AdamState encoder;
    AdamState node;
    AdamState decoder;

    static OptimizerStates create(const AENodeModel& m, double lr) {
        AdamConfig cfg;
        cfg.lr = lr;
        return {AdamState::create(m.encoder, cfg), AdamState::create(m.node, cfg),
                AdamState::create(m.decoder, cfg)};
    }
};

struct StepRecord {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    bool rejected = false;
};

/// One training iteration on a batch of pairs. Sequential mode applies
/// the three gradient flows one after another (L1 on theta/beta/gamma,
/// L2 on theta/gamma, L3 on theta/beta), each with its own Adam update
/// scaled by its epsilon; summed mode folds them into one update.
/// A non-finite loss or gradient rejects the step and rolls the
/// parameters back.
inline StepRecord train_step(AENodeModel& m, const std::vector<detail::PairGroup>& groups,
                             const TrainConfig& cfg, OptimizerStates& opt) {
    StepRecord rec;
    const AENodeModel saved = m;
    const OptimizerStates saved_opt = opt;
    try {
        if (cfg.sequential) {
            if (cfg.eps1 > 0) {
                ModelGrads g;
                rec.l1 = detail::l1_gradients(m, groups, cfg.latent_steps, g);
                if (!std::isfinite(rec.l1)) throw OptimizerError("non-finite L1");
                adam_step(opt.encoder, m.encoder, g.encoder, cfg.eps1);
                adam_step(opt.node, m.node, g.node, cfg.eps1);
                adam_step(opt.decoder, m.decoder, g.decoder, cfg.eps1);
            }
            if (cfg.eps2 > 0) {
                ModelGrads g;
                rec.l2 = detail::l2_gradients(m, groups, g);
                if (!std::isfinite(rec.l2)) throw OptimizerError("non-finite L2");
                adam_step(opt.encoder, m.encoder, g.encoder, cfg.eps2);
                adam_step(opt.decoder, m.decoder, g.decoder, cfg.eps2);
            }
            if (cfg.eps3 > 0) {
                ModelGrads g;
                rec.l3 = detail::l3_gradients(m, groups, cfg.latent_steps, g);
                if (!std::isfinite(rec.l3)) throw OptimizerError("non-finite L3");
                adam_step(opt.encoder, m.encoder, g.encoder, cfg.eps3);
                adam_step(opt.node, m.node, g.node, cfg.eps3);
            }
        } else {
            ModelGrads g1, g2, g3;
            rec.l1 = cfg.eps1 > 0 ? detail::l1_gradients(m, groups, cfg.latent_steps, g1) : 0.0;
            rec.l2 = cfg.eps2 > 0 ? detail::l2_gradients(m, groups, g2) : 0.0;
            rec.l3 = cfg.eps3 > 0 ? detail::l3_gradients(m, groups, cfg.latent_steps, g3) : 0.0;
            if (!std::isfinite(rec.l1) || !std::isfinite(rec.l2) || !std::isfinite(rec.l3))
                throw OptimizerError("non-finite loss");
            ModelGrads total{zero_grads(m.encoder), zero_grads(m.node), zero_grads(m.decoder)};
            auto add_scaled = [](MlpGrads& into, const MlpGrads& g, double c) {
                for (std::size_t l = 0; l < into.size(); ++l) {
                    into[l].weights += c * g[l].weights;
                    into[l].bias += c * g[l].bias;
                }
            };
            if (cfg.eps1 > 0) {
                add_scaled(total.encoder, g1.encoder, cfg.eps1);
                add_scaled(total.node, g1.node, cfg.eps1);
                add_scaled(total.decoder, g1.decoder, cfg.eps1);
            }
            if (cfg.eps2 > 0) {
                add_scaled(total.encoder, g2.encoder, cfg.eps2);
                add_scaled(total.decoder, g2.decoder, cfg.eps2);
            }
            if (cfg.eps3 > 0) {
                add_scaled(total.encoder, g3.encoder, cfg.eps3);
                add_scaled(total.node, g3.node, cfg.eps3);
            }
            adam_step(opt.encoder, m.encoder, total.encoder);
            adam_step(opt.node, m.node, total.node);
            adam_step(opt.decoder, m.decoder, total.decoder);
        }
    } catch (const Error&) {
        m = saved;
        opt = saved_opt;
        rec.rejected = true;
    }
    return rec;
}

struct IterRecord {
    long iter = 0;
    int epochs_accepted = 0;
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    bool rejected = false;
    bool test_evaluated = false;
    double test_loss = 0.0;
};

struct EpochSnapshot {
    int epoch = 0;  // 0 is the untrained model
    long iter = 0;
    double test_loss = 0.0;
    AENodeModel model;
};

enum class TrainStatus { Ok, NoAcceptedEpoch };

struct TrainHistory {
    std::vector<IterRecord> iterations;
    std::vector<EpochSnapshot> snapshots;  // epoch 0 plus accepted epochs (thinned to the cap)
    std::vector<double> test_losses;       // one per pass
    int accepted_epochs = 0;
    TrainStatus status = TrainStatus::Ok;
};

using EpochHook = std::function<void(int epoch, const AENodeModel&, double test_loss)>;

/// Everything beyond the parameters that the loop needs to continue an
/// interrupted run bit-identically.
struct TrainState {
    OptimizerStates opt;
    std::uint64_t shuffle_rng_state = 0;
    int passes_done = 0;
    long iter = 0;
    double best_test_loss = std::numeric_limits<double>::infinity();
    int accepted_epochs = 0;
};

namespace detail {

/// Keep the cap by dropping every other interior snapshot (epoch 0 and
/// the latest survive).
inline void thin_snapshots(std::vector<EpochSnapshot>& snaps, int cap) {
    if (cap < 4 || static_cast<int>(snaps.size()) <= cap) return;
    std::vector<EpochSnapshot> kept;
    kept.reserve(snaps.size() / 2 + 2);
    kept.push_back(snaps.front());
    for (std::size_t i = 1; i + 1 < snaps.size(); i += 2) kept.push_back(snaps[i]);
    kept.push_back(snaps.back());
    snaps = std::move(kept);
}

}  // namespace detail

/// Full training loop. A pass over the shuffled training pairs is one
/// candidate epoch; it is accepted (counted, snapshotted, hook fired)
/// only when its test loss beats every earlier one, so accepted-epoch
/// test losses decrease strictly. cfg.passes is the total budget; a
/// resumed run (state->passes_done > 0) continues up to that budget.
inline TrainHistory train(AENodeModel& m, const Dataset& ds, const TrainConfig& cfg,
                          const EpochHook& hook = {}, TrainState* state = nullptr) {
    cfg.check();
    m.check();
    if (ds.train_idx.empty() || ds.test_idx.empty()) throw ConfigError("train: dataset split missing");

    TrainHistory hist;
    const bool resuming = state && state->passes_done > 0;
    OptimizerStates opt = resuming ? state->opt : OptimizerStates::create(m, cfg.learning_rate);
    Rng shuffle_rng = Rng(cfg.seed).fork(1);
    if (resuming) shuffle_rng.set_state(state->shuffle_rng_state);

    const auto test_groups = detail::group_pairs(ds, ds.test_idx);
    double best = resuming ? state->best_test_loss : std::numeric_limits<double>::infinity();
    long iter = resuming ? state->iter : 0;
    hist.accepted_epochs = resuming ? state->accepted_epochs : 0;
    if (!resuming) hist.snapshots.push_back({0, 0, std::numeric_limits<double>::infinity(), m});

    std::vector<std::size_t> order;
    for (int pass = resuming ? state->passes_done : 0; pass < cfg.passes; ++pass) {
        order = ds.train_idx;  // re-derive per pass so a resumed run shuffles identically
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> batch(order.begin() + start, order.begin() + stop);
            const auto groups = detail::group_pairs(ds, batch);
            const StepRecord rec = train_step(m, groups, cfg, opt);
            ++iter;
            hist.iterations.push_back({iter, hist.accepted_epochs, rec.l1, rec.l2, rec.l3, rec.rejected,
                                       false, 0.0});
        }
        const double test_loss = loss_components(m, test_groups, cfg.latent_steps).total(cfg);
        hist.test_losses.push_back(test_loss);
        if (!hist.iterations.empty()) {
            hist.iterations.back().test_evaluated = true;
            hist.iterations.back().test_loss = test_loss;
        }
        if (std::isfinite(test_loss) && test_loss < best) {
            best = test_loss;
            hist.accepted_epochs += 1;
            hist.snapshots.push_back({hist.accepted_epochs, iter, test_loss, m});
            detail::thin_snapshots(hist.snapshots, cfg.snapshot_cap);
            if (!hist.iterations.empty()) hist.iterations.back().epochs_accepted = hist.accepted_epochs;
            if (hook) hook(hist.accepted_epochs, m, test_loss);
        }
    }
    hist.status = hist.accepted_epochs > 0 ? TrainStatus::Ok : TrainStatus::NoAcceptedEpoch;
    if (state) {
        state->opt = std::move(opt);
        state->shuffle_rng_state = shuffle_rng.state();
        state->passes_done = cfg.passes;
        state->iter = iter;
        state->best_test_loss = best;
        state->accepted_epochs = hist.accepted_epochs;
    }
    return hist;
}

/// Encode once, integrate the latent field across the whole grid,
/// decode every point. Input and output are physical; the model works
/// on normalized states internally.
struct Prediction {
    Trajectory physical;
    LatentTrajectory latent;
};

inline Prediction predict_trajectory(const AENodeModel& m, const NormInfo& norm, const Vec& y0_physical,
                                     const std::vector<double>& t_grid, int latent_steps = 4) {
    if (y0_physical.size() != m.n_physical()) throw ShapeError("predict: y0 width mismatch");
    if (t_grid.empty()) throw ConfigError("predict: empty time grid");
    const long n = static_cast<long>(t_grid.size());
    Mat latents(n, m.n_latent());
    Mat z = encode(m, norm.normalize(y0_physical).transpose());
    latents.row(0) = z;
    for (long k = 0; k + 1 < n; ++k) {
        const double dt = t_grid[k + 1] - t_grid[k];
        if (dt <= 0) throw ConfigError("predict: time grid must increase");
        try {
            z = odesolve_batch_final(m.node, z, t_grid[k], t_grid[k + 1], latent_steps);
        } catch (const IntegrationError& e) {
            throw IntegrationError(std::string("predict diverged: ") + e.what(), t_grid[k], k);
        }
        latents.row(k + 1) = z;
    }
    Prediction out;
    out.latent.times = t_grid;
    out.latent.states = latents;
    out.physical.times = t_grid;
    out.physical.system = "prediction";
    out.physical.states = norm.denormalize_rows(decode(m, latents));
    return out;
}

/// Per-variable relative root mean square error in percent:
/// 100 * ||pred - truth||_2 / ||truth||_2 column-wise.
struct RrmseResult {
    Vec percent;
    std::vector<std::uint8_t> undefined;  // truth column identically zero
};

inline RrmseResult rrmse(const Mat& predicted, const Mat& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw ShapeError("rrmse: shape mismatch");
    RrmseResult r;
    r.percent.resize(truth.cols());
    r.undefined.assign(truth.cols(), 0);
    for (int j = 0; j < truth.cols(); ++j) {
        const double denom = truth.col(j).norm();
        if (denom == 0.0) {
            r.undefined[j] = 1;
            r.percent(j) = std::numeric_limits<double>::quiet_NaN();
        } else {
            r.percent(j) = 100.0 * (predicted.col(j) - truth.col(j)).norm() / denom;
        }
    }
    return r;
}

/// Dimensionless sharpness of a trajectory: each variable rescaled to
/// [0,1] over the trajectory, time rescaled to [0,1], then the largest
/// |slope| between consecutive samples. A stiff front scores high; a
/// gentle ramp scores near 1.
inline double trajectory_sharpness(const std::vector<double>& times, const Mat& states) {
    if (times.size() < 2) throw DomainError("trajectory_sharpness: need at least two samples");
    const double span = times.back() - times.front();
    double worst = 0.0;
    for (int j = 0; j < states.cols(); ++j) {
        const double lo = states.col(j).minCoeff();
        const double hi = states.col(j).maxCoeff();
        const double range = hi - lo;
        if (range <= 0.0) continue;
        for (std::size_t k = 0; k + 1 < times.size(); ++k) {
            const double dt = (times[k + 1] - times[k]) / span;
            if (dt <= 0.0) continue;
            const double dy = std::abs(states(k + 1, j) - states(k, j)) / range;
            worst = std::max(worst, dy / dt);
        }
    }
    return worst;
}

}  // namespace aenode
