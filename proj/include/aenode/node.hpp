#pragma once

#include <cmath>
#include <concepts>
#include <string>
#include <utility>
#include <vector>

#include "aenode/common.hpp"
#include "aenode/net.hpp"

namespace aenode {

/// Latent state over time; one row of `states` per grid point.
struct LatentTrajectory {
    std::vector<double> times;
    Mat states;  // (n_steps+1) x latent_dim

    int width() const { return static_cast<int>(states.cols()); }
    Vec final_state() const { return states.row(states.rows() - 1).transpose(); }
};

/// Classical RK4 step. dt may be negative (backward integration).
template <typename F>
    requires std::invocable<F&, const Vec&, double>
Vec rk4_step(F&& f, const Vec& y, double t, double dt) {
    const Vec k1 = f(y, t);
    const Vec k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt);
    const Vec k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt);
    const Vec k4 = f(y + dt * k3, t + dt);
    if (!all_finite(k1) || !all_finite(k2) || !all_finite(k3) || !all_finite(k4))
        throw IntegrationError("non-finite RK4 stage", t);
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

constexpr double kOverflowGuard = 1e100;

/// Fixed-step RK4 from t0 to t1, recording every grid point.
template <typename F>
    requires std::invocable<F&, const Vec&, double>
LatentTrajectory odesolve(F&& f, const Vec& y0, double t0, double t1, int n_steps,
                          double overflow_guard = kOverflowGuard) {
    if (n_steps < 1) throw ConfigError("odesolve: n_steps must be >= 1");
    LatentTrajectory traj;
    traj.times.resize(n_steps + 1);
    traj.states.resize(n_steps + 1, y0.size());
    traj.times[0] = t0;
    traj.states.row(0) = y0.transpose();
    const double dt = (t1 - t0) / n_steps;
    Vec y = y0;
    for (int k = 0; k < n_steps; ++k) {
        const double t = t0 + k * dt;
        y = rk4_step(f, y, t, dt);
        if (!all_finite(y) || y.cwiseAbs().maxCoeff() > overflow_guard)
            throw IntegrationError("odesolve diverged", t, k);
        traj.times[k + 1] = (k + 1 == n_steps) ? t1 : t0 + (k + 1) * dt;
        traj.states.row(k + 1) = y.transpose();
    }
    return traj;
}

/// The latent vector field: the NODE network applied to a batch of
/// latent states (one per row). Autonomous, so t is unused.
inline Mat node_field(const MlpParams& beta, const Mat& y_batch) { return mlp_forward(beta, y_batch); }

inline Vec node_field(const MlpParams& beta, const Vec& y) {
    return mlp_forward(beta, y.transpose()).transpose();
}

/// RK4 advance of a whole batch without storing the path.
inline Mat odesolve_batch_final(const MlpParams& beta, const Mat& y0, double t0, double t1, int n_steps,
                                double overflow_guard = kOverflowGuard) {
    if (n_steps < 1) throw ConfigError("odesolve: n_steps must be >= 1");
    const double dt = (t1 - t0) / n_steps;
    Mat y = y0;
    Mat stage;
    for (int k = 0; k < n_steps; ++k) {
        const Mat k1 = node_field(beta, y);
        stage = y + 0.5 * dt * k1;
        const Mat k2 = node_field(beta, stage);
        stage = y + 0.5 * dt * k2;
        const Mat k3 = node_field(beta, stage);
        stage = y + dt * k3;
        const Mat k4 = node_field(beta, stage);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!all_finite(y) || y.cwiseAbs().maxCoeff() > overflow_guard)
            throw IntegrationError("latent batch integration diverged", t0 + k * dt, k);
    }
    return y;
}

inline LatentTrajectory odesolve(const MlpParams& beta, const Vec& y0, double t0, double t1, int n_steps,
                                 double overflow_guard = kOverflowGuard) {
    return odesolve([&beta](const Vec& y, double) { return node_field(beta, y); }, y0, t0, t1, n_steps,
                    overflow_guard);
}

/// Augmented state for the adjoint sweep: latent state, adjoint vector,
/// parameter-gradient accumulator and time-gradient accumulator.
struct AdjointState {
    Vec yhat;
    Vec adjoint;
    MlpGrads grad_beta_acc;
    double grad_t = 0.0;
};

/// Batched augmented state. The parameter block is shared (gradients sum
/// over the batch); adjoint rows stay per-sample.
struct AugBatch {
    Mat y;         // B x N_L
    Mat a;         // B x N_L
    MlpGrads acc;  // shaped like beta
    Vec tau;       // B
};

namespace detail {

inline void aug_axpy(AugBatch& dst, double c, const AugBatch& src) {
    dst.y += c * src.y;
    dst.a += c * src.a;
    for (std::size_t l = 0; l < dst.acc.size(); ++l) {
        dst.acc[l].weights += c * src.acc[l].weights;
        dst.acc[l].bias += c * src.acc[l].bias;
    }
    dst.tau += c * src.tau;
}

inline AugBatch aug_combine(const AugBatch& base, double c, const AugBatch& k) {
    AugBatch out = base;
    aug_axpy(out, c, k);
    return out;
}

}  // namespace detail

/// Time derivative of the augmented state:
///   [ f(y), -a^T df/dy, -a^T df/dbeta, -a^T df/dt ]
/// The vector-Jacobian products come from one reverse pass of the NODE
/// network; no Jacobian is ever materialized. The field is autonomous,
/// so the df/dt block is identically zero.
inline AugBatch augmented_dynamics(const MlpParams& beta, const AugBatch& s, double /*t*/) {
    ForwardCache cache;
    AugBatch d;
    d.y = mlp_forward(beta, s.y, &cache);
    BackwardResult bw = mlp_backward(beta, cache, s.a);
    d.a = -bw.grad_input;
    d.acc = std::move(bw.grads);
    for (auto& l : d.acc) {
        l.weights = -l.weights;
        l.bias = -l.bias;
    }
    d.tau = Vec::Zero(s.tau.size());
    return d;
}

inline AdjointState augmented_dynamics(const MlpParams& beta, const AdjointState& s, double t) {
    if (s.yhat.size() != s.adjoint.size()) throw ShapeError("adjoint/state width mismatch");
    AugBatch sb{s.yhat.transpose(), s.adjoint.transpose(), s.grad_beta_acc, Vec::Zero(1)};
    AugBatch db = augmented_dynamics(beta, sb, t);
    return AdjointState{db.y.transpose(), db.a.transpose(), std::move(db.acc), 0.0};
}

struct AdjointBatchResult {
    Mat dL_dy_t0;       // B x N_L
    MlpGrads dL_dbeta;  // summed over batch
    Vec dL_dt0;         // B
    Vec dL_dtn;         // B
};

/// Backward sweep of the augmented system from t_n to t_0 with RK4 over
/// the same number of steps as the forward solve. The latent state is
/// re-evolved backward as part of the augmented state rather than read
/// from storage.
inline AdjointBatchResult adjoint_backward_batch(const MlpParams& beta, const Mat& y_tn,
                                                 const Mat& dL_dy_tn, double t0, double tn, int n_steps) {
    if (y_tn.rows() != dL_dy_tn.rows() || y_tn.cols() != dL_dy_tn.cols())
        throw ShapeError("adjoint: loss-gradient shape does not match latent state");
    if (y_tn.cols() != beta.layers.front().weights.cols())
        throw ShapeError("adjoint: latent width does not match NODE input");

    const Eigen::Index batch = y_tn.rows();
    // dL/dt_n = (dL/dy(t_n))^T f(y(t_n)) per sample.
    const Mat f_tn = node_field(beta, y_tn);
    Vec dtn(batch);
    for (Eigen::Index b = 0; b < batch; ++b) dtn(b) = dL_dy_tn.row(b).dot(f_tn.row(b));

    AugBatch s{y_tn, dL_dy_tn, zero_grads(beta), -dtn};
    const double dt = (t0 - tn) / n_steps;  // negative for forward-time trajectories
    for (int k = 0; k < n_steps; ++k) {
        const double t = tn + k * dt;
        const AugBatch k1 = augmented_dynamics(beta, s, t);
        const AugBatch k2 = augmented_dynamics(beta, detail::aug_combine(s, 0.5 * dt, k1), t + 0.5 * dt);
        const AugBatch k3 = augmented_dynamics(beta, detail::aug_combine(s, 0.5 * dt, k2), t + 0.5 * dt);
        const AugBatch k4 = augmented_dynamics(beta, detail::aug_combine(s, dt, k3), t + dt);
        detail::aug_axpy(s, dt / 6.0, k1);
        detail::aug_axpy(s, dt / 3.0, k2);
        detail::aug_axpy(s, dt / 3.0, k3);
        detail::aug_axpy(s, dt / 6.0, k4);
        if (!all_finite(s.y) || !all_finite(s.a))
            throw IntegrationError("adjoint sweep diverged", t, k);
    }
    return AdjointBatchResult{std::move(s.a), std::move(s.acc), std::move(s.tau), std::move(dtn)};
}

struct AdjointResult {
    Vec dL_dy_t0;
    MlpGrads dL_dbeta;
    double dL_dt0 = 0.0;
    double dL_dtn = 0.0;
};

/// Single-trajectory adjoint sweep over the grid of a stored forward
/// solve. Returns all four sensitivities of the scalar loss whose
/// endpoint gradient is dL_dy_tn.
inline AdjointResult adjoint_backward(const MlpParams& beta, const LatentTrajectory& traj,
                                      const Vec& dL_dy_tn) {
    if (traj.times.size() < 2) throw ShapeError("adjoint: trajectory has no steps");
    if (dL_dy_tn.size() != traj.width()) throw ShapeError("adjoint: gradient width mismatch");
    const int n_steps = static_cast<int>(traj.times.size()) - 1;
    AdjointBatchResult r = adjoint_backward_batch(
        beta, traj.states.bottomRows(1), dL_dy_tn.transpose(), traj.times.front(), traj.times.back(),
        n_steps);
    return AdjointResult{r.dL_dy_t0.row(0).transpose(), std::move(r.dL_dbeta), r.dL_dt0(0), r.dL_dtn(0)};
}

}  // namespace aenode
