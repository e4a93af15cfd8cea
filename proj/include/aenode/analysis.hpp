#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aenode/dataset.hpp"
#include "aenode/dynsys.hpp"
#include "aenode/infometrics.hpp"
#include "aenode/model.hpp"
#include "aenode/node.hpp"

namespace aenode {

inline std::vector<double> uniform_times(double t0, double t1, int n) {
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i) ts[i] = t0 + (t1 - t0) * i / (n - 1);
    ts.back() = t1;
    return ts;
}

/// Linear interpolation of stored rows onto a new time grid. Generic on
/// purpose: ingested data has no RHS to drive a Hermite scheme.
inline Mat resample_rows_linear(const std::vector<double>& times, const Mat& states,
                                const std::vector<double>& new_times) {
    Mat out(new_times.size(), states.cols());
    for (std::size_t k = 0; k < new_times.size(); ++k) {
        const double t = new_times[k];
        if (t <= times.front()) {
            out.row(k) = states.row(0);
            continue;
        }
        if (t >= times.back()) {
            out.row(k) = states.row(states.rows() - 1);
            continue;
        }
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const long i1 = it - times.begin();
        const long i0 = i1 - 1;
        const double s = (t - times[i0]) / (times[i1] - times[i0]);
        out.row(k) = (1.0 - s) * states.row(i0) + s * states.row(i1);
    }
    return out;
}

/// The physical system expressed in normalized coordinates: z in [0,1]^d
/// with dz/dt = f(denorm(z)) / range. This is the fair explicit-step
/// comparison frame for the latent field.
inline std::function<Vec(const Vec&, double)> normalized_field(const StiffSystem& sys,
                                                               const NormInfo& norm) {
    return [&sys, &norm](const Vec& z, double t) {
        const Vec y = norm.denormalize(z);
        const Vec f = sys.rhs(y, t);
        Vec out(f.size());
        for (int j = 0; j < f.size(); ++j) {
            const double range = norm.maxs(j) - norm.mins(j);
            out(j) = norm.degenerate[j] ? 0.0 : f(j) / range;
        }
        return out;
    };
}

/// Largest fixed RK4 step that integrates [t0, t1] without the state
/// leaving the bound box or turning non-finite. Scans by halving from
/// one-step-per-span; returns 0 if even the finest scan is unstable.
template <typename F>
double max_stable_rk4_dt(F&& field, const Vec& y0, double t0, double t1, double state_bound,
                         int max_halvings = 24) {
    const double span = t1 - t0;
    for (int h = 0; h <= max_halvings; ++h) {
        const int n_steps = 1 << h;
        const double dt = span / n_steps;
        bool stable = true;
        Vec y = y0;
        try {
            for (int k = 0; k < n_steps && stable; ++k) {
                y = rk4_step(field, y, t0 + k * dt, dt);
                if (!all_finite(y) || y.cwiseAbs().maxCoeff() > state_bound) stable = false;
            }
        } catch (const IntegrationError&) {
            stable = false;
        }
        if (stable) return dt;
    }
    return 0.0;
}

struct VariablePdf {
    std::string name;
    std::string space;  // "physical" or "latent"
    std::vector<double> grid;
    Vec density;
    double gap = 0.0;
};

/// KDE of one normalized variable column with the classical 1-D
/// Silverman bandwidth.
inline VariablePdf variable_pdf(const std::string& name, const std::string& space, const Vec& column,
                                int grid_points = 512) {
    std::vector<double> samples(column.data(), column.data() + column.size());
    VariablePdf out;
    out.name = name;
    out.space = space;
    double bw = 0.0;
    try {
        bw = silverman_bandwidth_1d(samples);
    } catch (const DomainError&) {
        bw = 0.0;
    }
    if (bw <= 0.0) bw = 1e-3;  // constant column: a single bump carries the message
    out.grid = kde_grid(samples, bw, grid_points);
    out.density = kde_pdf(samples, bw, out.grid);
    out.gap = bimodality_gap(out.density);
    return out;
}

/// Min-max rescale of each column to [0,1] over the trajectory itself
/// (latent variables have no global normalization).
inline Mat rescale_columns(const Mat& states) {
    Mat out(states.rows(), states.cols());
    for (int j = 0; j < states.cols(); ++j) {
        const double lo = states.col(j).minCoeff();
        const double hi = states.col(j).maxCoeff();
        out.col(j) = hi > lo ? ((states.col(j).array() - lo) / (hi - lo)).matrix()
                             : Mat::Zero(states.rows(), 1);
    }
    return out;
}

struct StiffnessReport {
    double physical_stiffness_ratio = 0.0;
    double physical_sharpness = 0.0;
    double latent_sharpness = 0.0;
    double sharpness_ratio = 0.0;       // physical / latent
    double physical_max_stable_dt = 0.0;
    double latent_max_stable_dt = 0.0;
    double stable_dt_ratio = 0.0;       // latent / physical
};

/// The stiffness-reduction comparison on one trajectory: sharpness of
/// the normalized physical signal vs the latent rollout, and the
/// largest stable explicit RK4 step in each frame.
inline StiffnessReport stiffness_report(const StiffSystem& sys, const NormInfo& norm,
                                        const AENodeModel& model, const Trajectory& traj,
                                        int resample_points = 1024, int latent_steps = 4) {
    StiffnessReport rep;
    rep.physical_stiffness_ratio = stiffness_ratio(sys, traj);

    const auto grid = uniform_times(traj.times.front(), traj.times.back(), resample_points);
    const Mat phys_uniform = resample_rows_linear(traj.times, traj.states, grid);
    rep.physical_sharpness = trajectory_sharpness(grid, norm.normalize_rows(phys_uniform));

    const Vec y0 = traj.states.row(0).transpose();
    const Prediction pred = predict_trajectory(model, norm, y0, grid, latent_steps);
    rep.latent_sharpness = trajectory_sharpness(grid, pred.latent.states);
    rep.sharpness_ratio = rep.latent_sharpness > 0 ? rep.physical_sharpness / rep.latent_sharpness
                                                   : std::numeric_limits<double>::infinity();

    const auto field = normalized_field(sys, norm);
    rep.physical_max_stable_dt =
        max_stable_rk4_dt(field, norm.normalize(y0), traj.times.front(), traj.times.back(), 10.0);

    const double latent_bound = 10.0 * std::max(1.0, pred.latent.states.cwiseAbs().maxCoeff());
    auto latent_field = [&model](const Vec& z, double) { return node_field(model.node, z); };
    rep.latent_max_stable_dt = max_stable_rk4_dt(latent_field, pred.latent.states.row(0).transpose(),
                                                 traj.times.front(), traj.times.back(), latent_bound);
    rep.stable_dt_ratio = rep.physical_max_stable_dt > 0
                              ? rep.latent_max_stable_dt / rep.physical_max_stable_dt
                              : std::numeric_limits<double>::infinity();
    return rep;
}

/// Rollout RRMSE of a stored trajectory: predict from its first state
/// over its own time grid and compare in physical units.
inline RrmseResult rollout_rrmse(const AENodeModel& model, const NormInfo& norm, const Trajectory& traj,
                                 int latent_steps = 4) {
    const Prediction pred =
        predict_trajectory(model, norm, traj.states.row(0).transpose(), traj.times, latent_steps);
    return rrmse(pred.physical.states, traj.states);
}

}  // namespace aenode
