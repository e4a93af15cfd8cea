#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "aenode/common.hpp"
#include "aenode/dynsys.hpp"
#include "aenode/rng.hpp"

namespace aenode {

/// Per-variable min-max normalization to [0, 1]. Degenerate variables
/// (min == max) map to constant 0 instead of erroring; inert species in
/// real mechanisms do exactly that.
struct NormInfo {
    Vec mins;
    Vec maxs;
    std::vector<std::uint8_t> degenerate;

    int width() const { return static_cast<int>(mins.size()); }
    bool any_degenerate() const {
        return std::any_of(degenerate.begin(), degenerate.end(), [](std::uint8_t d) { return d != 0; });
    }

    static NormInfo fit(const std::vector<Trajectory>& trajs) {
        if (trajs.empty()) throw ConfigError("NormInfo::fit: no trajectories");
        const int d = trajs.front().dim();
        NormInfo n;
        n.mins = Vec::Constant(d, std::numeric_limits<double>::infinity());
        n.maxs = Vec::Constant(d, -std::numeric_limits<double>::infinity());
        for (const auto& t : trajs) {
            if (t.dim() != d) throw ShapeError("NormInfo::fit: trajectory dims differ");
            n.mins = n.mins.cwiseMin(t.states.colwise().minCoeff().transpose());
            n.maxs = n.maxs.cwiseMax(t.states.colwise().maxCoeff().transpose());
        }
        n.degenerate.resize(d);
        for (int j = 0; j < d; ++j) n.degenerate[j] = (n.mins(j) == n.maxs(j)) ? 1 : 0;
        return n;
    }

    Vec normalize(const Vec& y) const {
        Vec out(y.size());
        for (int j = 0; j < y.size(); ++j)
            out(j) = degenerate[j] ? 0.0 : (y(j) - mins(j)) / (maxs(j) - mins(j));
        return out;
    }

    Mat normalize_rows(const Mat& states) const {
        Mat out(states.rows(), states.cols());
        for (int j = 0; j < states.cols(); ++j) {
            if (degenerate[j])
                out.col(j).setZero();
            else
                out.col(j) = (states.col(j).array() - mins(j)) / (maxs(j) - mins(j));
        }
        return out;
    }

    Vec denormalize(const Vec& v) const {
        Vec out(v.size());
        for (int j = 0; j < v.size(); ++j)
            out(j) = degenerate[j] ? mins(j) : mins(j) + v(j) * (maxs(j) - mins(j));
        return out;
    }

    Mat denormalize_rows(const Mat& states) const {
        Mat out(states.rows(), states.cols());
        for (int j = 0; j < states.cols(); ++j) {
            if (degenerate[j])
                out.col(j).setConstant(mins(j));
            else
                out.col(j) = states.col(j).array() * (maxs(j) - mins(j)) + mins(j);
        }
        return out;
    }
};

/// Cubic Hermite sample of a stored trajectory at time t, using the RHS
/// at the bracketing knots for the slopes.
inline Vec sample_trajectory(const StiffSystem& sys, const Trajectory& traj, double t) {
    const auto& ts = traj.times;
    if (t <= ts.front()) return traj.states.row(0).transpose();
    if (t >= ts.back()) return traj.states.row(traj.steps() - 1).transpose();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const long i1 = it - ts.begin();
    const long i0 = i1 - 1;
    const double h = ts[i1] - ts[i0];
    const double s = (t - ts[i0]) / h;
    const Vec y0 = traj.states.row(i0).transpose();
    const Vec y1 = traj.states.row(i1).transpose();
    const Vec f0 = sys.rhs(y0, ts[i0]);
    const Vec f1 = sys.rhs(y1, ts[i1]);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * h * f1;
}

struct SnapshotOptions {
    int samples_per_traj = 64;
    double densify_threshold = 0.01;  // max normalized jump between snapshots
    int max_refine_depth = 12;
};

namespace detail {

inline void refine_interval(const StiffSystem& sys, const Trajectory& ref, const NormInfo& norm,
                            double ta, const Vec& na, double tb, const Vec& nb, int depth,
                            const SnapshotOptions& opt, std::vector<double>& times,
                            std::vector<Vec>& values) {
    const double jump = (nb - na).cwiseAbs().maxCoeff();
    if (jump > opt.densify_threshold && depth < opt.max_refine_depth) {
        const double tm = 0.5 * (ta + tb);
        const Vec nm = norm.normalize(sample_trajectory(sys, ref, tm));
        refine_interval(sys, ref, norm, ta, na, tm, nm, depth + 1, opt, times, values);
        times.push_back(tm);
        values.push_back(nm);
        refine_interval(sys, ref, norm, tm, nm, tb, nb, depth + 1, opt, times, values);
    }
}

}  // namespace detail

/// Uniform-in-time snapshots plus recursive bisection wherever any
/// normalized variable jumps by more than the threshold; the ignition
/// front is the rare event the analysis targets, so it gets the extra
/// samples.
inline Trajectory snapshot_trajectory(const StiffSystem& sys, const Trajectory& ref, const NormInfo& norm,
                                      const SnapshotOptions& opt) {
    if (opt.samples_per_traj < 2) throw ConfigError("samples_per_traj must be >= 2");
    const double t0 = ref.times.front(), t1 = ref.times.back();
    const double h = (t1 - t0) / (opt.samples_per_traj - 1);
    std::vector<double> times;
    std::vector<Vec> values;
    Vec prev = norm.normalize(sample_trajectory(sys, ref, t0));
    double t_prev = t0;
    times.push_back(t0);
    values.push_back(prev);
    for (int i = 1; i < opt.samples_per_traj; ++i) {
        const double t = (i + 1 == opt.samples_per_traj) ? t1 : t0 + i * h;
        const Vec cur = norm.normalize(sample_trajectory(sys, ref, t));
        detail::refine_interval(sys, ref, norm, t_prev, prev, t, cur, 0, opt, times, values);
        times.push_back(t);
        values.push_back(cur);
        t_prev = t;
        prev = cur;
    }
    Trajectory snap;
    snap.system = ref.system;
    snap.meta = ref.meta;
    snap.times = std::move(times);
    snap.states.resize(snap.times.size(), norm.width());
    for (std::size_t i = 0; i < values.size(); ++i)
        snap.states.row(i) = norm.denormalize(values[i]).transpose();
    return snap;
}

/// A training example: consecutive snapshot rows (step, step+1) of one
/// trajectory, dt apart.
struct SnapshotPair {
    int traj = 0;
    int step = 0;
    double dt = 0.0;
};

/// Snapshot trajectories (physical units) with the normalization that
/// maps them to [0,1], plus the shuffled 80:20 pair split.
struct Dataset {
    std::string system_name;
    std::vector<Trajectory> trajectories;  // snapshot-sampled, physical units
    std::vector<SnapshotPair> pairs;       // canonical (trajectory-major) order
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    NormInfo norm;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;

    int dim() const { return norm.width(); }

    Vec input_normalized(std::size_t pair_index) const {
        const auto& p = pairs[pair_index];
        return norm.normalize(trajectories[p.traj].states.row(p.step).transpose());
    }
    Vec target_normalized(std::size_t pair_index) const {
        const auto& p = pairs[pair_index];
        return norm.normalize(trajectories[p.traj].states.row(p.step + 1).transpose());
    }

    /// Rebuild the canonical pair list from the stored trajectories
    /// (used after loading from disk).
    void rebuild_pairs() {
        pairs.clear();
        for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
            const auto& tr = trajectories[ti];
            for (long k = 0; k + 1 < tr.steps(); ++k)
                pairs.push_back({static_cast<int>(ti), static_cast<int>(k), tr.times[k + 1] - tr.times[k]});
        }
    }
};

struct InitialCondition {
    Vec y0;
    std::map<std::string, double> meta;
};

/// Grid of ignition initial conditions over initial temperature and the
/// mixture parameter phi. Ranges are inclusive.
inline std::vector<InitialCondition> ignition_sweep(double t_lo, double t_hi, double t_step, double phi_lo,
                                                    double phi_hi, double phi_step) {
    std::vector<InitialCondition> out;
    const int nt = t_step > 0 ? static_cast<int>(std::floor((t_hi - t_lo) / t_step + 1e-9)) + 1 : 1;
    const int np = phi_step > 0 ? static_cast<int>(std::floor((phi_hi - phi_lo) / phi_step + 1e-9)) + 1 : 1;
    for (int i = 0; i < nt; ++i) {
        const double ti = t_lo + i * t_step;
        for (int j = 0; j < np; ++j) {
            const double phi = phi_lo + j * phi_step;
            out.push_back({ignition_initial_state(ti, phi), {{"T_init", ti}, {"phi", phi}}});
        }
    }
    return out;
}

struct GenerateOptions {
    double t_end = 6e-3;
    double tol = 1e-8;
    SnapshotOptions snapshot;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    ReferenceOptions reference;
};

/// Shuffle the canonical pair enumeration with the given seed and split
/// it train/test.
inline void split_dataset(Dataset& ds) {
    std::vector<std::size_t> order(ds.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(ds.seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(ds.split_ratio * order.size()));
    ds.train_idx.assign(order.begin(), order.begin() + n_train);
    ds.test_idx.assign(order.begin() + n_train, order.end());
}

/// Integrate every initial condition with the reference solver, fit the
/// normalization over the whole sweep, snapshot-sample each trajectory
/// and build the shuffled pair split.
inline Dataset generate_dataset(const StiffSystem& sys, const std::vector<InitialCondition>& sweep,
                                const GenerateOptions& opt) {
    if (sweep.empty()) throw ConfigError("generate_dataset: empty sweep");
    if (!(opt.split_ratio > 0.0 && opt.split_ratio < 1.0))
        throw ConfigError("generate_dataset: split_ratio must be in (0, 1)");

    std::vector<Trajectory> refs;
    refs.reserve(sweep.size());
    for (const auto& ic : sweep) {
        Trajectory tr = integrate_reference(sys, ic.y0, opt.t_end, opt.tol, opt.reference);
        tr.meta = ic.meta;
        refs.push_back(std::move(tr));
    }

    Dataset ds;
    ds.system_name = sys.name;
    ds.norm = NormInfo::fit(refs);
    ds.split_ratio = opt.split_ratio;
    ds.seed = opt.seed;
    ds.trajectories.reserve(refs.size());
    for (const auto& ref : refs) ds.trajectories.push_back(snapshot_trajectory(sys, ref, ds.norm, opt.snapshot));
    ds.rebuild_pairs();
    split_dataset(ds);
    return ds;
}

/// Build a dataset directly from externally supplied trajectories
/// (already sampled; no snapshot resampling is applied).
inline Dataset dataset_from_trajectories(std::vector<Trajectory> trajs, double split_ratio,
                                         std::uint64_t seed, const std::string& system_name = "external") {
    if (trajs.empty()) throw ConfigError("dataset_from_trajectories: no trajectories");
    Dataset ds;
    ds.system_name = system_name;
    ds.trajectories = std::move(trajs);
    ds.norm = NormInfo::fit(ds.trajectories);
    ds.split_ratio = split_ratio;
    ds.seed = seed;
    ds.rebuild_pairs();
    split_dataset(ds);
    return ds;
}

}  // namespace aenode
