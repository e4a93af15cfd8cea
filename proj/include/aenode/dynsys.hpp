#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "aenode/common.hpp"

namespace aenode {

/// Right-hand side f(y, t) and optional analytic Jacobian of an ODE
/// system dy/dt = f(y, t).
struct StiffSystem {
    std::string name;
    int dim = 0;
    std::vector<std::string> var_names;
    std::function<Vec(const Vec&, double)> rhs;
    std::function<Mat(const Vec&, double)> jacobian;  // empty -> finite differences
};

/// Time-stamped states in physical units.
struct Trajectory {
    std::vector<double> times;
    Mat states;  // n_steps x dim
    std::map<std::string, double> meta;
    std::string system;

    int dim() const { return static_cast<int>(states.cols()); }
    long steps() const { return static_cast<long>(times.size()); }
};

inline Mat fd_jacobian(const StiffSystem& sys, const Vec& y, double t) {
    Mat j(sys.dim, sys.dim);
    for (int c = 0; c < sys.dim; ++c) {
        const double h = 1e-7 * (1.0 + std::abs(y(c)));
        Vec yp = y, ym = y;
        yp(c) += h;
        ym(c) -= h;
        j.col(c) = (sys.rhs(yp, t) - sys.rhs(ym, t)) / (2.0 * h);
    }
    return j;
}

inline Mat system_jacobian(const StiffSystem& sys, const Vec& y, double t) {
    return sys.jacobian ? sys.jacobian(y, t) : fd_jacobian(sys, y, t);
}

// ---------------------------------------------------------------------------
// Single-step Arrhenius ignition toy: fuel -> radical -> product with heat
// release, state [fuel, product, radical, temperature]. All rates carry the
// fuel factor, so fuel = 0 freezes the system and fuel+product+radical is
// conserved exactly. The radical branching fraction decays with temperature
// (logistic), which gives the intermediate its rise-and-fall shape.
// ---------------------------------------------------------------------------

struct IgnitionParams {
    double rate_const = 1e8;     // A, 1/s
    double activation_t = 15000; // T_a, K
    double heat_release = 1500;  // q, K per unit fuel burned
    double branch_max = 0.85;    // peak radical branching fraction
    double branch_t_mid = 1350;  // K, centre of the branching switch
    double branch_t_width = 120; // K
    double radical_decay = 10;   // radical consumption per unit fuel burned
};

namespace detail {
inline double ignition_branch(const IgnitionParams& p, double temp) {
    return p.branch_max / (1.0 + std::exp((temp - p.branch_t_mid) / p.branch_t_width));
}
inline double ignition_branch_dT(const IgnitionParams& p, double temp) {
    const double s = std::exp((temp - p.branch_t_mid) / p.branch_t_width);
    const double d = 1.0 + s;
    return -p.branch_max * s / (p.branch_t_width * d * d);
}
}  // namespace detail

inline Vec ignition_rhs(const Vec& state, const IgnitionParams& p = {}) {
    if (state.size() != 4) throw ShapeError("ignition state must be [fuel, product, radical, temperature]");
    if (!all_finite(state)) throw DomainError("ignition_rhs: non-finite state");
    const double fuel = state(0), radical = state(2), temp = state(3);
    if (temp <= 0.0) throw DomainError("ignition_rhs: temperature must be positive");
    const double rate = p.rate_const * std::exp(-p.activation_t / temp) * fuel;
    const double nu = detail::ignition_branch(p, temp);
    Vec d(4);
    d(0) = -rate;
    d(1) = rate * (1.0 - nu + p.radical_decay * radical);
    d(2) = rate * (nu - p.radical_decay * radical);
    d(3) = p.heat_release * rate;
    return d;
}

inline Mat ignition_jacobian(const Vec& state, const IgnitionParams& p = {}) {
    const double fuel = state(0), radical = state(2), temp = state(3);
    const double arr = p.rate_const * std::exp(-p.activation_t / temp);
    const double rate = arr * fuel;
    const double rate_dF = arr;
    const double rate_dT = rate * p.activation_t / (temp * temp);
    const double nu = detail::ignition_branch(p, temp);
    const double nu_dT = detail::ignition_branch_dT(p, temp);
    Mat j = Mat::Zero(4, 4);
    j(0, 0) = -rate_dF;
    j(0, 3) = -rate_dT;
    const double prod_f = 1.0 - nu + p.radical_decay * radical;
    j(1, 0) = rate_dF * prod_f;
    j(1, 2) = rate * p.radical_decay;
    j(1, 3) = rate_dT * prod_f - rate * nu_dT;
    const double rad_f = nu - p.radical_decay * radical;
    j(2, 0) = rate_dF * rad_f;
    j(2, 2) = -rate * p.radical_decay;
    j(2, 3) = rate_dT * rad_f + rate * nu_dT;
    j(3, 0) = p.heat_release * rate_dF;
    j(3, 3) = p.heat_release * rate_dT;
    return j;
}

inline StiffSystem make_ignition_system(const IgnitionParams& p = {}) {
    StiffSystem sys;
    sys.name = "ignition";
    sys.dim = 4;
    sys.var_names = {"fuel", "product", "radical", "temperature"};
    sys.rhs = [p](const Vec& y, double) { return ignition_rhs(y, p); };
    sys.jacobian = [p](const Vec& y, double) { return ignition_jacobian(y, p); };
    return sys;
}

/// Initial condition for the ignition sweep: phi plays the equivalence-
/// ratio role via the initial fuel fraction, so fuel+product+radical = 1
/// on every trajectory in a sweep.
inline Vec ignition_initial_state(double t_init, double phi) {
    const double fuel0 = std::clamp(0.5 * phi, 0.0, 1.0);
    Vec y0(4);
    y0 << fuel0, 1.0 - fuel0, 0.0, t_init;
    return y0;
}

// ---------------------------------------------------------------------------
// Robertson problem, the canonical stiff benchmark.
// ---------------------------------------------------------------------------

inline Vec robertson_rhs(const Vec& y) {
    if (y.size() != 3) throw ShapeError("robertson state must have 3 components");
    constexpr double k1 = 0.04, k2 = 3e7, k3 = 1e4;
    Vec d(3);
    d(0) = -k1 * y(0) + k3 * y(1) * y(2);
    d(1) = k1 * y(0) - k3 * y(1) * y(2) - k2 * y(1) * y(1);
    d(2) = k2 * y(1) * y(1);
    return d;
}

inline StiffSystem make_robertson_system() {
    StiffSystem sys;
    sys.name = "robertson";
    sys.dim = 3;
    sys.var_names = {"y1", "y2", "y3"};
    sys.rhs = [](const Vec& y, double) { return robertson_rhs(y); };
    sys.jacobian = [](const Vec& y, double) {
        constexpr double k1 = 0.04, k2 = 3e7, k3 = 1e4;
        Mat j(3, 3);
        j << -k1, k3 * y(2), k3 * y(1),
            k1, -k3 * y(2) - 2.0 * k2 * y(1), -k3 * y(1),
            0.0, 2.0 * k2 * y(1), 0.0;
        return j;
    };
    return sys;
}

// ---------------------------------------------------------------------------
// Reference integrator: adaptive backward Euler with Newton iteration and
// step-doubling error control. Explicit solvers are exactly what the stiff
// regime defeats, so the trusted path is implicit.
// ---------------------------------------------------------------------------

struct ReferenceOptions {
    double t0 = 0.0;
    double dt_init = 0.0;  // 0 -> span * 1e-6
    double dt_min = 0.0;   // 0 -> span * 1e-14
    double dt_max = 0.0;   // 0 -> span / 8
    int max_newton_iters = 16;
    long max_steps = 4'000'000;
};

namespace detail {

/// One backward-Euler step solved by Newton. Returns false if Newton
/// fails to converge.
inline bool backward_euler_step(const StiffSystem& sys, const Vec& y, double t, double dt, double newton_tol,
                                int max_iters, Vec& out) {
    Vec z = y;
    const double t_new = t + dt;
    for (int it = 0; it < max_iters; ++it) {
        const Vec f = sys.rhs(z, t_new);
        const Vec g = z - y - dt * f;
        Mat m = Mat::Identity(sys.dim, sys.dim) - dt * system_jacobian(sys, z, t_new);
        const Vec dz = m.partialPivLu().solve(g);
        if (!all_finite(dz)) return false;
        z -= dz;
        double scale = 0.0;
        for (int i = 0; i < sys.dim; ++i)
            scale = std::max(scale, std::abs(dz(i)) / (1.0 + std::abs(z(i))));
        if (scale < newton_tol) {
            out = z;
            return all_finite(z);
        }
    }
    return false;
}

}  // namespace detail

/// Integrate from t0 to t_end keeping the per-step error estimate below
/// tol in the mixed absolute/relative norm |e_i| / (1 + |y_i|).
inline Trajectory integrate_reference(const StiffSystem& sys, const Vec& y0, double t_end, double tol,
                                      const ReferenceOptions& opt = {}) {
    if (tol <= 0.0) throw ConfigError("integrate_reference: tol must be positive");
    if (!all_finite(y0)) throw DomainError("integrate_reference: non-finite initial state");
    if (y0.size() != sys.dim) throw ShapeError("initial state width does not match system dim");

    const double span = t_end - opt.t0;
    if (span <= 0.0) throw ConfigError("t_end must exceed t0");
    const double dt_min = opt.dt_min > 0 ? opt.dt_min : span * 1e-14;
    const double dt_max = opt.dt_max > 0 ? opt.dt_max : span / 8.0;
    const double newton_tol = std::max(1e-13, 1e-2 * tol);

    std::vector<double> times{opt.t0};
    std::vector<Vec> states{y0};

    double t = opt.t0;
    double dt = opt.dt_init > 0 ? opt.dt_init : span * 1e-6;
    Vec y = y0;
    long n_steps = 0;
    while (t < t_end) {
        if (++n_steps > opt.max_steps)
            throw IntegrationError("integrate_reference: step budget exhausted", t);
        dt = std::min({dt, dt_max, t_end - t});
        Vec y_full, y_half, y_fine;
        const bool ok = detail::backward_euler_step(sys, y, t, dt, newton_tol, opt.max_newton_iters, y_full) &&
                        detail::backward_euler_step(sys, y, t, 0.5 * dt, newton_tol, opt.max_newton_iters, y_half) &&
                        detail::backward_euler_step(sys, y_half, t + 0.5 * dt, 0.5 * dt, newton_tol,
                                                    opt.max_newton_iters, y_fine);
        if (!ok) {
            dt *= 0.25;
            if (dt < dt_min)
                throw IntegrationError("integrate_reference: Newton failed at minimum step", t);
            continue;
        }
        // For a first-order method the doubling difference estimates the
        // two-half-step error; the accepted value is the Richardson
        // combination, one order higher, so the estimate bounds the true
        // error with a wide margin and the global error stays near tol.
        double err = 0.0;
        for (int i = 0; i < sys.dim; ++i)
            err = std::max(err, std::abs(y_fine(i) - y_full(i)) / (tol * (1.0 + std::abs(y_fine(i)))));
        if (err <= 1.0) {
            t += dt;
            y = 2.0 * y_fine - y_full;
            times.push_back(t);
            states.push_back(y);
        }
        const double factor = std::clamp(0.9 / std::sqrt(std::max(err, 1e-10)), 0.2, 4.0);
        dt = std::max(dt * factor, dt_min);
    }

    Trajectory traj;
    traj.system = sys.name;
    traj.times = std::move(times);
    traj.states.resize(traj.times.size(), sys.dim);
    for (std::size_t i = 0; i < states.size(); ++i) traj.states.row(i) = states[i].transpose();
    return traj;
}

/// Ratio of the fastest to the slowest non-vanishing timescale of the
/// Jacobian, maximized over sampled points of the trajectory.
inline double stiffness_ratio(const StiffSystem& sys, const Trajectory& traj, int max_points = 64) {
    if (traj.steps() == 0) throw DomainError("stiffness_ratio: empty trajectory");
    const long n = traj.steps();
    const long stride = std::max<long>(1, n / max_points);
    double worst = 0.0;
    bool any = false;
    for (long i = 0; i < n; i += stride) {
        const Vec y = traj.states.row(i).transpose();
        const Mat j = system_jacobian(sys, y, traj.times[i]);
        Eigen::EigenSolver<Mat> es(j, /*computeEigenvectors=*/false);
        double lmax = 0.0;
        for (int k = 0; k < sys.dim; ++k) lmax = std::max(lmax, std::abs(es.eigenvalues()(k).real()));
        if (lmax == 0.0) continue;
        double lmin = lmax;
        const double floor = 1e-9 * lmax;
        for (int k = 0; k < sys.dim; ++k) {
            const double re = std::abs(es.eigenvalues()(k).real());
            if (re > floor) lmin = std::min(lmin, re);
        }
        any = true;
        worst = std::max(worst, lmax / lmin);
    }
    if (!any) throw DomainError("stiffness_ratio: Jacobian vanishes along trajectory");
    return worst;
}

}  // namespace aenode
