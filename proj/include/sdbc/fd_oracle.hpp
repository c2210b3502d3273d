#pragma once

// Independent finite-difference reference: θ-scheme in time (Crank–Nicolson by
// default) and second-order central differences in space on M + 2 nodes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sdbc/core.hpp"
#include "sdbc/modal_sim.hpp"
#include "sdbc/sl_operator.hpp"

namespace sdbc {

struct FDGrid {
    int M = 400;          // interior nodes
    double dt = 1e-4;
    double theta = 0.5;
    int rannacher = 2;    // backward-Euler half steps after each input change

    double h() const { return 1.0 / (M + 1); }
    std::size_t nodes() const { return static_cast<std::size_t>(M) + 2; }
    double z(std::size_t i) const { return i + 1 == nodes() ? 1.0 : static_cast<double>(i) * h(); }

    void validate() const {
        require(M >= 2, ErrorKind::InvalidArgument, "M must be at least 2");
        require(dt > 0, ErrorKind::InvalidArgument, "dt must be positive");
        require(theta >= 0 && theta <= 1, ErrorKind::InvalidArgument, "theta must lie in [0, 1]");
    }
};

/// Thomas algorithm; a: sub-, b: main, c: super-diagonal.
inline std::vector<double> solve_tridiagonal(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                                             std::vector<double> d) {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double m = a[i] / b[i - 1];
            b[i] -= m * c[i - 1];
            d[i] -= m * d[i - 1];
        }
        if (!(std::abs(b[i]) > 1e-300) || !std::isfinite(b[i]))
            throw Error(ErrorKind::NumericFailure, "singular tridiagonal system at row " + std::to_string(i));
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    return x;
}

namespace detail {

/// Semi-discrete operator  R ẋ = A x + s u, with Dirichlet ends held as algebraic rows.
struct FDOperator {
    std::vector<double> lo, di, up, r, src;
    bool dirichlet_left = false, dirichlet_right = false;
    double right_value_scale = 0.0;  // x_{M+1} = u · scale for Dirichlet actuation
};

inline FDOperator assemble(const SLProblem& pr, const FDGrid& g) {
    const std::size_t n = g.nodes();
    const double h = g.h(), h2 = h * h;
    FDOperator op;
    op.lo.assign(n, 0.0);
    op.di.assign(n, 0.0);
    op.up.assign(n, 0.0);
    op.src.assign(n, 0.0);
    op.r.resize(n);
    for (std::size_t i = 0; i < n; ++i) op.r[i] = pr.r(g.z(i));
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double z = g.z(i);
        const double pl = pr.p(z - 0.5 * h), pr_ = pr.p(z + 0.5 * h);
        op.lo[i] = pl / h2;
        op.up[i] = pr_ / h2;
        op.di[i] = -(pl + pr_) / h2 - pr.q(z);
    }
    // Left end.
    if (pr.b2 == 0.0) {
        op.dirichlet_left = true;
    } else {
        const double ph = pr.p(0.5 * h), pm = 2.0 * pr.p(0.0) - ph;
        const double s = pr.b1 / pr.b2;  // x'(0) = -s x_0, ghost x_{-1} = x_1 + 2 h s x_0
        op.up[0] = (ph + pm) / h2;
        op.di[0] = -(ph + pm) / h2 + pm * 2.0 * h * s / h2 - pr.q(0.0);
    }
    // Right end.
    const std::size_t e = n - 1;
    if (pr.a2 == 0.0) {
        op.dirichlet_right = true;
        op.right_value_scale = 1.0 / pr.a1;
    } else {
        const double ph = pr.p(1.0 - 0.5 * h), pp = 2.0 * pr.p(1.0) - ph;
        // x'(1) = (u - a1 x_e)/a2, ghost x_{e+1} = x_{e-1} + 2 h x'(1).
        op.lo[e] = (ph + pp) / h2;
        op.di[e] = -(ph + pp) / h2 - pp * 2.0 * h * pr.a1 / pr.a2 / h2 - pr.q(1.0);
        op.src[e] = pp * 2.0 * h / pr.a2 / h2;
    }
    return op;
}

inline std::vector<double> theta_step(const FDOperator& op, const std::vector<double>& x, double u, double dt,
                                      double theta) {
    const std::size_t n = x.size();
    std::vector<double> a(n), b(n), c(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        double Ax = op.di[i] * x[i];
        if (i > 0) Ax += op.lo[i] * x[i - 1];
        if (i + 1 < n) Ax += op.up[i] * x[i + 1];
        a[i] = -theta * op.lo[i];
        b[i] = op.r[i] / dt - theta * op.di[i];
        c[i] = -theta * op.up[i];
        d[i] = op.r[i] / dt * x[i] + (1.0 - theta) * Ax + op.src[i] * u;
    }
    if (op.dirichlet_left) { a[0] = 0; b[0] = 1; c[0] = 0; d[0] = 0; }
    if (op.dirichlet_right) { a[n - 1] = 0; b[n - 1] = 1; c[n - 1] = 0; d[n - 1] = u * op.right_value_scale; }
    return solve_tridiagonal(a, b, c, d);
}

}  // namespace detail

/// One θ-scheme step of  r x_t = (p x_z)_z - q x  with boundary data u_hold.
inline std::vector<double> fd_step(const std::vector<double>& profile, double u_hold, const FDGrid& grid,
                                   const SLProblem& problem) {
    grid.validate();
    require(profile.size() == grid.nodes(), ErrorKind::InvalidArgument, "profile must have M + 2 samples");
    return detail::theta_step(detail::assemble(problem, grid), profile, u_hold, grid.dt, grid.theta);
}

inline double fd_norm(const std::vector<double>& x, const SLProblem& pr, const FDGrid& g) {
    std::vector<double> w(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) w[i] = pr.r(g.z(i));
    return quad::norm(x, w, g.h());
}

/// Closed-loop run on the FD grid: u_i = ∫ κ x(τ_i) dz by Simpson, held between samples.
/// Every output row carries a snapshot on the FD nodes.
inline Trace fd_simulate(const SLProblem& problem, const std::function<double(double)>& kernel,
                         const SamplingSchedule& schedule, const std::function<double(double)>& x0, double t_end,
                         double output_dt, const FDGrid& grid, const std::string& controller_id = "fd") {
    grid.validate();
    require(t_end >= 0 && output_dt > 0, ErrorKind::InvalidArgument, "need t_end >= 0 and output_dt > 0");
    const auto op = detail::assemble(problem, grid);
    const std::size_t n = grid.nodes();
    std::vector<double> x(n), kv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = x0(grid.z(i));
        if (kernel) kv[i] = kernel(grid.z(i));
    }
    auto feedback = [&]() { return kernel ? quad::inner(kv, x, {}, grid.h()) : 0.0; };

    Trace tr;
    tr.controller_id = controller_id;
    tr.schedule = schedule.descriptor();
    tr.grid_size = n;
    constexpr double kTimeTol = 1e-12;
    double t = 0.0, u = feedback();
    int fresh = grid.rannacher;
    std::size_t next_out = 1;
    auto emit = [&]() {
        TraceRow row;
        row.t = t;
        row.norm_r = fd_norm(x, problem, grid);
        row.u = u;
        tr.rows.push_back(row);
        tr.snapshots.push_back({t, x});
    };
    auto march = [&](double t_to) {
        const double span = t_to - t;
        if (span <= kTimeTol) { t = t_to; return; }
        const int steps = std::max(1, static_cast<int>(std::ceil(span / grid.dt - 1e-9)));
        const double dt = span / steps;
        for (int s = 0; s < steps; ++s) {
            if (fresh > 0) {
                x = detail::theta_step(op, x, u, 0.5 * dt, 1.0);
                x = detail::theta_step(op, x, u, 0.5 * dt, 1.0);
                --fresh;
            } else {
                x = detail::theta_step(op, x, u, dt, grid.theta);
            }
        }
        t = t_to;
    };

    emit();
    if (t_end == 0.0) return tr;
    auto cursor = schedule.cursor();
    double tau_next = cursor.next();
    while (true) {
        const double seg_end = std::min(tau_next, t_end);
        while (static_cast<double>(next_out) * output_dt < seg_end - kTimeTol) {
            march(static_cast<double>(next_out) * output_dt);
            emit();
            ++next_out;
        }
        march(seg_end);
        if (tau_next > t_end + kTimeTol) {
            if (std::abs(static_cast<double>(next_out) * output_dt - t_end) <= kTimeTol) { emit(); ++next_out; }
            break;
        }
        const double u_new = feedback();
        if (u_new != u) fresh = grid.rannacher;
        u = u_new;
        if (std::abs(static_cast<double>(next_out) * output_dt - t) <= kTimeTol) { emit(); ++next_out; }
        if (std::abs(t - t_end) <= kTimeTol) break;
        tau_next = cursor.next();
    }
    return tr;
}

struct TraceComparison {
    std::vector<double> t, snapshot_rel, norm_rel;
    double max_snapshot_rel = 0.0, t_max_snapshot = 0.0;
    double max_norm_rel = 0.0, t_max_norm = 0.0;
};

/// Per-row relative differences. Snapshots of b are interpolated onto a's grid with a
/// natural cubic spline; the norms are taken on a's grid.
inline TraceComparison compare_traces(const Trace& a, const Trace& b) {
    require(a.rows.size() == b.rows.size(), ErrorKind::InvalidArgument, "traces have different row counts");
    for (std::size_t i = 0; i < a.rows.size(); ++i)
        require(std::abs(a.rows[i].t - b.rows[i].t) <= 1e-9 * std::max(1.0, a.rows[i].t), ErrorKind::InvalidArgument,
                "traces have different output times");
    const bool snaps = !a.snapshots.empty() && a.snapshots.size() == b.snapshots.size();
    TraceComparison c;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        c.t.push_back(a.rows[i].t);
        const double na = a.rows[i].norm_r, nb = b.rows[i].norm_r;
        const double nr = na > 0 ? std::abs(na - nb) / na : std::abs(na - nb);
        c.norm_rel.push_back(nr);
        if (nr > c.max_norm_rel) { c.max_norm_rel = nr; c.t_max_norm = a.rows[i].t; }
        if (snaps) {
            const auto& xa = a.snapshots[i].x;
            const Grid ga(xa.size());
            const auto xb = resample(b.snapshots[i].x, ga);
            std::vector<double> d(xa.size());
            for (std::size_t j = 0; j < xa.size(); ++j) d[j] = xa[j] - xb[j];
            const double den = quad::norm(xa, {}, ga.h());
            const double sr = den > 0 ? quad::norm(d, {}, ga.h()) / den : quad::norm(d, {}, ga.h());
            c.snapshot_rel.push_back(sr);
            if (sr > c.max_snapshot_rel) { c.max_snapshot_rel = sr; c.t_max_snapshot = a.rows[i].t; }
        }
    }
    return c;
}

}  // namespace sdbc
