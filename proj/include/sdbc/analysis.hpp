#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sdbc/core.hpp"
#include "sdbc/modal_sim.hpp"

namespace sdbc {

struct DecayFit {
    double G_est = 1.0;
    double c_est = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    double residual = 0.0;  // RMS of the log-linear fit
    std::size_t rows_used = 0;
};

/// Least-squares line through (t, log ‖x‖) for t >= t_lo. Rows below 1e-13 ‖x(0)‖
/// are treated as round-off floor and skipped. `reference` replaces ‖x(0)‖ as the
/// denominator of G_est when positive.
inline DecayFit fit_decay(const Trace& trace, double t_lo, double reference = 0.0) {
    require(!trace.rows.empty(), ErrorKind::InvalidArgument, "empty trace");
    const double n0 = reference > 0 ? reference : trace.rows.front().norm_r;
    require(n0 > 0, ErrorKind::DegenerateTrace, "initial norm is zero");
    const double floor = 1e-13 * n0;
    std::vector<double> t, y;
    for (const auto& r : trace.rows)
        if (r.t >= t_lo && r.norm_r > floor && std::isfinite(r.norm_r)) {
            t.push_back(r.t);
            y.push_back(std::log(r.norm_r));
        }
    const bool any_above = std::any_of(trace.rows.begin(), trace.rows.end(),
                                       [&](const TraceRow& r) { return r.t >= t_lo && r.norm_r > floor; });
    require(any_above, ErrorKind::DegenerateTrace, "all norms in the fit window are at the floor");
    require(t.size() >= 10, ErrorKind::PreconditionViolation, "fewer than 10 usable rows in the fit window");
    const double n = static_cast<double>(t.size());
    double mt = 0, my = 0;
    for (std::size_t i = 0; i < t.size(); ++i) { mt += t[i]; my += y[i]; }
    mt /= n;
    my /= n;
    double stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        sty += (t[i] - mt) * (y[i] - my);
    }
    require(stt > 0, ErrorKind::DegenerateTrace, "fit window has a single time");
    const double slope = sty / stt, icpt = my - slope * mt;
    DecayFit f;
    f.c_est = -slope;
    f.t_lo = t.front();
    f.t_hi = t.back();
    f.rows_used = t.size();
    double ss = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double e = y[i] - (icpt + slope * t[i]);
        ss += e * e;
    }
    f.residual = std::sqrt(ss / n);
    f.G_est = 1.0;
    for (const auto& r : trace.rows)
        if (std::isfinite(r.norm_r)) f.G_est = std::max(f.G_est, r.norm_r * std::exp(f.c_est * r.t) / n0);
    return f;
}

/// Window starts at 20% of the trace span.
inline DecayFit fit_decay(const Trace& trace) {
    require(!trace.rows.empty(), ErrorKind::InvalidArgument, "empty trace");
    return fit_decay(trace, trace.rows.front().t + 0.2 * (trace.rows.back().t - trace.rows.front().t));
}

/// A run is bounded when ‖x(horizon)‖ < ‖x(0)‖ and it did not diverge.
inline bool bounded(const Trace& tr) {
    return !tr.diverged && !tr.rows.empty() && std::isfinite(tr.rows.back().norm_r) &&
           tr.rows.back().norm_r < tr.rows.front().norm_r;
}

struct DestabilizationResult {
    double T_emp = 0.0;
    double ratio = 0.0;  // T_emp / T_star
    int evaluations = 0;
};

/// Bisection on the sampling period using the endpoint boundedness predicate.
inline DestabilizationResult destabilization_search(const std::function<Trace(double)>& run, double T_lo, double T_hi,
                                                    double T_star, double rel_tol = 1e-3) {
    require(T_lo > 0 && T_hi > T_lo, ErrorKind::InvalidArgument, "need 0 < T_lo < T_hi");
    DestabilizationResult res;
    auto stable = [&](double T) {
        ++res.evaluations;
        try {
            return bounded(run(T));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NumericFailure) return false;
            throw;
        }
    };
    if (!stable(T_lo) || stable(T_hi))
        throw Error(ErrorKind::BracketError, "period range does not bracket a stability change");
    double lo = T_lo, hi = T_hi;
    while (hi - lo > rel_tol * lo) {
        const double mid = 0.5 * (lo + hi);
        if (stable(mid)) lo = mid; else hi = mid;
    }
    res.T_emp = lo;
    res.ratio = T_star > 0 ? lo / T_star : std::numeric_limits<double>::infinity();
    return res;
}

struct IssCheck {
    bool holds = true;
    std::size_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    std::vector<double> slack;
};

/// ‖y(t)‖ <= G e^{-σt} ‖y(0)‖ + γ sup_{s<=t} |v(s)| e^{-σ(t-s)} at every row.
inline IssCheck verify_iss_estimate(const Trace& tr, double G, double sigma, double gamma) {
    require(!tr.rows.empty(), ErrorKind::InvalidArgument, "empty trace");
    for (const auto& r : tr.rows)
        require(std::isfinite(r.y_norm) && std::isfinite(r.v_sup), ErrorKind::InvalidArgument,
                "trace lacks transformed-norm or v diagnostics");
    IssCheck c;
    const double y0 = tr.rows.front().y_norm, t0 = tr.rows.front().t;
    for (const auto& r : tr.rows) {
        const double s = G * std::exp(-sigma * (r.t - t0)) * y0 + gamma * r.v_sup - r.y_norm;
        c.slack.push_back(s);
        c.min_slack = std::min(c.min_slack, s);
        if (s < 0) { c.holds = false; ++c.violations; }
    }
    return c;
}

struct SweepRow {
    double T = 0.0;
    bool stable = false;
    double c_est = kNaN, G_est = kNaN, ratio = kNaN;
};

}  // namespace sdbc
