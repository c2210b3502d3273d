#pragma once

// Exact modal propagation of the sampled-data closed loop under zero-order hold.
//
// The state is carried as the retained coefficients x_n plus the currently held
// boundary value b.  Modes above the retained range are represented
// quasi-statically through a lifting function h_w (see BoundaryLift), which keeps
// the reconstructed profile and its norm consistent with the actuated boundary.

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sdbc/core.hpp"
#include "sdbc/sl_operator.hpp"

namespace sdbc {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ModalState {
    double t = 0.0;
    std::vector<double> coeffs;
    double boundary = 0.0;  // held input value u(t-)
};

/// h_w solves (p h')' - (q + w r) h = 0 with the left condition and a1 h(1) + a2 h'(1) = 1.
/// Its coefficients are h_n = g_n / (λ_n + w).
struct BoundaryLift {
    double w = 0.0;
    std::vector<double> h;      // samples on the eigensystem grid
    std::vector<double> h_n;    // coefficients for the retained modes
    double tail_sq = 0.0;       // ‖h‖_r² - Σ h_n²
    std::vector<double> tail;   // samples of h - Σ h_n φ_n
};

inline BoundaryLift make_boundary_lift(const EigenSystem& sys, const std::vector<double>& gains) {
    require(gains.size() == sys.size(), ErrorKind::InvalidArgument, "one gain per mode is required");
    BoundaryLift lift;
    lift.w = std::max(0.0, 1.0 - sys.pairs.front().lambda);
    const auto sol = solve_shifted_bvp(sys.problem, lift.w, 1.0, sys.grid);
    lift.h = sol.x;
    lift.h_n.resize(sys.size());
    lift.tail = lift.h;
    double s = 0;
    for (std::size_t n = 0; n < sys.size(); ++n) {
        lift.h_n[n] = gains[n] / (sys.pairs[n].lambda + lift.w);
        s += lift.h_n[n] * lift.h_n[n];
        for (std::size_t i = 0; i < lift.tail.size(); ++i) lift.tail[i] -= lift.h_n[n] * sys.pairs[n].phi[i];
    }
    lift.tail_sq = std::max(0.0, sol.weighted_l2_sq - s);
    return lift;
}

inline ModalState project_initial(const std::vector<double>& x0, const EigenSystem& sys) {
    require(x0.size() == sys.grid.size(), ErrorKind::InvalidArgument,
            "initial profile must be sampled on the eigensystem grid");
    ModalState st;
    const auto rw = sys.problem.r_samples(sys.grid);
    st.coeffs.resize(sys.size());
    for (std::size_t n = 0; n < sys.size(); ++n) st.coeffs[n] = quad::inner(x0, sys.pairs[n].phi, rw, sys.grid.h());
    return st;
}

/// Exact hold-interval propagation  x_n <- e^{-λ_n dt} x_n + g_n u p_n(dt).
inline ModalState zoh_step(const ModalState& state, double u_hold, double dt, const EigenSystem& sys,
                           const std::vector<double>& gains) {
    require(dt > 0, ErrorKind::InvalidArgument, "dt must be positive");
    require(gains.size() >= state.coeffs.size() && sys.size() >= state.coeffs.size(), ErrorKind::InvalidArgument,
            "gains and eigensystem must cover the state");
    ModalState out = state;
    for (std::size_t n = 0; n < state.coeffs.size(); ++n) {
        const double a = sys.pairs[n].lambda * dt;
        if (a < -700) throw Error(ErrorKind::NumericFailure, "mode " + std::to_string(n + 1) + " overflows over dt");
        const double em1 = expm1_neg(a);
        const double pn = sys.pairs[n].lambda == 0.0 ? dt : -em1 / sys.pairs[n].lambda;
        out.coeffs[n] = (1.0 + em1) * state.coeffs[n] + gains[n] * u_hold * pn;
    }
    out.t = state.t + dt;
    out.boundary = u_hold;
    return out;
}

/// Truncated series Σ x_n φ_n on the grid.
inline std::vector<double> reconstruct(const ModalState& state, const EigenSystem& sys) {
    std::vector<double> x(sys.grid.size(), 0.0);
    for (std::size_t n = 0; n < state.coeffs.size(); ++n) {
        const auto& phi = sys.pairs[n].phi;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += state.coeffs[n] * phi[i];
    }
    return x;
}

/// Series plus the lifted tail  b (h_w - Σ h_n φ_n).
inline std::vector<double> reconstruct(const ModalState& state, const EigenSystem& sys, const BoundaryLift& lift) {
    auto x = reconstruct(state, sys);
    if (state.boundary != 0.0)
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += state.boundary * lift.tail[i];
    return x;
}

inline double modal_norm(const ModalState& st) {
    double s = 0;
    for (double c : st.coeffs) s += c * c;
    return std::sqrt(s);
}

inline double lifted_norm(const ModalState& st, const BoundaryLift& lift) {
    double s = 0;
    for (double c : st.coeffs) s += c * c;
    return std::sqrt(s + st.boundary * st.boundary * lift.tail_sq);
}

// ---------------------------------------------------------------------------

enum class ScheduleKind { Periodic, Jittered, Explicit };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Periodic: return "periodic";
        case ScheduleKind::Jittered: return "jittered";
        case ScheduleKind::Explicit: return "explicit";
    }
    return "unknown";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "periodic") return ScheduleKind::Periodic;
    if (s == "jittered") return ScheduleKind::Jittered;
    if (s == "explicit") return ScheduleKind::Explicit;
    throw Error(ErrorKind::InvalidArgument, "unknown schedule kind '" + s + "'");
}

class SamplingSchedule {
public:
    static constexpr double kJitterFloor = 0.25;

    ScheduleKind kind = ScheduleKind::Periodic;
    double T_sup = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> explicit_times;

    /// Stateful generator of τ_1, τ_2, ... (τ_0 = 0 is implicit).
    class Cursor {
    public:
        explicit Cursor(const SamplingSchedule& s) : s_(&s), rng_(s.seed) {}

        double next() {
            ++i_;
            switch (s_->kind) {
                case ScheduleKind::Periodic:
                    return static_cast<double>(i_) * s_->T_sup;
                case ScheduleKind::Jittered: {
                    const double u01 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
                    tau_ += s_->T_sup * (kJitterFloor + (1.0 - kJitterFloor) * u01);
                    return tau_;
                }
                case ScheduleKind::Explicit:
                    if (i_ >= s_->explicit_times.size())
                        throw Error(ErrorKind::InvalidArgument, "explicit schedule exhausted before t_end");
                    return s_->explicit_times[i_];
            }
            return kNaN;
        }

    private:
        const SamplingSchedule* s_;
        std::mt19937_64 rng_;
        std::size_t i_ = 0;
        double tau_ = 0.0;
    };

    Cursor cursor() const { return Cursor(*this); }

    std::vector<double> prefix(std::size_t count) const {
        std::vector<double> out{0.0};
        auto c = cursor();
        while (out.size() < count) out.push_back(c.next());
        return out;
    }

    std::string descriptor() const {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s(T=%.17g,seed=%llu)", to_string(kind), T_sup,
                      static_cast<unsigned long long>(seed));
        return buf;
    }
};

inline SamplingSchedule make_schedule(ScheduleKind kind, double T_sup, std::uint64_t seed,
                                      std::vector<double> times = {}) {
    require(T_sup > 0 && std::isfinite(T_sup), ErrorKind::InvalidArgument, "T_sup must be positive and finite");
    SamplingSchedule s;
    s.kind = kind;
    s.T_sup = T_sup;
    s.seed = seed;
    if (kind == ScheduleKind::Explicit) {
        require(!times.empty() && times.front() == 0.0, ErrorKind::InvalidArgument, "explicit schedule must start at 0");
        for (std::size_t i = 1; i < times.size(); ++i) {
            require(times[i] > times[i - 1], ErrorKind::InvalidArgument, "explicit schedule must increase strictly");
            require(times[i] - times[i - 1] <= T_sup * (1 + 1e-12), ErrorKind::InvalidArgument,
                    "explicit schedule gap exceeds T_sup");
        }
        s.explicit_times = std::move(times);
    }
    return s;
}

// ---------------------------------------------------------------------------

/// Linear sampled feedback  u = Σ f_n x_n + f_b b, the modal image of u = ∫ κ(z) x(z) dz.
struct ControllerSpec {
    std::string id = "none";
    std::vector<double> f;
    double f_boundary = 0.0;
    std::function<double(double)> kernel;  // κ(z), used by independent solvers
    std::vector<double> g_modal;           // truncated gain coefficients (w diagnostic); empty if unused
    double g_boundary = 0.0;               // ∫ g (h_w - Σ h_n φ_n) over modes beyond the retained range

    static ControllerSpec none() { return {}; }

    bool is_none() const { return f.empty(); }

    double evaluate(const ModalState& st) const {
        double u = f_boundary * st.boundary;
        const std::size_t n = std::min(f.size(), st.coeffs.size());
        for (std::size_t i = 0; i < n; ++i) u += f[i] * st.coeffs[i];
        return u;
    }
};

/// Builds f_n = ∫ κ φ_n dz on a fine grid and f_b = ∫ κ h_w - Σ h_n f_n.
inline ControllerSpec linear_feedback(std::string id, std::function<double(double)> kernel, const EigenSystem& sys,
                                      const BoundaryLift& lift, std::size_t fine_points = (1u << 14) + 1) {
    ControllerSpec c;
    c.id = std::move(id);
    c.kernel = kernel;
    const Grid fine(fine_points);
    const auto kv = sample(fine, kernel);
    c.f.resize(sys.size());
    std::vector<double> prod(fine.size());
    for (std::size_t n = 0; n < sys.size(); ++n) {
        for (std::size_t i = 0; i < fine.size(); ++i)
            prod[i] = kv[i] * sys.phi_at(static_cast<int>(n + 1), fine[i]);
        c.f[n] = quad::simpson(prod, fine.h());
    }
    const auto kh = sample(sys.grid, kernel);
    double kh_int = quad::inner(kh, lift.h, {}, sys.grid.h());
    for (std::size_t n = 0; n < sys.size(); ++n) kh_int -= lift.h_n[n] * c.f[n];
    c.f_boundary = kh_int;
    return c;
}

// ---------------------------------------------------------------------------

struct TraceRow {
    double t = 0.0;
    double norm_r = 0.0;
    double u = 0.0;
    double v = kNaN;          // u - ∫ k x(t)
    double w = kNaN;          // ∫ g (x(τ_i) - x(t))
    double residual = kNaN;   // v - w - ∫ (k - g)(x(τ_i) - x(t))
    double y_norm = kNaN;     // transformed-state norm when a transform is supplied
    double v_sup = kNaN;      // sup_{s<=t} |v(s)| e^{-σ(t-s)}
};

struct Snapshot {
    double t = 0.0;
    std::vector<double> x;
};

struct Trace {
    std::vector<TraceRow> rows;
    std::vector<Snapshot> snapshots;
    std::vector<std::vector<double>> coeffs;  // per row, when requested
    std::vector<double> sample_times;          // sampling instants visited, when requested
    std::vector<double> sample_abs_w;          // |w(τ_i)| at those instants
    bool diverged = false;
    std::string controller_id;
    std::string schedule;
    std::size_t n_max = 0;
    std::size_t grid_size = 0;
};

struct SimOptions {
    bool diagnostics = false;                 // v, w, residual columns
    double iss_sigma = kNaN;                  // enables v_sup when finite
    std::function<double(const ModalState&)> y_norm;
    std::vector<double> snapshot_times;       // must lie on the output grid
    bool snapshot_all_rows = false;
    bool record_coeffs = false;
    bool record_samples = false;
    double divergence_cap = 1e150;            // stop once norm exceeds cap · norm(0)
};

namespace detail {

/// Per-gap propagation factors e_n = e^{-λ_n d}, c_n = g_n p_n(d).
struct StepFactors {
    double d = -1.0;
    std::vector<double> e, c;

    double lam_absmax = -1.0;

    void update(double gap, const std::vector<double>& lam, const std::vector<double>& g) {
        if (std::abs(gap - d) <= 1e-14 * d) return;
        d = gap;
        const std::size_t n = lam.size();
        e.resize(n);
        c.resize(n);
        if (lam_absmax < 0) {
            lam_absmax = 0;
            for (double l : lam) lam_absmax = std::max(lam_absmax, std::abs(l));
        }
        if (lam_absmax * gap < 1e-3) {
            // e^{-a} - 1 = -a P(a),  p(d) = d P(a),  P(a) = (1 - e^{-a})/a.
            for (std::size_t i = 0; i < n; ++i) {
                const double a = lam[i] * gap;
                const double P = 1.0 - a * (0.5 - a * (1.0 / 6 - a * (1.0 / 24 - a * (1.0 / 120 - a / 720))));
                e[i] = 1.0 - a * P;
                c[i] = g[i] * gap * P;
            }
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double a = lam[i] * gap;
            if (a < -700)
                throw Error(ErrorKind::NumericFailure, "mode " + std::to_string(i + 1) + " overflows over a hold interval");
            const double em1 = expm1_neg(a);
            e[i] = 1.0 + em1;
            c[i] = g[i] * (lam[i] == 0.0 ? gap : -em1 / lam[i]);
        }
    }
};

}  // namespace detail

/// Runs the sampled loop from x0 to t_end. Rows are emitted at multiples of
/// output_dt; a row that coincides with a sampling instant records the state
/// after sampling (fresh u, v = w = 0).
inline Trace simulate_closed_loop(const EigenSystem& sys, const std::vector<double>& gains, const BoundaryLift& lift,
                                  const ControllerSpec& controller, const SamplingSchedule& schedule,
                                  const std::vector<double>& x0, double t_end, double output_dt,
                                  const SimOptions& opt = {}) {
    require(t_end >= 0 && std::isfinite(t_end), ErrorKind::InvalidArgument, "t_end must be nonnegative");
    require(output_dt > 0, ErrorKind::InvalidArgument, "output_dt must be positive");
    require(controller.is_none() || controller.f.size() == sys.size(), ErrorKind::InvalidArgument,
            "controller was built for a different eigensystem");
    const std::size_t N = sys.size();
    const auto lam = sys.lambdas();
    constexpr double kTimeTol = 1e-12;

    auto snaps = opt.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    for (double ts : snaps) {
        const double k = std::round(ts / output_dt);
        require(std::abs(k * output_dt - ts) <= 1e-9 * std::max(1.0, ts) && ts <= t_end + kTimeTol,
                ErrorKind::InvalidArgument, "snapshot times must lie on the output grid within [0, t_end]");
    }

    Trace tr;
    tr.controller_id = controller.id;
    tr.schedule = schedule.descriptor();
    tr.n_max = N;
    tr.grid_size = sys.grid.size();

    ModalState st = project_initial(x0, sys);
    const double cap = opt.divergence_cap * std::max(lifted_norm(st, lift), 1e-300);
    const bool sigma_on = std::isfinite(opt.iss_sigma);
    const bool have_g = !controller.g_modal.empty();

    ModalState xs = st;  // state as sampled at τ_i
    double u = 0.0, vsup = 0.0, vsup_t = 0.0;
    std::size_t next_out = 0, next_snap = 0;

    auto F = [&](const ModalState& s) { return controller.is_none() ? 0.0 : controller.evaluate(s); };
    auto track_v = [&](double v) {
        vsup = std::max(vsup * std::exp(-opt.iss_sigma * (st.t - vsup_t)), std::abs(v));
        vsup_t = st.t;
    };
    auto emit = [&]() {
        TraceRow row;
        row.t = st.t;
        row.norm_r = lifted_norm(st, lift);
        row.u = u;
        if (opt.diagnostics || sigma_on) {
            ModalState d = xs;
            for (std::size_t n = 0; n < N; ++n) d.coeffs[n] -= st.coeffs[n];
            d.boundary -= st.boundary;
            const double v = u - F(st);
            if (opt.diagnostics) {
                row.v = v;
                if (have_g) {
                    double w = controller.g_boundary * d.boundary;
                    const std::size_t m = std::min(controller.g_modal.size(), N);
                    for (std::size_t n = 0; n < m; ++n) w += controller.g_modal[n] * d.coeffs[n];
                    row.w = w;
                    row.residual = v - w - (F(d) - w);
                }
            }
            if (sigma_on) {
                track_v(v);
                row.v_sup = vsup;
            }
        }
        if (opt.y_norm) row.y_norm = opt.y_norm(st);
        if (opt.record_coeffs) tr.coeffs.push_back(st.coeffs);
        bool snap = opt.snapshot_all_rows;
        while (next_snap < snaps.size() && snaps[next_snap] <= st.t + kTimeTol) {
            if (std::abs(snaps[next_snap] - st.t) <= kTimeTol) snap = true;
            ++next_snap;
        }
        if (snap) tr.snapshots.push_back({st.t, reconstruct(st, sys, lift)});
        tr.rows.push_back(row);
        ++next_out;
    };
    auto out_time = [&](std::size_t k) { return static_cast<double>(k) * output_dt; };
    auto sample_now = [&](bool first) {
        const double u_new = F(st);
        if (sigma_on && !first) track_v(u - u_new);  // v(τ^-) = u_i - ∫ k x(τ)
        u = u_new;
        xs = st;
        if (opt.record_samples) {
            tr.sample_times.push_back(st.t);
            double w = 0;  // x(τ_i) - x(τ_i) through the same code path as the rows
            const std::size_t m = std::min(controller.g_modal.size(), N);
            for (std::size_t n = 0; n < m; ++n) w += controller.g_modal[n] * (xs.coeffs[n] - st.coeffs[n]);
            tr.sample_abs_w.push_back(std::abs(w));
        }
    };

    detail::StepFactors full, part;
    auto advance_to = [&](double t_target, bool whole_gap) {
        const double gap = t_target - st.t;
        if (gap > 0) {
            auto& fac = whole_gap ? full : part;
            fac.update(gap, lam, gains);
            double* x = st.coeffs.data();
            const double* e = fac.e.data();
            const double* c = fac.c.data();
            for (std::size_t n = 0; n < N; ++n) x[n] = e[n] * x[n] + c[n] * u;
            st.boundary = u;
        }
        st.t = t_target;
    };

    sample_now(true);
    emit();
    if (t_end == 0.0) return tr;

    auto cursor = schedule.cursor();
    double tau_next = cursor.next();
    while (true) {
        const double seg_end = std::min(tau_next, t_end);
        bool mid_gap = false;
        while (out_time(next_out) < seg_end - kTimeTol) {
            advance_to(out_time(next_out), false);
            mid_gap = true;
            emit();
        }
        if (tau_next > t_end + kTimeTol) {
            advance_to(t_end, false);
            if (std::abs(out_time(next_out) - t_end) <= kTimeTol) emit();
            break;
        }
        advance_to(tau_next, !mid_gap);
        sample_now(false);
        const double nr = lifted_norm(st, lift);
        if (!std::isfinite(nr) || nr > cap) {
            tr.diverged = true;
            emit();
            break;
        }
        if (std::abs(out_time(next_out) - st.t) <= kTimeTol) emit();
        if (std::abs(st.t - t_end) <= kTimeTol) break;
        tau_next = cursor.next();
    }
    return tr;
}

}  // namespace sdbc
