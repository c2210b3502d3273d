#pragma once

// Sturm–Liouville operator  (Af)(z) = -(p f')'/r + q f / r  on [0, 1] with separated
// boundary conditions  b1 f(0) + b2 f'(0) = 0,  a1 f(1) + a2 f'(1) = 0.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "sdbc/core.hpp"

namespace sdbc {

/// A coefficient function on [0, 1]: either a constant or a tabulated profile
/// interpolated with a natural cubic spline.
class Coefficient {
public:
    Coefficient() : Coefficient(constant(1.0)) {}

    static Coefficient constant(double value) {
        Coefficient c(0);
        c.value_ = value;
        return c;
    }

    static Coefficient tabulated(std::vector<double> z, std::vector<double> values) {
        require(!z.empty() && z.front() <= 0.0 && z.back() >= 1.0, ErrorKind::InvalidArgument,
                "tabulated coefficient must cover [0, 1]");
        Coefficient c(0);
        c.spline_ = std::make_shared<const CubicSpline>(std::move(z), std::move(values));
        return c;
    }

    bool is_constant() const noexcept { return !spline_; }
    double constant_value() const noexcept { return value_; }

    double operator()(double z) const { return spline_ ? (*spline_)(z) : value_; }
    double derivative(double z) const { return spline_ ? spline_->derivative(z) : 0.0; }

private:
    explicit Coefficient(int) {}
    double value_ = 0.0;
    std::shared_ptr<const CubicSpline> spline_;
};

struct SLProblem {
    Coefficient p = Coefficient::constant(1.0);
    Coefficient q = Coefficient::constant(0.0);
    Coefficient r = Coefficient::constant(1.0);
    double b1 = 1.0, b2 = 0.0;  // left:  b1 f(0) + b2 f'(0) = 0
    double a1 = 1.0, a2 = 0.0;  // right: a1 f(1) + a2 f'(1) = u

    /// x_t = p x_zz + reaction x with Dirichlet conditions at both ends.
    static SLProblem dirichlet_constant(double p, double reaction) {
        SLProblem pr;
        pr.p = Coefficient::constant(p);
        pr.q = Coefficient::constant(-reaction);
        return pr;
    }

    bool constant_dirichlet() const {
        return p.is_constant() && q.is_constant() && r.is_constant() && r.constant_value() == 1.0 &&
               b2 == 0.0 && b1 != 0.0 && a2 == 0.0 && a1 != 0.0;
    }

    void validate(const Grid& grid) const {
        require(std::abs(a1) + std::abs(a2) > 0, ErrorKind::InvalidArgument, "|a1| + |a2| must be positive");
        require(std::abs(b1) + std::abs(b2) > 0, ErrorKind::InvalidArgument, "|b1| + |b2| must be positive");
        for (std::size_t i = 0; i < grid.size(); ++i) {
            require(p(grid[i]) > 0, ErrorKind::InvalidArgument, "p must be positive on [0,1]");
            require(r(grid[i]) > 0, ErrorKind::InvalidArgument, "r must be positive on [0,1]");
        }
    }

    std::vector<double> r_samples(const Grid& grid) const {
        return sample(grid, [&](double z) { return r(z); });
    }
};

struct EigenPair {
    int n = 0;
    double lambda = 0.0;
    std::vector<double> phi;
    double phi0 = 0.0, dphi0 = 0.0, phi1 = 0.0, dphi1 = 0.0;
    double max_abs_phi = 0.0;
};

struct EigenSystem {
    SLProblem problem;
    Grid grid;
    std::vector<EigenPair> pairs;
    /// Exact eigenfunction evaluator when the spectrum is known in closed form.
    std::function<double(int, double)> exact;

    std::size_t size() const noexcept { return pairs.size(); }
    const EigenPair& operator[](std::size_t i) const { return pairs[i]; }

    std::vector<double> lambdas() const {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const auto& e : pairs) out.push_back(e.lambda);
        return out;
    }

    /// φ_n(z) off the grid: exact when available, spline interpolation otherwise.
    double phi_at(int n, double z) const {
        if (exact) return exact(n, z);
        const auto& e = pairs.at(static_cast<std::size_t>(n - 1));
        if (!splines_) splines_ = std::make_shared<std::vector<std::optional<CubicSpline>>>(pairs.size());
        auto& s = (*splines_)[static_cast<std::size_t>(n - 1)];
        if (!s) s.emplace(grid.nodes(), e.phi);
        return (*s)(z);
    }

private:
    mutable std::shared_ptr<std::vector<std::optional<CubicSpline>>> splines_;
};

// ---------------------------------------------------------------------------
// Closed-form spectrum for the constant-coefficient Dirichlet problem.

inline EigenSystem analytic_eigensystem(double p_const, double reaction, int n_max, int grid_size) {
    require(grid_size >= 2, ErrorKind::InvalidArgument, "grid_size must be at least 2");
    require(n_max >= 1, ErrorKind::InvalidArgument, "n_max must be at least 1");
    require(p_const > 0, ErrorKind::InvalidArgument, "p must be positive");
    EigenSystem sys;
    sys.problem = SLProblem::dirichlet_constant(p_const, reaction);
    sys.grid = Grid(static_cast<std::size_t>(grid_size));
    sys.exact = [](int n, double z) { return std::sqrt(2.0) * std::sin(n * kPi * z); };
    sys.pairs.reserve(static_cast<std::size_t>(n_max));
    const double s2 = std::sqrt(2.0);
    for (int n = 1; n <= n_max; ++n) {
        EigenPair e;
        e.n = n;
        e.lambda = n * n * kPi * kPi * p_const - reaction;
        e.phi.resize(sys.grid.size());
        for (std::size_t i = 0; i < sys.grid.size(); ++i) e.phi[i] = sys.exact(n, sys.grid[i]);
        e.phi.back() = 0.0;
        e.phi0 = 0.0;
        e.phi1 = 0.0;
        e.dphi0 = s2 * n * kPi;
        e.dphi1 = s2 * n * kPi * (n % 2 == 0 ? 1.0 : -1.0);
        e.max_abs_phi = s2;
        sys.pairs.push_back(std::move(e));
    }
    return sys;
}

// ---------------------------------------------------------------------------
// Shooting with the scaled Prüfer angle  f = R sin θ / √S,  p f' = R √S cos θ,
// S a positive constant per eigenvalue index.

namespace detail {

using State1 = std::array<double, 1>;
using State2 = std::array<double, 2>;

inline double left_angle(const SLProblem& pr, double S = 1.0) {
    double th = std::atan2(-pr.b2 * S, pr.b1 * pr.p(0.0));
    if (th < 0) th += kPi;
    if (th >= kPi) th -= kPi;
    return th;
}

inline double right_angle(const SLProblem& pr, double S = 1.0) {
    double th = std::atan2(-pr.a2 * S, pr.a1 * pr.p(1.0));
    if (th <= 0) th += kPi;
    return th;
}

inline double prufer_endpoint(const SLProblem& pr, double lambda, double S, double tol) {
    namespace ode = boost::numeric::odeint;
    State1 th{left_angle(pr, S)};
    auto rhs = [&](const State1& x, State1& dx, double z) {
        const double s = std::sin(x[0]), c = std::cos(x[0]);
        dx[0] = S * c * c / pr.p(z) + (lambda * pr.r(z) - pr.q(z)) / S * s * s;
    };
    ode::integrate_adaptive(ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State1>()), rhs, th,
                            0.0, 1.0, 1e-3);
    return th[0];
}

/// Integrates (f, p f') from the left boundary through the grid nodes.
/// Returns samples of f plus the endpoint state (f(1), p f'(1)).
struct ShotProfile {
    std::vector<double> f;
    double f1 = 0.0, pdf1 = 0.0, f0 = 0.0, pdf0 = 0.0;
};

inline ShotProfile shoot_profile(const SLProblem& pr, double lambda, double shift_w, const Grid& grid, double tol) {
    namespace ode = boost::numeric::odeint;
    const double th0 = left_angle(pr);
    State2 y{std::sin(th0), std::cos(th0)};
    ShotProfile out;
    out.f0 = y[0];
    out.pdf0 = y[1];
    out.f.resize(grid.size());
    auto rhs = [&](const State2& x, State2& dx, double z) {
        dx[0] = x[1] / pr.p(z);
        dx[1] = (pr.q(z) - (lambda - shift_w) * pr.r(z)) * x[0];
    };
    const auto times = grid.nodes();
    std::size_t k = 0;
    ode::integrate_times(ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<State2>()), rhs, y,
                         times.begin(), times.end(), 1e-3, [&](const State2& x, double) {
                             out.f[k++] = x[0];
                         });
    out.f1 = y[0];
    out.pdf1 = y[1];
    return out;
}

}  // namespace detail

inline EigenSystem shoot_eigensystem(const SLProblem& problem, int n_max, int grid_size, double tol) {
    require(grid_size >= 2, ErrorKind::InvalidArgument, "grid_size must be at least 2");
    require(n_max >= 1, ErrorKind::InvalidArgument, "n_max must be at least 1");
    require(tol > 0, ErrorKind::InvalidArgument, "tol must be positive");
    EigenSystem sys;
    sys.problem = problem;
    sys.grid = Grid(static_cast<std::size_t>(grid_size));
    problem.validate(sys.grid);

    const double ode_tol = std::min(1e-12, tol * 1e-3);
    double qmin = std::numeric_limits<double>::infinity(), qmax = -qmin, pmax = 0, rmin = qmin, pmean = 0;
    for (std::size_t i = 0; i < sys.grid.size(); ++i) {
        const double z = sys.grid[i];
        qmin = std::min(qmin, problem.q(z) / problem.r(z));
        qmax = std::max(qmax, problem.q(z) / problem.r(z));
        pmax = std::max(pmax, problem.p(z));
        rmin = std::min(rmin, problem.r(z));
        pmean += problem.p(z) / static_cast<double>(sys.grid.size());
    }

    double prev_lambda = -std::numeric_limits<double>::infinity();
    for (int n = 1; n <= n_max; ++n) {
        const double S = std::max(1.0, n * kPi * pmean);
        const double target = detail::right_angle(problem, S) + (n - 1) * kPi;
        auto F = [&](double lam) { return detail::prufer_endpoint(problem, lam, S, ode_tol) - target; };
        double lo = std::isfinite(prev_lambda) ? prev_lambda : qmin - 1.0;
        double step = 1.0 + std::abs(lo);
        int guard = 0;
        while (F(lo) >= 0) {
            lo -= step;
            step *= 2;
            if (++guard > 200) throw Error(ErrorKind::NumericFailure, "bracketing failed for eigenvalue " + std::to_string(n));
        }
        double hi = qmax + (n * kPi) * (n * kPi) * pmax / rmin + 1.0;
        step = 1.0 + std::abs(hi);
        guard = 0;
        while (F(hi) <= 0) {
            hi += step;
            step *= 2;
            if (++guard > 200) throw Error(ErrorKind::NumericFailure, "bracketing failed for eigenvalue " + std::to_string(n));
        }
        // Bisection to a coarse bracket, then safeguarded secant (Illinois) refinement.
        double flo = F(lo), fhi = F(hi);
        for (int it = 0; it < 60 && hi - lo > 1e-4 * (1.0 + std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = F(mid);
            if (fm < 0) { lo = mid; flo = fm; } else { hi = mid; fhi = fm; }
        }
        int side = 0;
        double lam = 0.5 * (lo + hi);
        bool converged = false;
        for (int it = 0; it < 200; ++it) {
            lam = (lo * fhi - hi * flo) / (fhi - flo);
            const double fm = F(lam);
            if (std::abs(fm) < 1e-14 || hi - lo < tol * 1e-3 * (1.0 + std::abs(lam))) { converged = true; break; }
            if (fm < 0) {
                lo = lam; flo = fm;
                if (side == -1) fhi *= 0.5;
                side = -1;
            } else {
                hi = lam; fhi = fm;
                if (side == 1) flo *= 0.5;
                side = 1;
            }
            if (hi - lo < tol * 1e-3 * (1.0 + std::abs(lam))) { converged = true; break; }
        }
        if (!converged) throw Error(ErrorKind::NumericFailure, "eigenvalue " + std::to_string(n) + " did not converge");
        if (!(lam > prev_lambda)) throw Error(ErrorKind::NumericFailure, "eigenvalue ordering lost at index " + std::to_string(n));
        prev_lambda = lam;

        auto prof = detail::shoot_profile(problem, lam, 0.0, sys.grid, ode_tol);
        const auto rw = problem.r_samples(sys.grid);
        const double nrm = quad::norm(prof.f, rw, sys.grid.h());
        if (!(nrm > 0) || !std::isfinite(nrm)) throw Error(ErrorKind::NumericFailure, "degenerate eigenfunction " + std::to_string(n));
        EigenPair e;
        e.n = n;
        e.lambda = lam;
        e.phi = prof.f;
        double mx = 0;
        for (auto& v : e.phi) { v /= nrm; mx = std::max(mx, std::abs(v)); }
        e.max_abs_phi = mx;
        e.phi0 = prof.f0 / nrm;
        e.dphi0 = prof.pdf0 / nrm / problem.p(0.0);
        e.phi1 = prof.f1 / nrm;
        e.dphi1 = prof.pdf1 / nrm / problem.p(1.0);
        sys.pairs.push_back(std::move(e));
    }
    return sys;
}

// ---------------------------------------------------------------------------

/// Discrete residual  -(p φ')' + q φ - λ r φ  on interior nodes (max norm).
inline double ode_residual(const EigenPair& e, const SLProblem& pr, const Grid& grid) {
    const double h = grid.h();
    double worst = 0;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double z = grid[i];
        const double pr_ = pr.p(z + 0.5 * h), pl = pr.p(z - 0.5 * h);
        const double flux = (pr_ * (e.phi[i + 1] - e.phi[i]) - pl * (e.phi[i] - e.phi[i - 1])) / (h * h);
        worst = std::max(worst, std::abs(-flux + pr.q(z) * e.phi[i] - e.lambda * pr.r(z) * e.phi[i]));
    }
    return worst;
}

struct ValidationReport {
    double gram_max_deviation = 0.0;
    double boundary_residual = 0.0;  // max |b1 φ(0) + b2 φ'(0)|, |a1 φ(1) + a2 φ'(1)|
    bool strictly_increasing = true;
    int tail_start = 0;                 // N with λ_N > 0
    std::vector<double> partial_sums;   // S_j, j = N .. n_max
    double tail_exponent = 0.0;         // slope of log(λ_n^{-1} max|φ_n|) vs log n
};

inline std::vector<std::vector<double>> gram_matrix(const EigenSystem& sys) {
    const auto rw = sys.problem.r_samples(sys.grid);
    const std::size_t n = sys.size();
    std::vector<std::vector<double>> G(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            G[i][j] = G[j][i] = quad::inner(sys.pairs[i].phi, sys.pairs[j].phi, rw, sys.grid.h());
    return G;
}

inline ValidationReport validate_eigensystem(const EigenSystem& sys, int n_tail) {
    ValidationReport rep;
    const auto G = gram_matrix(sys);
    for (std::size_t i = 0; i < G.size(); ++i)
        for (std::size_t j = 0; j < G.size(); ++j)
            rep.gram_max_deviation = std::max(rep.gram_max_deviation, std::abs(G[i][j] - (i == j ? 1.0 : 0.0)));
    const auto& pr = sys.problem;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const auto& e = sys.pairs[i];
        rep.boundary_residual = std::max({rep.boundary_residual, std::abs(pr.b1 * e.phi0 + pr.b2 * e.dphi0),
                                          std::abs(pr.a1 * e.phi1 + pr.a2 * e.dphi1)});
        if (i > 0 && !(e.lambda > sys.pairs[i - 1].lambda)) rep.strictly_increasing = false;
    }
    int start = std::max(1, n_tail);
    while (start <= static_cast<int>(sys.size()) && !(sys.pairs[static_cast<std::size_t>(start - 1)].lambda > 0)) ++start;
    require(start <= static_cast<int>(sys.size()), ErrorKind::PreconditionViolation,
            "no stored eigenvalue is positive; tail summability cannot be reported");
    rep.tail_start = start;
    double s = 0;
    std::vector<double> lx, ly;
    for (int n = start; n <= static_cast<int>(sys.size()); ++n) {
        const auto& e = sys.pairs[static_cast<std::size_t>(n - 1)];
        const double term = e.max_abs_phi / e.lambda;
        s += term;
        rep.partial_sums.push_back(s);
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(term));
    }
    // Fit on the upper half of the stored range, where the asymptotics dominate.
    const std::size_t from = lx.size() / 2;
    const std::size_t cnt = lx.size() - from;
    if (cnt >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = from; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
        mx /= static_cast<double>(cnt);
        my /= static_cast<double>(cnt);
        double sxy = 0, sxx = 0;
        for (std::size_t i = from; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        rep.tail_exponent = sxx > 0 ? sxy / sxx : 0.0;
    }
    return rep;
}

// ---------------------------------------------------------------------------

/// h(z) = σ1 z² + σ2 z³ with h(0) = h'(0) = 0 and a1 h(1) + a2 h'(1) = 1.
struct LiftingPolynomial {
    double sigma1 = 0.0, sigma2 = 0.0;
    double operator()(double z) const { return sigma1 * z * z + sigma2 * z * z * z; }
    double derivative(double z) const { return 2.0 * sigma1 * z + 3.0 * sigma2 * z * z; }
};

inline LiftingPolynomial boundary_lifting(double a1, double a2) {
    require(a1 != 0.0 || a2 != 0.0, ErrorKind::InvalidArgument, "a1 and a2 cannot both vanish");
    const double d = a1 * a1 + a2 * a2;
    return {(3.0 * a1 - a2) / d, (a2 - 2.0 * a1) / d};
}

/// g_n = p(1)/(a1² + a2²) (a2 φ_n(1) - a1 φ_n'(1)).
inline double input_gain(const EigenPair& e, const SLProblem& pr) {
    const double g = pr.p(1.0) / (pr.a1 * pr.a1 + pr.a2 * pr.a2) * (pr.a2 * e.phi1 - pr.a1 * e.dphi1);
    if (!(std::abs(g) >= 1e-12))
        throw Error(ErrorKind::NumericFailure, "input gain of mode " + std::to_string(e.n) + " vanishes");
    return g;
}

inline std::vector<double> input_gains(const EigenSystem& sys) {
    std::vector<double> g;
    g.reserve(sys.size());
    for (const auto& e : sys.pairs) g.push_back(input_gain(e, sys.problem));
    return g;
}

// ---------------------------------------------------------------------------

/// Solution of  (p x')' - (q + w r) x = 0,  b1 x(0) + b2 x'(0) = 0,  a1 x(1) + a2 x'(1) = rhs.
struct BvpSolution {
    std::vector<double> x;
    double x1 = 0.0, dx1 = 0.0;
    double weighted_l2_sq = 0.0;  // ∫ r x² dz
};

inline BvpSolution solve_shifted_bvp(const SLProblem& pr, double w, double rhs, const Grid& grid, double tol = 1e-12) {
    pr.validate(grid);
    // shoot_profile integrates (p f')' = (q - (λ - shift) r) f; choose λ = 0, shift = w.
    auto prof = detail::shoot_profile(pr, 0.0, w, grid, tol);
    const double f1 = prof.f1, df1 = prof.pdf1 / pr.p(1.0);
    const double bc = pr.a1 * f1 + pr.a2 * df1;
    double fmax = 0.0;
    for (double v : prof.f) fmax = std::max(fmax, std::abs(v));
    const double scale_ref = std::abs(pr.a1) * fmax + std::abs(pr.a2 * df1) + 1e-300;
    if (!(std::abs(bc) > 1e-8 * scale_ref))
        throw Error(ErrorKind::NumericFailure, "-w is (numerically) an eigenvalue; boundary problem is singular");
    const double s = rhs / bc;
    BvpSolution sol;
    sol.x = prof.f;
    for (auto& v : sol.x) v *= s;
    sol.x1 = f1 * s;
    sol.dx1 = df1 * s;
    sol.weighted_l2_sq = quad::inner(sol.x, sol.x, pr.r_samples(grid), grid.h());
    return sol;
}

}  // namespace sdbc
