#pragma once

// Reduced-model boundary feedback: pole placement on the finitely many
// non-decaying modes and the sampling-period bound that keeps the loop stable
// under zero-order hold.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "sdbc/core.hpp"
#include "sdbc/modal_sim.hpp"
#include "sdbc/sl_operator.hpp"

namespace sdbc {

struct ControllabilityReport {
    bool controllable = false;
    double determinant = 0.0;  // Π_{i<j} (λ_j - λ_i)
};

inline ControllabilityReport controllability_check(const std::vector<double>& lambdas, const std::vector<double>& g) {
    require(lambdas.size() == g.size(), ErrorKind::InvalidArgument, "lambdas and g must have equal length");
    for (double gn : g) require(gn != 0.0, ErrorKind::InvalidArgument, "input gain g_n = 0 leaves a mode uncontrollable");
    ControllabilityReport rep;
    double det = 1.0, scale = 1.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        for (std::size_t j = i + 1; j < lambdas.size(); ++j) {
            det *= lambdas[j] - lambdas[i];
            scale *= std::max({std::abs(lambdas[i]), std::abs(lambdas[j]), 1.0});
        }
    rep.determinant = det;
    rep.controllable = std::abs(det) > 1e-14 * scale;
    return rep;
}

/// W = diag(-λ) + g kᵀ.
inline Eigen::MatrixXd closed_loop_matrix(const std::vector<double>& lambdas, const std::vector<double>& g,
                                          const std::vector<double>& k) {
    const auto m = static_cast<Eigen::Index>(lambdas.size());
    Eigen::MatrixXd W = Eigen::Map<const Eigen::VectorXd>(g.data(), m) * Eigen::Map<const Eigen::RowVectorXd>(k.data(), m);
    for (Eigen::Index i = 0; i < m; ++i) W(i, i) -= lambdas[static_cast<std::size_t>(i)];
    return W;
}

namespace detail {

inline void check_pole_set(const std::vector<std::complex<double>>& poles) {
    for (std::size_t i = 0; i < poles.size(); ++i) {
        require(poles[i].real() < 0, ErrorKind::InvalidArgument, "desired poles must have negative real parts");
        for (std::size_t j = i + 1; j < poles.size(); ++j)
            require(std::abs(poles[i] - poles[j]) > 1e-12 * (1 + std::abs(poles[i])), ErrorKind::InvalidArgument,
                    "desired poles must be distinct");
        if (poles[i].imag() != 0.0) {
            const auto conj = std::conj(poles[i]);
            const bool paired = std::any_of(poles.begin(), poles.end(), [&](const auto& q) {
                return std::abs(q - conj) <= 1e-12 * (1 + std::abs(conj));
            });
            require(paired, ErrorKind::InvalidArgument, "complex poles must come in conjugate pairs");
        }
    }
}

inline bool same_spectrum(Eigen::VectorXcd got, std::vector<std::complex<double>> want, double tol) {
    std::vector<std::complex<double>> g(got.data(), got.data() + got.size());
    auto key = [](const std::complex<double>& a, const std::complex<double>& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    };
    std::sort(g.begin(), g.end(), key);
    std::sort(want.begin(), want.end(), key);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g[i] - want[i]) > tol * (1.0 + std::abs(want[i]))) return false;
    return true;
}

}  // namespace detail

/// Ackermann's formula in the coordinates ξ_n = x_n / g_n, where the input vector is all ones.
inline std::vector<double> place_poles(const std::vector<double>& lambdas, const std::vector<double>& g,
                                       const std::vector<std::complex<double>>& desired) {
    const std::size_t m = lambdas.size();
    require(desired.size() == m, ErrorKind::InvalidArgument, "need one desired pole per retained mode");
    const auto ctrl = controllability_check(lambdas, g);
    require(ctrl.controllable, ErrorKind::PreconditionViolation, "retained modes are not controllable (repeated eigenvalue)");
    detail::check_pole_set(desired);
    if (m == 0) return {};

    const auto mi = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd C(mi, mi);  // C(i, j) = (-λ_i)^j
    for (Eigen::Index i = 0; i < mi; ++i) {
        double v = 1.0;
        for (Eigen::Index j = 0; j < mi; ++j) {
            C(i, j) = v;
            v *= -lambdas[static_cast<std::size_t>(i)];
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(mi - 1);
    if (!(cond < 1e12)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "controllability matrix is ill-conditioned (cond = %.3e)", cond);
        throw Error(ErrorKind::NumericFailure, buf);
    }
    Eigen::VectorXd em = Eigen::VectorXd::Zero(mi);
    em(mi - 1) = 1.0;
    const Eigen::VectorXd y = C.transpose().fullPivLu().solve(em);

    std::vector<double> k(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::complex<double> delta = 1.0;
        for (const auto& pj : desired) delta *= (-lambdas[i] - pj);
        k[i] = -y(static_cast<Eigen::Index>(i)) * delta.real() / g[i];
    }
    const Eigen::VectorXcd eig = closed_loop_matrix(lambdas, g, k).eigenvalues();
    if (!detail::same_spectrum(eig, desired, 1e-7))
        throw Error(ErrorKind::NumericFailure, "pole placement verification failed");
    return k;
}

inline std::vector<double> place_poles(const std::vector<double>& lambdas, const std::vector<double>& g,
                                       const std::vector<double>& desired) {
    return place_poles(lambdas, g, std::vector<std::complex<double>>(desired.begin(), desired.end()));
}

/// {-1, -2, ..., -m} scaled by max(1, |λ_1|).
inline std::vector<double> default_poles(const std::vector<double>& lambdas) {
    std::vector<double> poles(lambdas.size());
    const double s = lambdas.empty() ? 1.0 : std::max(1.0, std::abs(lambdas.front()));
    for (std::size_t i = 0; i < poles.size(); ++i) poles[i] = -static_cast<double>(i + 1) * s;
    return poles;
}

/// Smallest m with λ_{m+1} > 0.
inline int select_m(const EigenSystem& sys) {
    for (std::size_t i = 0; i < sys.size(); ++i)
        if (sys.pairs[i].lambda > 0) return static_cast<int>(i);
    throw Error(ErrorKind::RequestMoreModes, "no stored eigenvalue is positive; compute more modes");
}

// ---------------------------------------------------------------------------

struct Envelope {
    double G = 1.0, sigma = 0.0, epsilon = 0.0, mu = 0.0;
};

inline double spectral_norm(const Eigen::MatrixXd& A) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

/// |e^{Wt}| <= G e^{-(σ+ε)t} with σ = μ/2, ε = μ/2 - margin·μ, -μ the spectral abscissa of W.
inline Envelope envelope_constants(const Eigen::MatrixXd& W, double margin = 0.01, int samples = 2000,
                                   double t_cap_factor = 20.0) {
    require(W.rows() == W.cols() && W.rows() > 0, ErrorKind::InvalidArgument, "W must be square and nonempty");
    const Eigen::VectorXcd ev = W.eigenvalues();
    double abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) abscissa = std::max(abscissa, ev(i).real());
    require(abscissa < 0, ErrorKind::PreconditionViolation, "W is not Hurwitz");
    Envelope env;
    env.mu = -abscissa;
    env.sigma = env.mu / 2;
    env.epsilon = env.mu / 2 - margin * env.mu;
    if (W.rows() == 1) return env;
    const double beta = env.sigma + env.epsilon;
    const Eigen::MatrixXd Ws = W + beta * Eigen::MatrixXd::Identity(W.rows(), W.cols());
    auto f = [&](double t) { return spectral_norm((Ws * t).exp()); };

    // Beyond t_cap, ‖e^{Wt}‖e^{βt} <= ρ sup_{[0,∞)} with ρ = value at t_cap; ρ < 1 confines the sup to [0, t_cap].
    double t_cap = t_cap_factor / env.mu;
    int guard = 0;
    while (f(t_cap) >= 1.0) {
        t_cap *= 2;
        if (++guard > 60) throw Error(ErrorKind::NumericFailure, "envelope tail bound did not close");
    }
    double best = 1.0, t_best = 0.0;
    const double dt = t_cap / samples;
    for (int i = 1; i <= samples; ++i) {
        const double v = f(i * dt);
        if (v > best) { best = v; t_best = i * dt; }
    }
    // Local refinement around the sampled maximum.
    double lo = std::max(0.0, t_best - dt), hi = std::min(t_cap, t_best + dt);
    for (int pass = 0; pass < 4; ++pass) {
        const double h = (hi - lo) / 64;
        for (int i = 0; i <= 64; ++i) {
            const double t = lo + i * h;
            const double v = f(t);
            if (v > best) { best = v; t_best = t; }
        }
        lo = std::max(0.0, t_best - h);
        hi = std::min(t_cap, t_best + h);
    }
    env.G = best;
    return env;
}

/// Γ = (Σ_n |g_n k - λ_n e_n|²)^{1/2}.
inline double gamma_constant(const std::vector<double>& g, const std::vector<double>& k, const std::vector<double>& lambdas) {
    require(g.size() == k.size() && g.size() == lambdas.size(), ErrorKind::InvalidArgument, "dimension mismatch");
    double s = 0;
    for (std::size_t n = 0; n < g.size(); ++n)
        for (std::size_t j = 0; j < k.size(); ++j) {
            const double v = g[n] * k[j] - (n == j ? lambdas[n] : 0.0);
            s += v * v;
        }
    return std::sqrt(s);
}

/// p_1(s) = (1 - e^{-λ_1 s}) / λ_1, or s when λ_1 = 0.
inline double p1(double lambda1, double s) {
    return lambda1 == 0.0 ? s : -expm1_neg(lambda1 * s) / lambda1;
}

inline double euclid(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct SamplingBound {
    double T_star = std::numeric_limits<double>::infinity();
    double G = 1.0, sigma = 0.0, epsilon = 0.0, Gamma = 0.0;
    double condition(double T, double lambda1, double gnorm, double knorm) const {
        return G / epsilon * gnorm * p1(lambda1, T) * std::exp(sigma * T) * knorm * Gamma;
    }
};

/// T* solves  G ε^{-1} |g| p_1(T) e^{σT} |k| Γ = 1.
inline SamplingBound max_sampling_period(double G, double sigma, double epsilon, const std::vector<double>& g,
                                         const std::vector<double>& k, double Gamma, double lambda1) {
    require(G > 0 && sigma >= 0 && epsilon > 0, ErrorKind::InvalidArgument, "envelope constants must be positive");
    SamplingBound b{std::numeric_limits<double>::infinity(), G, sigma, epsilon, Gamma};
    const double gn = euclid(g), kn = euclid(k);
    if (kn == 0.0 || gn == 0.0 || Gamma == 0.0) return b;
    auto F = [&](double T) { return b.condition(T, lambda1, gn, kn) - 1.0; };
    double hi = 1e-6;
    int guard = 0;
    while (F(hi) < 0) {
        hi *= 2;
        if (++guard > 200) throw Error(ErrorKind::NumericFailure, "sampling bound bracket failed");
    }
    double lo = 0.0;
    while (hi - lo > 1e-13 * hi + 1e-300) {
        const double mid = 0.5 * (lo + hi);
        if (F(mid) < 0) lo = mid; else hi = mid;
    }
    b.T_star = lo;
    return b;
}

/// Largest T with  k(k + pπ² - q)T e^{(q + σ - pπ²)T} + σ = k + pπ² - q  (x_t = p x_zz + q x).
inline double example_bound_T(double p, double q, double k, double sigma) {
    require(p > 0, ErrorKind::InvalidArgument, "p must be positive");
    const double a = p * kPi * kPi;
    require(a <= q && q < 4 * a, ErrorKind::PreconditionViolation, "requires p pi^2 <= q < 4 p pi^2");
    require(k > q - a, ErrorKind::PreconditionViolation, "requires k > q - p pi^2");
    const double slack = k + a - q;
    require(sigma > 0 && sigma < slack, ErrorKind::InvalidArgument, "no admissible T: sigma must lie in (0, k + p pi^2 - q)");
    auto F = [&](double T) { return k * slack * T * std::exp((q + sigma - a) * T) + sigma - slack; };
    double hi = 1e-9;
    while (F(hi) < 0) hi *= 2;
    double lo = 0.0;
    while (hi - lo > 1e-14 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (F(mid) < 0) lo = mid; else hi = mid;
    }
    return lo;
}

// ---------------------------------------------------------------------------

struct ReducedController {
    int m = 0;
    std::vector<double> k, g, lambdas, poles;
    std::vector<double> kernel;  // r Σ k_l φ_l on the grid
    Envelope envelope;
    double Gamma = 0.0;
    SamplingBound bound;
};

inline std::vector<double> feedback_kernel(const std::vector<double>& k, const EigenSystem& sys) {
    require(k.size() <= sys.size(), ErrorKind::InvalidArgument, "more gains than eigenpairs");
    const auto rw = sys.problem.r_samples(sys.grid);
    std::vector<double> out(sys.grid.size(), 0.0);
    for (std::size_t l = 0; l < k.size(); ++l)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += k[l] * sys.pairs[l].phi[i];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rw[i];
    return out;
}

struct ReducedOptions {
    int m = -1;                       // < 0: smallest m with λ_{m+1} > 0
    std::vector<double> poles;        // empty: default_poles
    double margin = 0.01;
};

inline ReducedController design_reduced(const EigenSystem& sys, const ReducedOptions& opt = {}) {
    ReducedController c;
    c.m = opt.m < 0 ? select_m(sys) : opt.m;
    require(c.m < static_cast<int>(sys.size()), ErrorKind::RequestMoreModes, "m must be below the number of stored modes");
    require(sys.pairs[static_cast<std::size_t>(c.m)].lambda > 0, ErrorKind::PreconditionViolation,
            "lambda_{m+1} must be positive");
    for (int n = 0; n < c.m; ++n) {
        c.lambdas.push_back(sys.pairs[static_cast<std::size_t>(n)].lambda);
        c.g.push_back(input_gain(sys.pairs[static_cast<std::size_t>(n)], sys.problem));
    }
    if (c.m == 0) return c;
    c.poles = opt.poles.empty() ? default_poles(c.lambdas) : opt.poles;
    c.k = place_poles(c.lambdas, c.g, c.poles);
    c.kernel = feedback_kernel(c.k, sys);
    c.envelope = envelope_constants(closed_loop_matrix(c.lambdas, c.g, c.k), opt.margin);
    c.Gamma = gamma_constant(c.g, c.k, c.lambdas);
    c.bound = max_sampling_period(c.envelope.G, c.envelope.sigma, c.envelope.epsilon, c.g, c.k, c.Gamma, c.lambdas.front());
    return c;
}

/// Modal feedback u = Σ_{l<=m} k_l x_l; the kernel representation is attached for independent solvers.
inline ControllerSpec reduced_controller_spec(const ReducedController& c, const EigenSystem& sys) {
    ControllerSpec s;
    s.id = "reduced";
    s.f.assign(sys.size(), 0.0);
    for (int l = 0; l < c.m; ++l) s.f[static_cast<std::size_t>(l)] = c.k[static_cast<std::size_t>(l)];
    auto k = c.k;
    const SLProblem pr = sys.problem;
    auto es = std::make_shared<const EigenSystem>(sys);
    s.kernel = [k, pr, es](double z) {
        double v = 0;
        for (std::size_t l = 0; l < k.size(); ++l) v += k[l] * es->phi_at(static_cast<int>(l + 1), z);
        return pr.r(z) * v;
    };
    return s;
}

// ---------------------------------------------------------------------------

struct IssReport {
    double integral = 0.0;                 // ∫ r x̄²
    std::vector<double> partial_sums;      // modal series truncated at n = 1..n_max
    double relative_gap = 0.0;             // (integral - last partial sum) / integral
    double K_partial = kNaN;               // Σ_{n>m} (λ_n - σ)^{-2} term², over stored modes
    double K_bound = kNaN;                 // ((λ_{m+1} + w)/(λ_{m+1} - σ))² ∫ r x̄²
};

/// Closed-form x̄ for constant p, q with Dirichlet ends: x̄'' = ((q + w)/p) x̄, x̄(0) = 0, x̄(1) = 1.
inline double dirichlet_shifted_profile(double p, double q_plus_w, double z) {
    const double a = q_plus_w / p;
    if (a > 0) { const double b = std::sqrt(a); return std::sinh(b * z) / std::sinh(b); }
    if (a < 0) { const double b = std::sqrt(-a); return std::sin(b * z) / std::sin(b); }
    return z;
}

inline IssReport iss_identity_check(const EigenSystem& sys, double w, double sigma = kNaN, int m = 0) {
    require(w > -sys.pairs.front().lambda, ErrorKind::PreconditionViolation, "w must exceed -lambda_1");
    const auto& pr = sys.problem;
    const double an = std::sqrt(pr.a1 * pr.a1 + pr.a2 * pr.a2);
    IssReport rep;
    if (pr.constant_dirichlet()) {
        const double p = pr.p.constant_value(), qw = pr.q.constant_value() + w;
        const Grid fine((1u << 14) + 1);
        const auto xb = sample(fine, [&](double z) { return dirichlet_shifted_profile(p, qw, z) * an / pr.a1; });
        rep.integral = quad::inner(xb, xb, {}, fine.h());
    } else {
        rep.integral = solve_shifted_bvp(pr, w, an, sys.grid).weighted_l2_sq;
    }
    const double p1_ = pr.p(1.0);
    auto term = [&](const EigenPair& e) {
        const double v = (pr.a1 * e.dphi1 - pr.a2 * e.phi1) / an;
        return p1_ * p1_ * v * v;
    };
    double s = 0;
    for (const auto& e : sys.pairs) {
        s += term(e) / ((e.lambda + w) * (e.lambda + w));
        rep.partial_sums.push_back(s);
    }
    rep.relative_gap = (rep.integral - s) / rep.integral;
    if (std::isfinite(sigma)) {
        require(m >= 0 && m < static_cast<int>(sys.size()), ErrorKind::InvalidArgument, "m out of range");
        const double lm1 = sys.pairs[static_cast<std::size_t>(m)].lambda;
        require(sigma < lm1, ErrorKind::PreconditionViolation, "sigma must be below lambda_{m+1}");
        double k = 0;
        for (std::size_t n = static_cast<std::size_t>(m); n < sys.size(); ++n) {
            const double d = sys.pairs[n].lambda - sigma;
            k += term(sys.pairs[n]) / (d * d);
        }
        rep.K_partial = k;
        rep.K_bound = std::pow((lm1 + w) / (lm1 - sigma), 2) * rep.integral;
    }
    return rep;
}

}  // namespace sdbc
