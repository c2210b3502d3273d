#pragma once

// Backstepping boundary feedback for  x_t = p x_zz + q x  (p, q constant) with
// Dirichlet conditions at both ends. The Volterra transformation
//   y(z) = x(z) - ∫_0^z K(z, s) x(s) ds
// maps the plant onto  y_t = p y_zz - c y.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdbc/core.hpp"
#include "sdbc/modal_sim.hpp"
#include "sdbc/sl_operator.hpp"

namespace sdbc {

/// Modified Bessel function of the first kind, order one.
inline double bessel_I1(double x) {
    require(x >= 0, ErrorKind::InvalidArgument, "bessel_I1 requires x >= 0");
    if (x <= 15.0) {
        const double h = 0.5 * x, h2 = h * h;
        double term = h, sum = h;
        for (int m = 1; m < 200; ++m) {
            term *= h2 / (static_cast<double>(m) * static_cast<double>(m + 1));
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        return sum;
    }
    // e^x/√(2πx) Σ (-1)^k a_k / x^k,  a_k = Π_{j<=k} (4 - (2j-1)²) / (k! 8^k).
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double j = 2.0 * k - 1.0;
        const double next = -term * (4.0 - j * j) / (8.0 * k * x);
        if (std::abs(next) > std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    }
    return std::exp(x) / std::sqrt(2.0 * kPi * x) * sum;
}

/// I_1(ξ)/ξ with the removable singularity at 0.
inline double bessel_I1_over_x(double xi) {
    if (xi < 1e-4) {
        const double h2 = 0.25 * xi * xi;
        return 0.5 * (1.0 + h2 / 2.0 + h2 * h2 / 12.0);
    }
    return bessel_I1(xi) / xi;
}

/// K(z, s) = -(q + c)/p · s · I_1(ξ)/ξ,  ξ = √((q + c)(z² - s²)/p).
inline double kernel_value(double p, double q, double c, double z, double s) {
    const double a = (q + c) / p;
    if (a == 0.0) return 0.0;
    const double xi = std::sqrt(std::max(0.0, a * (z * z - s * s)));
    return -a * s * bessel_I1_over_x(xi);
}

inline void require_kernel_domain(double p, double q, double c) {
    require(p > 0, ErrorKind::InvalidArgument, "p must be positive");
    require(c >= 0, ErrorKind::InvalidArgument, "c must be nonnegative");
    require(q + c >= 0, ErrorKind::PreconditionViolation,
            "q + c < 0 is not supported; choose c >= max(0, -q), e.g. the default c = max(0, -lambda_1) + pi^2 p / 2");
}

/// k(s) = K(1, s).
inline double gain_kernel(double p, double q, double c, double s) {
    require_kernel_domain(p, q, c);
    return kernel_value(p, q, c, 1.0, s);
}

/// Lower-triangular samples T(z_i, s_j), j <= i, on a uniform grid.
class TriangularSurface {
public:
    TriangularSurface() = default;
    explicit TriangularSurface(Grid g) : grid_(g), data_(g.size() * g.size(), 0.0) {}

    const Grid& grid() const noexcept { return grid_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * grid_.size() + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * grid_.size() + j]; }
    std::vector<double> row(std::size_t i) const {
        return {data_.begin() + static_cast<std::ptrdiff_t>(i * grid_.size()),
                data_.begin() + static_cast<std::ptrdiff_t>(i * grid_.size() + i + 1)};
    }

private:
    Grid grid_;
    std::vector<double> data_;
};

inline TriangularSurface kernel_surface(double p, double q, double c, const Grid& grid) {
    require_kernel_domain(p, q, c);
    TriangularSurface K(grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) K(i, j) = kernel_value(p, q, c, grid[i], grid[j]);
    return K;
}

/// Trapezoid weight of node j in ∫_0^{z_i} ds.
inline double row_weight(std::size_t i, std::size_t j, double h) {
    if (i == 0) return 0.0;
    return (j == 0 || j == i) ? 0.5 * h : h;
}

/// Max |p(K_zz - K_ss) - (q + c) K| over interior triangle nodes, centered differences.
inline double kernel_pde_residual(const TriangularSurface& K, double p, double q, double c) {
    const Grid& g = K.grid();
    const double h = g.h();
    double worst = 0;
    for (std::size_t i = 2; i + 1 < g.size(); ++i)
        for (std::size_t j = 1; j + 1 < i; ++j) {
            const double kzz = (K(i + 1, j) - 2 * K(i, j) + K(i - 1, j)) / (h * h);
            const double kss = (K(i, j + 1) - 2 * K(i, j) + K(i, j - 1)) / (h * h);
            worst = std::max(worst, std::abs(p * (kzz - kss) - (q + c) * K(i, j)));
        }
    return worst;
}

/// Inverse kernel of the discrete transform. With A_ij = ω_ij K_ij the forward map is
/// I - A; its inverse I + B obeys B = A + A B, solved by successive approximation, and
/// L_ij = B_ij / ω_ij. The forward/inverse pair is then exact on the grid.
inline TriangularSurface inverse_kernel(const TriangularSurface& K, double tol = 1e-10, int max_iter = 200) {
    const Grid& g = K.grid();
    const auto n = static_cast<Eigen::Index>(g.size());
    const double h = g.h();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            A(i, j) = row_weight(static_cast<std::size_t>(i), static_cast<std::size_t>(j), h) *
                      K(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    Eigen::MatrixXd B = A;
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd next = A;
        next.noalias() += A.triangularView<Eigen::Lower>() * B;
        const double change = (next - B).cwiseAbs().maxCoeff();
        B.swap(next);
        if (change < 1e-3 * tol * scale) {
            Eigen::MatrixXd res = B - A;
            res.noalias() -= A.triangularView<Eigen::Lower>() * B;
            if (res.cwiseAbs().maxCoeff() < tol) { converged = true; break; }
        }
    }
    if (!converged) throw Error(ErrorKind::NumericFailure, "inverse kernel iteration did not converge");
    TriangularSurface L(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double w = row_weight(i, j, h);
            L(i, j) = w > 0 ? B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / w : K(i, j);
        }
    return L;
}

enum class VolterraDirection { Forward, Inverse };

/// Forward: x - ∫_0^z K x ds.  Inverse: x + ∫_0^z L x ds.
inline std::vector<double> volterra_apply(const std::vector<double>& x, const TriangularSurface& kernel,
                                          VolterraDirection dir) {
    const Grid& g = kernel.grid();
    require(x.size() == g.size(), ErrorKind::InvalidArgument, "profile and kernel grids differ");
    const double h = g.h(), sign = dir == VolterraDirection::Forward ? -1.0 : 1.0;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j <= i; ++j) s += row_weight(i, j, h) * kernel(i, j) * x[j];
        out[i] = x[i] + sign * s;
    }
    return out;
}

/// 1 + (∫_0^1 ∫_0^z T² ds dz)^{1/2}, trapezoid over the triangle.
inline double transform_norm(const TriangularSurface& T) {
    const Grid& g = T.grid();
    const double h = g.h();
    double total = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double row = 0;
        for (std::size_t j = 0; j <= i; ++j) row += row_weight(i, j, h) * T(i, j) * T(i, j);
        total += ((i == 0 || i + 1 == g.size()) ? 0.5 * h : h) * row;
    }
    return 1.0 + std::sqrt(total);
}

struct TransformNorms {
    double K_tilde = 1.0, L_tilde = 1.0;
};

inline TransformNorms transform_norms(const TriangularSurface& K, const TriangularSurface& L) {
    return {transform_norm(K), transform_norm(L)};
}

// ---------------------------------------------------------------------------

struct TargetIss {
    double gamma = 0.0;
    double G = std::sqrt(2.0);
    double sigma = 0.0;
    double mu1 = 0.0;
    double integral = 0.0;                 // ∫ x̄²
    double K = 0.0;                        // (μ_1/(μ_1 - σ))² ∫ x̄²
    std::vector<double> mu;                // target spectrum
    std::vector<double> dpsi1;             // ψ_n'(1)
    std::vector<double> partial_sums;      // p² Σ_{n<=j} μ_n^{-2} ψ_n'(1)²
};

/// Solution of p x̄'' - c x̄ = 0, b1 x̄(0) + b2 x̄'(0) = 0, x̄(1) = 1.
inline double target_profile(double p, double c, double b1, double b2, double z) {
    if (c == 0.0) return (b2 - b1 * z) / (b2 - b1);
    const double beta = std::sqrt(c / p);
    return (b2 * beta * std::cosh(beta * z) - b1 * std::sinh(beta * z)) /
           (b2 * beta * std::cosh(beta) - b1 * std::sinh(beta));
}

/// ISS data for the target system y_t = p y_zz - c y, left condition (b1, b2), y(1) = v.
/// σ < 0 selects σ = μ_1 / 2.
inline TargetIss target_iss_gain(double p, double c, double b1, double b2, double sigma = -1.0, int n_modes = 256) {
    require(p > 0 && c >= 0, ErrorKind::InvalidArgument, "requires p > 0 and c >= 0");
    require(n_modes >= 1, ErrorKind::InvalidArgument, "n_modes must be positive");
    TargetIss t;
    if (b2 == 0.0) {
        for (int n = 1; n <= n_modes; ++n) {
            t.mu.push_back(p * n * n * kPi * kPi + c);
            t.dpsi1.push_back(std::sqrt(2.0) * n * kPi * (n % 2 == 0 ? 1.0 : -1.0));
        }
    } else {
        SLProblem pr;
        pr.p = Coefficient::constant(p);
        pr.q = Coefficient::constant(c);
        pr.b1 = b1;
        pr.b2 = b2;
        const auto sys = shoot_eigensystem(pr, n_modes, 401, 1e-10);
        for (const auto& e : sys.pairs) {
            t.mu.push_back(e.lambda);
            t.dpsi1.push_back(e.dphi1);
        }
    }
    t.mu1 = t.mu.front();
    require(t.mu1 > 0, ErrorKind::PreconditionViolation, "target spectrum must be positive");
    t.sigma = sigma < 0 ? 0.5 * t.mu1 : sigma;
    require(t.sigma > 0 && t.sigma < t.mu1, ErrorKind::PreconditionViolation, "sigma must lie in (0, mu_1)");
    const Grid fine((1u << 14) + 1);
    const auto xb = sample(fine, [&](double z) { return target_profile(p, c, b1, b2, z); });
    t.integral = quad::inner(xb, xb, {}, fine.h());
    double s = 0;
    for (std::size_t n = 0; n < t.mu.size(); ++n) {
        s += p * p * t.dpsi1[n] * t.dpsi1[n] / (t.mu[n] * t.mu[n]);
        t.partial_sums.push_back(s);
    }
    t.K = std::pow(t.mu1 / (t.mu1 - t.sigma), 2) * t.integral;
    t.gamma = std::sqrt(2.0 * t.K);
    return t;
}

// ---------------------------------------------------------------------------

enum class TruncationPolicy { Smallest, MaxT };

struct ModalTruncation {
    int N = 0;
    std::vector<double> k_n;      // ∫ k φ_n for every available mode
    double k_norm = 0.0;          // ‖k‖₂
    double tail_norm = 0.0;       // ‖k - g‖₂ at N (Parseval)
    std::vector<double> tail_by_N;  // ‖k - g‖₂ for N = 1..available
};

/// Coefficients of k in the eigenbasis, accumulated on a fine uniform grid.
inline ModalTruncation modal_coefficients(const std::function<double(double)>& k, const EigenSystem& sys,
                                          std::size_t fine_points = (1u << 15) + 1) {
    ModalTruncation mt;
    const Grid fine(fine_points);
    const auto kv = sample(fine, k);
    mt.k_norm = quad::norm(kv, {}, fine.h());
    std::vector<double> prod(fine.size());
    mt.k_n.resize(sys.size());
    for (std::size_t n = 0; n < sys.size(); ++n) {
        for (std::size_t i = 0; i < fine.size(); ++i) prod[i] = kv[i] * sys.phi_at(static_cast<int>(n + 1), fine[i]);
        mt.k_n[n] = quad::simpson(prod, fine.h());
    }
    double s = mt.k_norm * mt.k_norm;
    for (double c : mt.k_n) {
        s -= c * c;
        mt.tail_by_N.push_back(std::sqrt(std::max(0.0, s)));
    }
    return mt;
}

/// Smallest N with 2 γ L̃ ‖k - g‖₂ < 1.
inline ModalTruncation modal_truncation(const std::function<double(double)>& k, const EigenSystem& sys, double gamma,
                                        double L_tilde) {
    require(gamma > 0 && L_tilde > 0, ErrorKind::InvalidArgument, "gamma and L_tilde must be positive");
    auto mt = modal_coefficients(k, sys);
    for (std::size_t n = 0; n < mt.tail_by_N.size(); ++n)
        if (2 * gamma * L_tilde * mt.tail_by_N[n] < 1) {
            mt.N = static_cast<int>(n + 1);
            mt.tail_norm = mt.tail_by_N[n];
            return mt;
        }
    throw Error(ErrorKind::RequestMoreModes, "truncation condition not met with " + std::to_string(sys.size()) +
                                                 " modes; compute more eigenpairs");
}

/// Samples of g(z) = Σ_{n<=N} k_n φ_n(z).
inline std::vector<double> truncated_gain(const ModalTruncation& mt, const EigenSystem& sys, const Grid& grid) {
    std::vector<double> g(grid.size(), 0.0);
    for (int n = 1; n <= mt.N; ++n)
        for (std::size_t i = 0; i < grid.size(); ++i) g[i] += mt.k_n[static_cast<std::size_t>(n - 1)] * sys.phi_at(n, grid[i]);
    return g;
}

struct BacksteppingBoundTerms {
    double gamma = 0.0, L_tilde = 1.0, sigma = 0.0;
    double bracket = 0.0;     // p ‖k‖ Σ |k_n φ_n'(1)| + Σ |k_n λ_n|
    double tail_norm = 0.0;   // ‖k - g‖₂

    double condition(double T) const {
        const double e = std::exp(sigma * T);
        return gamma * L_tilde * T * e * bracket + gamma * L_tilde * tail_norm * (e + 1.0);
    }
};

/// Largest T with condition(T) < 1.
inline double backstepping_T_bound(const BacksteppingBoundTerms& b) {
    require(b.condition(0.0) < 1.0, ErrorKind::InfeasibleTruncation,
            "2 gamma L_tilde ||k - g|| >= 1; increase the truncation order N");
    if (b.bracket == 0.0 && b.sigma == 0.0) return std::numeric_limits<double>::infinity();
    double hi = 1e-12;
    int guard = 0;
    while (b.condition(hi) < 1.0) {
        hi *= 2;
        if (++guard > 400) return std::numeric_limits<double>::infinity();
    }
    double lo = 0.0;
    while (hi - lo > 1e-13 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (b.condition(mid) < 1.0) lo = mid; else hi = mid;
    }
    return lo;
}

// ---------------------------------------------------------------------------

struct BacksteppingOptions {
    double c = -1.0;                  // < 0: max(0, -λ_1) + π² p / 2
    double sigma_frac = 0.5;          // σ = sigma_frac · μ_1
    TruncationPolicy policy = TruncationPolicy::Smallest;
    int grid_size = 401;
    int available_modes = 2048;
};

struct BacksteppingController {
    double p = 1.0, q = 0.0, c = 0.0;
    Grid grid;
    std::vector<double> kernel_k;     // k(s) on the grid
    TriangularSurface K_surface, L_surface;
    TransformNorms norms;
    TargetIss target;
    ModalTruncation truncation;
    std::vector<double> g_trunc;      // g(z) on the grid
    std::vector<double> lambdas;      // λ_n of the plant operator, available modes
    std::vector<double> dphi1;        // φ_n'(1)
    BacksteppingBoundTerms bound;
    double T_star = 0.0;
    TruncationPolicy policy = TruncationPolicy::Smallest;
    int N_min = 0;
    std::shared_ptr<const EigenSystem> basis;  // plant eigenbasis used for the truncation

    double kernel(double s) const { return kernel_value(p, q, c, 1.0, s); }
};

inline double default_c(double p, double q) {
    const double lambda1 = kPi * kPi * p - q;
    return std::max(0.0, -lambda1) + kPi * kPi * p / 2;
}

namespace detail {

inline BacksteppingBoundTerms bound_terms_at(const BacksteppingController& b, int N) {
    BacksteppingBoundTerms t;
    t.gamma = b.target.gamma;
    t.L_tilde = b.norms.L_tilde;
    t.sigma = b.target.sigma;
    double s1 = 0, s2 = 0;
    for (int n = 0; n < N; ++n) {
        const auto i = static_cast<std::size_t>(n);
        s1 += std::abs(b.truncation.k_n[i] * b.dphi1[i]);
        s2 += std::abs(b.truncation.k_n[i] * b.lambdas[i]);
    }
    t.bracket = b.p * b.truncation.k_norm * s1 + s2;
    t.tail_norm = b.truncation.tail_by_N[static_cast<std::size_t>(N - 1)];
    return t;
}

}  // namespace detail

/// Plant x_t = p x_zz + q x, Dirichlet at both ends.
inline BacksteppingController design_backstepping(double p, double q, const BacksteppingOptions& opt = {}) {
    BacksteppingController b;
    b.p = p;
    b.q = q;
    b.c = opt.c < 0 ? default_c(p, q) : opt.c;
    require_kernel_domain(p, q, b.c);
    b.grid = Grid(static_cast<std::size_t>(opt.grid_size));
    b.policy = opt.policy;
    b.kernel_k = sample(b.grid, [&](double s) { return kernel_value(p, q, b.c, 1.0, s); });
    b.K_surface = kernel_surface(p, q, b.c, b.grid);
    b.L_surface = inverse_kernel(b.K_surface);
    b.norms = transform_norms(b.K_surface, b.L_surface);
    b.target = target_iss_gain(p, b.c, 1.0, 0.0, -1.0, 256);
    if (opt.sigma_frac != 0.5) b.target = target_iss_gain(p, b.c, 1.0, 0.0, opt.sigma_frac * b.target.mu1, 256);

    b.basis = std::make_shared<const EigenSystem>(analytic_eigensystem(p, q, opt.available_modes, 3));
    const double c = b.c;
    b.truncation = modal_truncation([p, q, c](double s) { return kernel_value(p, q, c, 1.0, s); }, *b.basis,
                                    b.target.gamma, b.norms.L_tilde);
    b.N_min = b.truncation.N;
    for (const auto& e : b.basis->pairs) {
        b.lambdas.push_back(e.lambda);
        b.dphi1.push_back(e.dphi1);
    }
    int best_N = b.N_min;
    double best_T = backstepping_T_bound(detail::bound_terms_at(b, best_N));
    if (opt.policy == TruncationPolicy::MaxT) {
        for (int N = b.N_min + 1; N <= static_cast<int>(b.basis->size()); ++N) {
            const auto terms = detail::bound_terms_at(b, N);
            if (terms.condition(0.0) >= 1.0) continue;
            const double T = backstepping_T_bound(terms);
            if (T > best_T) { best_T = T; best_N = N; }
        }
    }
    b.truncation.N = best_N;
    b.truncation.tail_norm = b.truncation.tail_by_N[static_cast<std::size_t>(best_N - 1)];
    b.bound = detail::bound_terms_at(b, best_N);
    b.T_star = best_T;
    b.g_trunc = truncated_gain(b.truncation, *b.basis, b.grid);
    return b;
}

/// Sampled feedback u = ∫ k x for a simulation eigensystem; the w diagnostic uses g.
inline ControllerSpec backstepping_controller_spec(const BacksteppingController& b, const EigenSystem& sys,
                                                   const BoundaryLift& lift) {
    const double p = b.p, q = b.q, c = b.c;
    auto spec = linear_feedback("backstepping", [p, q, c](double s) { return kernel_value(p, q, c, 1.0, s); }, sys, lift);
    const std::size_t n_sim = sys.size();
    const auto N = static_cast<std::size_t>(b.truncation.N);
    spec.g_modal.assign(b.truncation.k_n.begin(), b.truncation.k_n.begin() + static_cast<std::ptrdiff_t>(std::min(N, n_sim)));
    // Modes beyond the simulated range sit in the lifted tail with coefficients b h_n.
    double gb = 0;
    for (std::size_t n = n_sim; n < N; ++n) {
        const auto& e = b.basis->pairs[n];
        const double gn = input_gain(e, b.basis->problem);
        gb += b.truncation.k_n[n] * gn / (e.lambda + lift.w);
    }
    spec.g_boundary = gb;
    return spec;
}

/// ‖y‖₂ of the transformed lifted state, for the ISS check.
inline std::function<double(const ModalState&)> transformed_norm(const BacksteppingController& b,
                                                                 const EigenSystem& sys, const BoundaryLift& lift) {
    require(sys.grid == b.grid, ErrorKind::InvalidArgument, "simulation grid must match the kernel grid");
    auto K = std::make_shared<const TriangularSurface>(b.K_surface);
    auto es = std::make_shared<const EigenSystem>(sys);
    auto lf = std::make_shared<const BoundaryLift>(lift);
    return [K, es, lf](const ModalState& st) {
        const auto y = volterra_apply(reconstruct(st, *es, *lf), *K, VolterraDirection::Forward);
        return quad::norm(y, {}, es->grid.h());
    };
}

}  // namespace sdbc
