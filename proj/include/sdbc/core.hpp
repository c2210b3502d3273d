#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdbc {

inline constexpr double kPi = std::numbers::pi;

/// Failure categories surfaced by the library. The CLI maps these onto exit codes.
enum class ErrorKind {
    InvalidArgument,
    NumericFailure,
    PreconditionViolation,
    RequestMoreModes,
    InfeasibleTruncation,
    BracketError,
    DegenerateTrace,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::NumericFailure: return "numeric-failure";
        case ErrorKind::PreconditionViolation: return "precondition-violation";
        case ErrorKind::RequestMoreModes: return "request-more-modes";
        case ErrorKind::InfeasibleTruncation: return "infeasible-truncation";
        case ErrorKind::BracketError: return "bracket-error";
        case ErrorKind::DegenerateTrace: return "degenerate-trace";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) throw Error(kind, what);
}

/// Uniform grid on [0, 1] with `intervals` subintervals (intervals + 1 nodes).
class Grid {
public:
    Grid() = default;
    explicit Grid(std::size_t points) : points_(points) {
        require(points >= 2, ErrorKind::InvalidArgument, "grid needs at least 2 points");
    }

    std::size_t size() const noexcept { return points_; }
    std::size_t intervals() const noexcept { return points_ - 1; }
    double h() const noexcept { return 1.0 / static_cast<double>(points_ - 1); }
    double operator[](std::size_t i) const noexcept {
        return i + 1 == points_ ? 1.0 : static_cast<double>(i) * h();
    }
    std::vector<double> nodes() const {
        std::vector<double> z(points_);
        for (std::size_t i = 0; i < points_; ++i) z[i] = (*this)[i];
        return z;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t points_ = 0;
};

inline std::vector<double> sample(const Grid& grid, const std::function<double(double)>& f) {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = f(grid[i]);
    return out;
}

namespace quad {

/// Composite trapezoid rule on uniformly spaced samples.
inline double trapezoid(std::span<const double> f, double h) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

/// Composite Simpson on uniformly spaced samples. An odd number of intervals is
/// handled by closing the last three intervals with the 3/8 rule.
inline double simpson(std::span<const double> f, double h) {
    const std::size_t n = f.size() - 1;  // intervals
    if (f.size() < 2) return 0.0;
    if (n == 1) return 0.5 * h * (f[0] + f[1]);
    if (n == 2) return h / 3.0 * (f[0] + 4.0 * f[1] + f[2]);
    std::size_t even_end = (n % 2 == 0) ? n : n - 3;
    double s = f[0] + f[even_end];
    for (std::size_t i = 1; i < even_end; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
    double total = s * h / 3.0;
    if (even_end != n) {
        const std::size_t j = even_end;
        total += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
    }
    return total;
}

/// Weighted inner product  ∫ w f g dz  by Simpson; `w` may be empty (w ≡ 1).
inline double inner(std::span<const double> f, std::span<const double> g,
                    std::span<const double> w, double h) {
    std::vector<double> prod(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        prod[i] = f[i] * g[i] * (w.empty() ? 1.0 : w[i]);
    return simpson(prod, h);
}

inline double norm(std::span<const double> f, std::span<const double> w, double h) {
    return std::sqrt(std::max(0.0, inner(f, f, w, h)));
}

}  // namespace quad

/// Natural cubic spline through (x_i, y_i); x strictly increasing.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        require(n >= 2 && y_.size() == n, ErrorKind::InvalidArgument,
                "spline needs at least two (x, y) pairs of equal length");
        for (std::size_t i = 1; i < n; ++i)
            require(x_[i] > x_[i - 1], ErrorKind::InvalidArgument, "spline abscissae must increase");
        m_.assign(n, 0.0);
        if (n == 2) return;
        // Tridiagonal system for second derivatives, natural end conditions.
        std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            c[i] = h1 / 6.0;
            d[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        m_[n - 1] = d[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
    }

    double operator()(double t) const {
        const std::size_t n = x_.size();
        std::size_t i;
        if (t <= x_.front()) i = 0;
        else if (t >= x_.back()) i = n - 2;
        else i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
        return A * y_[i] + B * y_[i + 1] +
               ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double t) const {
        const std::size_t n = x_.size();
        std::size_t i;
        if (t <= x_.front()) i = 0;
        else if (t >= x_.back()) i = n - 2;
        else i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
        return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * A * A) * m_[i] + (3.0 * B * B - 1.0) * m_[i + 1]) * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_;
};

/// Resample uniformly spaced samples on [0,1] onto another uniform grid.
inline std::vector<double> resample(std::span<const double> values, const Grid& to) {
    const Grid from(values.size());
    if (from == to) return {values.begin(), values.end()};
    CubicSpline spline(from.nodes(), {values.begin(), values.end()});
    return sample(to, [&](double z) { return spline(z); });
}

/// Bisection for the root of an increasing-in-sign-change function on [lo, hi].
template <class F>
double bisect(F&& f, double lo, double hi, double tol, int max_iter = 400) {
    double flo = f(lo);
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// e^{-x} - 1 for x >= 0 small enough to be common in ZOH sub-steps. A short
/// Taylor series is exact to rounding below 1e-3 and vectorizes.
inline double expm1_neg(double x) {
    if (std::abs(x) < 1e-3) {
        const double y = -x;
        return y * (1.0 + y * (0.5 + y * (1.0 / 6.0 + y * (1.0 / 24.0 + y * (1.0 / 120.0 + y / 720.0)))));
    }
    return std::expm1(-x);
}

}  // namespace sdbc
