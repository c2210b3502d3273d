#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "sdbc/reduced_design.hpp"

using namespace sdbc;

TEST(Controllability, VandermondeDeterminant) {
    const auto r = controllability_check({-3.0, 1.0, 4.0}, {1.0, 2.0, -1.0});
    EXPECT_TRUE(r.controllable);
    EXPECT_DOUBLE_EQ(r.determinant, 4.0 * 7.0 * 3.0);
    EXPECT_FALSE(controllability_check({2.0, 2.0}, {1.0, 1.0}).controllable);
    EXPECT_THROW(controllability_check({1.0, 2.0}, {1.0, 0.0}), Error);
}

TEST(PlacePoles, ScalarClosedForm) {
    const auto k = place_poles({-5.0}, {2.0}, std::vector<double>{-7.0});
    EXPECT_NEAR(k[0], (-5.0 + -7.0) / 2.0, 1e-14);
}

TEST(PlacePoles, ThreeModesReal) {
    const std::vector<double> lam{-40.0, -12.0, -1.5}, g{4.4, -8.9, 13.3}, poles{-2.0, -5.0, -9.0};
    const auto k = place_poles(lam, g, poles);
    Eigen::VectorXcd ev = closed_loop_matrix(lam, g, k).eigenvalues();
    std::vector<double> re;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        EXPECT_NEAR(ev(i).imag(), 0.0, 1e-8);
        re.push_back(ev(i).real());
    }
    std::sort(re.begin(), re.end());
    EXPECT_NEAR(re[0], -9.0, 1e-8);
    EXPECT_NEAR(re[1], -5.0, 1e-8);
    EXPECT_NEAR(re[2], -2.0, 1e-8);
}

TEST(PlacePoles, ComplexPair) {
    using C = std::complex<double>;
    const auto k = place_poles({-3.0, 2.0}, {1.0, -1.0}, std::vector<C>{C(-1, 2), C(-1, -2)});
    const Eigen::VectorXcd ev = closed_loop_matrix({-3.0, 2.0}, {1.0, -1.0}, k).eigenvalues();
    for (Eigen::Index i = 0; i < 2; ++i) {
        EXPECT_NEAR(ev(i).real(), -1.0, 1e-10);
        EXPECT_NEAR(std::abs(ev(i).imag()), 2.0, 1e-10);
    }
}

TEST(PlacePoles, InvalidPoleSets) {
    using C = std::complex<double>;
    EXPECT_THROW(place_poles({-1.0}, {1.0}, std::vector<double>{0.5}), Error);
    EXPECT_THROW(place_poles({-1.0, 1.0}, {1.0, 1.0}, std::vector<double>{-2.0, -2.0}), Error);
    EXPECT_THROW(place_poles({-1.0, 1.0}, {1.0, 1.0}, std::vector<C>{C(-1, 1), C(-2, 1)}), Error);
    EXPECT_THROW(place_poles({-1.0, -1.0}, {1.0, 1.0}, std::vector<double>{-1.0, -2.0}), Error);
}

TEST(SelectM, SmallestNonNegativeTail) {
    EXPECT_EQ(select_m(analytic_eigensystem(1.0, 15.0, 4, 11)), 1);
    EXPECT_EQ(select_m(analytic_eigensystem(1.0, 45.0, 4, 11)), 2);
    EXPECT_EQ(select_m(analytic_eigensystem(1.0, 0.0, 4, 11)), 0);
    try {
        select_m(analytic_eigensystem(1.0, 200.0, 3, 11));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RequestMoreModes);
    }
}

TEST(Envelope, NormalMatrixHasUnitOvershoot) {
    Eigen::MatrixXd W(2, 2);
    W << -1, 0, 0, -3;
    const auto e = envelope_constants(W);
    EXPECT_NEAR(e.G, 1.0, 1e-12);
    EXPECT_NEAR(e.mu, 1.0, 1e-12);
    EXPECT_NEAR(e.sigma + e.epsilon, 0.99, 1e-12);
}

TEST(Envelope, NonNormalMatrix) {
    Eigen::MatrixXd W(2, 2);
    W << -1, 10, 0, -2;
    // max_t ‖exp((W + 0.99 I) t)‖₂, scipy expm + bounded scalar maximization.
    EXPECT_NEAR(envelope_constants(W).G, 9.502540898152724, 1e-8);
    Eigen::MatrixXd U(1, 1);
    U << 0.5;
    EXPECT_THROW(envelope_constants(U), Error);
}

TEST(SamplingBound, ZeroGainIsUnbounded) {
    EXPECT_TRUE(std::isinf(max_sampling_period(1.0, 1.0, 1.0, {1.0}, {0.0}, 1.0, -1.0).T_star));
}

TEST(SamplingBound, ExampleDesign) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 64, 401);
    const auto c = design_reduced(sys);
    EXPECT_EQ(c.m, 1);
    EXPECT_NEAR(c.k[0], -2.3094894330199292746, 1e-12);
    EXPECT_NEAR(c.envelope.G, 1.0, 1e-15);
    EXPECT_NEAR(c.Gamma, 15.0 - kPi * kPi, 1e-12);
    // Root of G ε^{-1} |g| p_1(T) e^{σT} |k| Γ = 1 in 30-digit arithmetic.
    EXPECT_NEAR(c.bound.T_star, 0.039024663185648536301, 1e-11);
    EXPECT_NEAR(c.bound.condition(c.bound.T_star, c.lambdas[0], euclid(c.g), euclid(c.k)), 1.0, 1e-9);
}

TEST(SamplingBound, TwoUnstableModes) {
    const auto sys = analytic_eigensystem(1.0, 45.0, 32, 201);
    const auto c = design_reduced(sys);
    EXPECT_EQ(c.m, 2);
    EXPECT_GT(c.envelope.G, 1.0);
    EXPECT_GT(c.bound.T_star, 0.0);
    EXPECT_TRUE(std::isfinite(c.bound.T_star));
}

TEST(ExampleBound, ScalarCondition) {
    // Root of k(k + π² - q)T e^{(q + σ - π²)T} + σ = k + π² - q for q = 15, k = 10, σ = 1 (mpmath).
    EXPECT_NEAR(example_bound_T(1.0, 15.0, 10.0, 1.0), 0.0562779859975424895, 1e-12);
    EXPECT_THROW(example_bound_T(1.0, 5.0, 10.0, 1.0), Error);
    EXPECT_THROW(example_bound_T(1.0, 15.0, 5.0, 0.1), Error);
    EXPECT_THROW(example_bound_T(1.0, 15.0, 10.0, 5.0), Error);
}

TEST(Gamma, ScalarClosedForm) {
    EXPECT_DOUBLE_EQ(gamma_constant({2.0}, {-3.0}, {-1.0}), 5.0);
}

TEST(IssIdentity, SeriesConvergesToIntegralFromBelow) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 256, 401);
    const double w = 1.0 - sys[0].lambda;
    const auto rep = iss_identity_check(sys, w, 0.5 * sys[1].lambda, 1);
    EXPECT_LT(std::abs(rep.relative_gap), 0.005);
    EXPECT_GT(rep.relative_gap, 0.0);
    for (std::size_t i = 1; i < rep.partial_sums.size(); ++i) EXPECT_GE(rep.partial_sums[i], rep.partial_sums[i - 1]);
    EXPECT_LE(rep.K_partial, rep.K_bound);
    // ∫ (sin βz / sin β)², β² = 15 - w.
    const double b = std::sqrt(15.0 - w);
    EXPECT_NEAR(rep.integral, (0.5 - std::sin(2 * b) / (4 * b)) / (std::sin(b) * std::sin(b)), 1e-12);
}

TEST(IssIdentity, Preconditions) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 8, 101);
    EXPECT_THROW(iss_identity_check(sys, -sys[0].lambda - 1.0), Error);
    EXPECT_THROW(iss_identity_check(sys, 7.0, sys[1].lambda + 1.0, 1), Error);
}
