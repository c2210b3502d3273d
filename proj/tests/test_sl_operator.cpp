#include <gtest/gtest.h>

#include <cmath>

#include "sdbc/sl_operator.hpp"

using namespace sdbc;

namespace {

// Roots of the transcendental boundary equations, computed to 20 digits with mpmath.
constexpr double kRobinTanMinus[] = {4.1158583656945228373, 24.139342030445556788, 63.659106550438686634};
constexpr double kNeumannRobinShift2[] = {3.1596575823950746935, 15.275800318470403033, 45.274474699072618013};

}  // namespace

TEST(AnalyticEigensystem, HeatEquationFirstMode) {
    const auto sys = analytic_eigensystem(1.0, 0.0, 1, 401);
    EXPECT_NEAR(sys[0].lambda, kPi * kPi, 1e-12);
    EXPECT_NEAR(sys[0].phi[200], std::sqrt(2.0), 1e-14);
}

TEST(AnalyticEigensystem, ReactionCancelsFirstEigenvalue) {
    EXPECT_NEAR(analytic_eigensystem(1.0, kPi * kPi, 1, 11)[0].lambda, 0.0, 1e-14);
}

TEST(AnalyticEigensystem, UnstableExample) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 3, 401);
    EXPECT_NEAR(sys[0].lambda, -5.1303955989106, 1e-12);
    EXPECT_NEAR(sys[1].dphi1, std::sqrt(2.0) * 2 * kPi, 1e-12);
    EXPECT_NEAR(sys[0].dphi1, -std::sqrt(2.0) * kPi, 1e-12);
}

TEST(AnalyticEigensystem, RejectsBadSizes) {
    EXPECT_THROW(analytic_eigensystem(1.0, 0.0, 1, 1), Error);
    EXPECT_THROW(analytic_eigensystem(1.0, 0.0, 0, 11), Error);
}

TEST(ShootEigensystem, MatchesClosedFormDirichlet) {
    const auto ref = analytic_eigensystem(1.0, 15.0, 20, 401);
    auto pr = SLProblem::dirichlet_constant(1.0, 15.0);
    pr.q = Coefficient::tabulated({0.0, 0.5, 1.0}, {-15.0, -15.0, -15.0});  // forces the general path
    const auto sys = shoot_eigensystem(pr, 20, 401, 1e-10);
    for (int n = 0; n < 20; ++n) EXPECT_LT(std::abs(sys[n].lambda - ref[n].lambda), 1e-8) << "n = " << n + 1;
    const auto rep = validate_eigensystem(sys, 10);
    EXPECT_LT(rep.gram_max_deviation, 1e-8);
    EXPECT_TRUE(rep.strictly_increasing);
}

TEST(ShootEigensystem, RobinRightEnd) {
    SLProblem pr;
    pr.a1 = 1.0;
    pr.a2 = 1.0;
    const auto sys = shoot_eigensystem(pr, 3, 401, 1e-10);
    for (int n = 0; n < 3; ++n) EXPECT_NEAR(sys[n].lambda, kRobinTanMinus[n], 1e-8);
    for (const auto& e : sys.pairs) EXPECT_NEAR(e.phi1 + e.dphi1, 0.0, 1e-8);
}

TEST(ShootEigensystem, NeumannLeftRobinRightWithPotential) {
    SLProblem pr;
    pr.q = Coefficient::constant(2.0);
    pr.b1 = 0.0;
    pr.b2 = 1.0;
    pr.a1 = 1.0;
    pr.a2 = 0.5;
    const auto sys = shoot_eigensystem(pr, 3, 401, 1e-10);
    for (int n = 0; n < 3; ++n) EXPECT_NEAR(sys[n].lambda, kNeumannRobinShift2[n], 1e-8);
    EXPECT_NEAR(sys[0].dphi0, 0.0, 1e-8);
    EXPECT_LT(validate_eigensystem(sys, 2).gram_max_deviation, 1e-8);
}

TEST(ShootEigensystem, VariableCoefficientsAreSelfConsistent) {
    SLProblem pr;
    std::vector<double> z, p, r;
    for (int i = 0; i <= 20; ++i) {
        z.push_back(i / 20.0);
        p.push_back(1.0 + 0.5 * z.back());
        r.push_back(1.0 + z.back() * z.back());
    }
    pr.p = Coefficient::tabulated(z, p);
    pr.r = Coefficient::tabulated(z, r);
    const auto sys = shoot_eigensystem(pr, 6, 801, 1e-10);
    const auto rep = validate_eigensystem(sys, 3);
    EXPECT_LT(rep.gram_max_deviation, 1e-7);
    EXPECT_LT(rep.boundary_residual, 1e-8);
    // Second-order FD residual of an exact eigenfunction: O(h² λ² |φ|).
    for (const auto& e : sys.pairs) EXPECT_LT(ode_residual(e, pr, sys.grid), 1e-4 * (1 + e.lambda * e.lambda));
}

TEST(ShootEigensystem, RejectsNonPositiveCoefficient) {
    SLProblem pr;
    pr.p = Coefficient::constant(-1.0);
    EXPECT_THROW(shoot_eigensystem(pr, 2, 101, 1e-10), Error);
}

TEST(ValidateEigensystem, TailDecaysLikeInverseSquare) {
    const auto rep = validate_eigensystem(analytic_eigensystem(1.0, 15.0, 64, 401), 32);
    EXPECT_NEAR(rep.tail_exponent, -2.0, 0.01);
    EXPECT_EQ(rep.tail_start, 32);
}

TEST(ValidateEigensystem, NoPositiveEigenvalue) {
    try {
        validate_eigensystem(analytic_eigensystem(1.0, 1000.0, 3, 101), 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolation);
    }
}

TEST(BoundaryLifting, SatisfiesConditions) {
    for (auto [a1, a2] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {2.0, -0.7}, {0.3, 5.0}}) {
        const auto h = boundary_lifting(a1, a2);
        EXPECT_EQ(h(0.0), 0.0);
        EXPECT_EQ(h.derivative(0.0), 0.0);
        EXPECT_NEAR(a1 * h(1.0) + a2 * h.derivative(1.0), 1.0, 1e-15);
    }
    EXPECT_THROW(boundary_lifting(0.0, 0.0), Error);
}

TEST(InputGain, DirichletClosedForm) {
    const auto sys = analytic_eigensystem(2.0, 0.0, 3, 11);
    const auto g = input_gains(sys);
    for (int n = 1; n <= 3; ++n) EXPECT_NEAR(g[n - 1], 2.0 * std::sqrt(2.0) * n * kPi * (n % 2 ? 1 : -1), 1e-12);
}

TEST(ShiftedBvp, LinearProfile) {
    SLProblem pr;
    const Grid g(201);
    const auto s = solve_shifted_bvp(pr, 0.0, 1.0, g);
    for (std::size_t i = 0; i < g.size(); i += 20) EXPECT_NEAR(s.x[i], g[i], 1e-10);
    EXPECT_NEAR(s.weighted_l2_sq, 1.0 / 3.0, 1e-10);
}

TEST(ShiftedBvp, HyperbolicProfile) {
    SLProblem pr;
    const Grid g(401);
    const auto s = solve_shifted_bvp(pr, 4.0, 1.0, g);  // x'' = 4x
    for (std::size_t i = 0; i < g.size(); i += 40) EXPECT_NEAR(s.x[i], std::sinh(2 * g[i]) / std::sinh(2.0), 1e-9);
    EXPECT_NEAR(s.dx1, 2.0 / std::tanh(2.0), 1e-9);
}

TEST(ShiftedBvp, SingularAtEigenvalue) {
    SLProblem pr;
    try {
        solve_shifted_bvp(pr, -kPi * kPi, 1.0, Grid(101));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NumericFailure);
    }
}
