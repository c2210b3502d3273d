#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdbc/modal_sim.hpp"

using namespace sdbc;

namespace {

EigenSystem single_mode(double lambda) {
    EigenSystem sys;
    sys.pairs.resize(1);
    sys.pairs[0].n = 1;
    sys.pairs[0].lambda = lambda;
    return sys;
}

double rk4_scalar(double lambda, double g, double u, double x, double dt, int steps) {
    auto f = [&](double y) { return -lambda * y + g * u; };
    const double h = dt / steps;
    for (int i = 0; i < steps; ++i) {
        const double k1 = f(x), k2 = f(x + 0.5 * h * k1), k3 = f(x + 0.5 * h * k2), k4 = f(x + h * k3);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

}  // namespace

TEST(ZohStep, MatchesRungeKuttaOnRandomCases) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> L(-10, 10), G(-5, 5), U(-5, 5), D(0, 1), X(-1, 1);
    for (int c = 0; c < 200; ++c) {
        const double lam = L(rng), g = G(rng), u = U(rng), x = X(rng);
        double dt = D(rng);
        if (dt == 0) dt = 0.5;
        const auto sys = single_mode(lam);
        const auto out = zoh_step({0.0, {x}, 0.0}, u, dt, sys, {g});
        const double ref = rk4_scalar(lam, g, u, x, dt, 4000);
        EXPECT_NEAR(out.coeffs[0], ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST(ZohStep, SemigroupSplit) {
    const auto sys = single_mode(-3.7);
    const ModalState s0{0.0, {0.4}, 0.0};
    const auto whole = zoh_step(s0, 1.3, 0.7, sys, {2.1});
    const auto split = zoh_step(zoh_step(s0, 1.3, 0.25, sys, {2.1}), 1.3, 0.45, sys, {2.1});
    EXPECT_NEAR(whole.coeffs[0], split.coeffs[0], 1e-12 * std::abs(whole.coeffs[0]));
    EXPECT_DOUBLE_EQ(whole.t, 0.7);
    EXPECT_EQ(whole.boundary, 1.3);
}

TEST(ZohStep, ZeroEigenvalueIsLinearRamp) {
    const auto out = zoh_step({0.0, {1.0}, 0.0}, 2.0, 0.5, single_mode(0.0), {3.0});
    EXPECT_DOUBLE_EQ(out.coeffs[0], 1.0 + 3.0 * 2.0 * 0.5);
}

TEST(ZohStep, RejectsNonPositiveStepAndOverflow) {
    EXPECT_THROW(zoh_step({0.0, {1.0}, 0.0}, 0.0, 0.0, single_mode(1.0), {1.0}), Error);
    EXPECT_THROW(zoh_step({0.0, {1.0}, 0.0}, 0.0, 1.0, single_mode(-800.0), {1.0}), Error);
}

TEST(Projection, RoundTripOfEigenfunctionCombination) {
    const auto sys = analytic_eigensystem(1.0, 0.0, 8, 401);
    std::vector<double> x(sys.grid.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3 * sys[1].phi[i] - 0.5 * sys[4].phi[i];
    const auto st = project_initial(x, sys);
    EXPECT_NEAR(st.coeffs[1], 3.0, 1e-10);
    EXPECT_NEAR(st.coeffs[4], -0.5, 1e-10);
    EXPECT_NEAR(st.coeffs[0], 0.0, 1e-10);
    const auto back = reconstruct(st, sys);
    for (std::size_t i = 0; i < x.size(); i += 37) EXPECT_NEAR(back[i], x[i], 1e-9);
    EXPECT_THROW(project_initial(std::vector<double>(10, 0.0), sys), Error);
}

TEST(BoundaryLift, MatchesClosedForm) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 64, 401);
    const auto lift = make_boundary_lift(sys, input_gains(sys));
    EXPECT_NEAR(lift.w, 1.0 - sys[0].lambda, 1e-14);
    const double beta = std::sqrt(15.0 - lift.w);  // h'' + (15 - w) h = 0
    for (std::size_t i = 0; i < sys.grid.size(); i += 40)
        EXPECT_NEAR(lift.h[i], std::sin(beta * sys.grid[i]) / std::sin(beta), 1e-9);
    // Σ h_n² + tail = ‖h‖²; the tail of a Dirichlet lift decays like 1/N.
    EXPECT_GT(lift.tail_sq, 0.0);
    EXPECT_LT(lift.tail_sq, 0.01);
    ModalState st{0.0, lift.h_n, 1.0};
    const auto x = reconstruct(st, sys, lift);
    for (std::size_t i = 0; i < x.size(); i += 40) EXPECT_NEAR(x[i], lift.h[i], 1e-12);
}

TEST(Schedule, PeriodicPrefix) {
    const auto s = make_schedule(ScheduleKind::Periodic, 0.1, 0);
    const auto p = s.prefix(4);
    EXPECT_EQ(p[0], 0.0);
    EXPECT_DOUBLE_EQ(p[3], 0.30000000000000004);
}

TEST(Schedule, JitteredGapsStayInRangeAndRepeat) {
    const auto s = make_schedule(ScheduleKind::Jittered, 0.2, 42);
    const auto a = s.prefix(2000), b = s.prefix(2000);
    EXPECT_EQ(a, b);
    double lo = 1, hi = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
        const double g = a[i] - a[i - 1];
        lo = std::min(lo, g);
        hi = std::max(hi, g);
        ASSERT_GE(g, 0.25 * 0.2 * (1 - 1e-12));
        ASSERT_LE(g, 0.2 * (1 + 1e-12));
    }
    EXPECT_LT(lo, 0.06);
    EXPECT_GT(hi, 0.19);
    EXPECT_NE(make_schedule(ScheduleKind::Jittered, 0.2, 43).prefix(5), s.prefix(5));
}

TEST(Schedule, ExplicitValidation) {
    EXPECT_NO_THROW(make_schedule(ScheduleKind::Explicit, 0.5, 0, {0.0, 0.3, 0.8}));
    EXPECT_THROW(make_schedule(ScheduleKind::Explicit, 0.5, 0, {0.1, 0.3}), Error);
    EXPECT_THROW(make_schedule(ScheduleKind::Explicit, 0.5, 0, {0.0, 0.3, 0.3}), Error);
    EXPECT_THROW(make_schedule(ScheduleKind::Explicit, 0.5, 0, {0.0, 0.9}), Error);
    EXPECT_THROW(make_schedule(ScheduleKind::Periodic, 0.0, 0), Error);
    EXPECT_EQ(parse_schedule_kind("jittered"), ScheduleKind::Jittered);
    EXPECT_THROW(parse_schedule_kind("poisson"), Error);
}

TEST(Simulate, OpenLoopModeDecay) {
    const auto sys = analytic_eigensystem(1.0, 0.0, 16, 201);
    const auto gains = input_gains(sys);
    const auto lift = make_boundary_lift(sys, gains);
    const auto tr = simulate_closed_loop(sys, gains, lift, ControllerSpec::none(),
                                         make_schedule(ScheduleKind::Periodic, 0.03, 0), sys[0].phi, 0.5, 0.05);
    ASSERT_EQ(tr.rows.size(), 11u);
    for (const auto& r : tr.rows) EXPECT_NEAR(r.norm_r, std::exp(-kPi * kPi * r.t), 1e-9);
}

TEST(Simulate, ZeroHorizonGivesSingleRow) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 8, 101);
    const auto gains = input_gains(sys);
    const auto lift = make_boundary_lift(sys, gains);
    const auto tr = simulate_closed_loop(sys, gains, lift, ControllerSpec::none(),
                                         make_schedule(ScheduleKind::Periodic, 0.1, 0), sys[0].phi, 0.0, 0.01);
    ASSERT_EQ(tr.rows.size(), 1u);
    EXPECT_EQ(tr.rows[0].t, 0.0);
}

TEST(Simulate, SnapshotOffGridIsRejected) {
    const auto sys = analytic_eigensystem(1.0, 0.0, 4, 101);
    const auto gains = input_gains(sys);
    const auto lift = make_boundary_lift(sys, gains);
    SimOptions o;
    o.snapshot_times = {0.015};
    EXPECT_THROW(simulate_closed_loop(sys, gains, lift, ControllerSpec::none(),
                                      make_schedule(ScheduleKind::Periodic, 0.1, 0), sys[0].phi, 1.0, 0.01, o),
                 Error);
}

TEST(Simulate, DivergenceStopsRun) {
    const auto sys = analytic_eigensystem(1.0, 15.0, 8, 101);
    const auto gains = input_gains(sys);
    const auto lift = make_boundary_lift(sys, gains);
    SimOptions o;
    o.divergence_cap = 10.0;
    const auto tr = simulate_closed_loop(sys, gains, lift, ControllerSpec::none(),
                                         make_schedule(ScheduleKind::Periodic, 0.1, 0), sys[0].phi, 5.0, 0.1, o);
    EXPECT_TRUE(tr.diverged);
    EXPECT_LT(tr.rows.back().t, 5.0);
}

TEST(Simulate, HeldFeedbackMatchesHandIntegration) {
    // u = κ x1 with κ = φ1: a one-mode feedback whose modal image is f_1 = 1.
    const auto sys = analytic_eigensystem(1.0, 15.0, 32, 401);
    const auto gains = input_gains(sys);
    const auto lift = make_boundary_lift(sys, gains);
    ControllerSpec c;
    c.id = "mode1";
    c.f.assign(sys.size(), 0.0);
    c.f[0] = -2.0;
    SimOptions o;
    o.record_coeffs = true;
    const double T = 0.07;
    const auto tr = simulate_closed_loop(sys, gains, lift, c, make_schedule(ScheduleKind::Periodic, T, 0), sys[0].phi,
                                         0.7, 0.01, o);
    double x = 1.0;
    const double lam = sys[0].lambda, g = gains[0];
    for (int i = 0; i < 10; ++i) {
        const double u = -2.0 * x;
        x = std::exp(-lam * T) * x + g * u * (1 - std::exp(-lam * T)) / lam;
    }
    EXPECT_NEAR(tr.coeffs.back()[0], x, 1e-12 * std::abs(x));
}
