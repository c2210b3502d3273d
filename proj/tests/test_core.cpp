#include <gtest/gtest.h>

#include <cmath>

#include "sdbc/core.hpp"

using namespace sdbc;

TEST(Grid, NodesAndSpacing) {
    const Grid g(5);
    EXPECT_EQ(g.size(), 5u);
    EXPECT_EQ(g.intervals(), 4u);
    EXPECT_DOUBLE_EQ(g.h(), 0.25);
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[4], 1.0);
    EXPECT_DOUBLE_EQ(g[2], 0.5);
}

TEST(Quadrature, SimpsonIsExactForCubics) {
    const Grid g(11);
    const auto f = sample(g, [](double z) { return 4 * z * z * z - 3 * z * z + z + 2; });
    EXPECT_NEAR(quad::simpson(f, g.h()), 1.0 - 1.0 + 0.5 + 2.0, 1e-14);
}

TEST(Quadrature, OddIntervalCountUsesThreeEighthsTail) {
    const Grid g(8);  // 7 intervals
    const auto f = sample(g, [](double z) { return z * z * z; });
    EXPECT_NEAR(quad::simpson(f, g.h()), 0.25, 1e-14);
}

TEST(Quadrature, WeightedNorm) {
    const Grid g(401);
    const auto f = sample(g, [](double z) { return std::sqrt(2.0) * std::sin(kPi * z); });
    const auto w = sample(g, [](double) { return 4.0; });
    EXPECT_NEAR(quad::norm(f, w, g.h()), 2.0, 1e-10);
    EXPECT_NEAR(quad::norm(f, {}, g.h()), 1.0, 1e-10);
}

TEST(CubicSpline, ReproducesLinearData) {
    CubicSpline s({0.0, 0.3, 0.5, 1.0}, {1.0, 1.6, 2.0, 3.0});
    EXPECT_NEAR(s(0.7), 2.4, 1e-14);
    EXPECT_NEAR(s.derivative(0.1), 2.0, 1e-13);
}

TEST(CubicSpline, ResampleSmoothProfile) {
    const Grid a(201), b(57);
    const auto v = sample(a, [](double z) { return std::sin(3 * z); });
    const auto r = resample(v, b);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(r[i], std::sin(3 * b[i]), 1e-7);
}

TEST(Bisect, FindsRoot) {
    EXPECT_NEAR(bisect([](double x) { return x * x - 2; }, 0.0, 2.0, 1e-14), std::sqrt(2.0), 1e-13);
}

TEST(Expm1Neg, MatchesStdExpm1) {
    for (double x : {-3.0, -1e-9, 0.0, 1e-12, 0.5, 40.0})
        EXPECT_NEAR(expm1_neg(x), std::expm1(-x), 1e-15 * std::max(1.0, std::abs(std::expm1(-x))));
}

TEST(Error, CarriesKind) {
    try {
        require(false, ErrorKind::BracketError, "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BracketError);
    }
}
