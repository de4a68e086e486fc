#include <gtest/gtest.h>

#include <arrival/config.hpp>
#include <arrival/robin.hpp>

#include "oracles.hpp"

using namespace arrival;

using oracle::reflect;

double analytic(double k, double kappa) { return oracle::plane_wave_reflection(k, kappa); }

TEST(Kappa0, Values) {
    EXPECT_DOUBLE_EQ(kappa0(1.0, 0.0, 9.81, 1.0), 0.0);
    EXPECT_NEAR(kappa0(1.0, 4.0, 9.81, 1.0), 2.0 * kappa0(1.0, 1.0, 9.81, 1.0), 1e-12);
    // helium-4 over 40 um: m sqrt(2 g d) / hbar = 1.77e6 1/m
    const double m = 4.002603254 * 1.66053906660e-27;
    const double k_si = m * std::sqrt(2.0 * 9.81 * 40e-6) / 1.054571817e-34;
    EXPECT_NEAR(k_si, 1.77e6, 0.01e6);
    const auto c = to_internal_units(preset("fig5"));
    EXPECT_NEAR(kappa0(c.mass, 40.0, c.g, c.hbar), k_si * 1e-6, 1e-9);
}

TEST(Robin, ReflectionMatchesAnalytic) {
    for (double ratio : {1.0 / 3.0, 3.0}) {
        const auto r = reflect(ratio, 1.0);
        EXPECT_NEAR(r.measured, analytic(ratio, 1.0), 0.05 * analytic(ratio, 1.0)) << ratio;
        EXPECT_LT(r.conservation, 1e-9);
    }
}

TEST(Robin, MatchedWavenumberIsAbsorbed) {
    const auto r = reflect(1.0, 1.0);
    EXPECT_LT(r.measured, 1e-3);
    EXPECT_LT(r.conservation, 1e-9);
}

TEST(Robin, NormPlusAbsorbedConservedUnderGravity) {
    const auto ic = to_internal_units(preset("fig5"));
    RobinSolverConfig c;
    c.kappa = kappa0(ic.mass, 40.0, ic.g, ic.hbar);
    c.y_boundary = -40.0;
    c.y_far = 250.0;
    c.n_grid = 4096;
    c.dt = 5e-4;
    c.mass = ic.mass;
    c.hbar = ic.hbar;
    c.g = ic.g;
    const GaussianParams g{1.0, 10.0, 0.0, -ic.g, ic.mass};
    auto s = initial_grid(c, [&](double y) { return gaussian_t(g, y, 0.0, ic.hbar); });
    const double n0 = s.norm(c.dy());
    EXPECT_NEAR(n0, 1.0, 1e-9);
    const RobinPropagator p(c);
    double last = n0;
    for (int i = 0; i < 12000; ++i) {
        p.step(s);
        const double n = s.norm(c.dy());
        ASSERT_LE(n, last + 1e-14);
        last = n;
    }
    EXPECT_LT(std::abs(s.norm(c.dy()) + s.absorbed - n0), 1e-6 * s.t);
    EXPECT_GT(s.absorbed, 0.5);
}

TEST(Robin, FreeFallOfCentreWithoutBoundaryContact) {
    // far from the boundary the grid reproduces the analytic packet
    const double hbar = 1.0, m = 1.0, a = -0.5;
    RobinSolverConfig c;
    c.kappa = 1.0;
    c.y_boundary = -30.0;
    c.y_far = 30.0;
    c.n_grid = 6001;
    c.dt = 1e-3;
    c.g = -a;
    const GaussianParams g{1.0, 5.0, 0.3, a, m};
    auto s = initial_grid(c, [&](double y) { return gaussian_t(g, y, 0.0, hbar); });
    const RobinPropagator p(c);
    for (int i = 0; i < 2000; ++i) p.step(s);
    double err = 0.0;
    for (int j = 0; j < c.n_grid; j += 7) err = std::max(err, std::abs(s.psi[j] - gaussian_t(g, c.y(j), s.t, hbar)));
    EXPECT_LT(err, 1e-4);
}

TEST(Robin, ZeroStaysZero) {
    RobinSolverConfig c;
    c.n_grid = 512;
    RobinGridState s;
    s.psi.assign(c.n_grid, cplx{0.0, 0.0});
    const RobinPropagator p(c);
    for (int i = 0; i < 100; ++i) p.step(s);
    for (const auto& v : s.psi) EXPECT_EQ(v, cplx(0.0, 0.0));
    EXPECT_EQ(s.absorbed, 0.0);
}

TEST(Robin, InvalidConfigRejected) {
    RobinSolverConfig c;
    c.kappa = 0.0;
    EXPECT_THROW(RobinPropagator{c}, std::invalid_argument);
    c = {};
    c.n_grid = 100;
    EXPECT_THROW(RobinPropagator{c}, std::invalid_argument);
    c = {};
    c.y_far = -1.0;
    EXPECT_THROW(RobinPropagator{c}, std::invalid_argument);
}

TEST(Robin, StencilInterpolatesPolynomialsExactly) {
    std::vector<double> f(50);
    const double y0 = -1.0, dy = 0.1;
    auto p = [](double y) { return 1.0 + y - 2 * y * y + 0.5 * y * y * y * y * y; };
    auto dp = [](double y) { return 1.0 - 4 * y + 2.5 * y * y * y * y; };
    for (int j = 0; j < 50; ++j) f[j] = p(y0 + j * dy);
    for (double y : {-1.0, -0.93, 0.31, 3.85}) {
        const GridStencil st(y, y0, dy, 50);
        cplx v, d;
        st.apply(f, v, d);
        EXPECT_NEAR(v.real(), p(y), 1e-10);
        EXPECT_NEAR(d.real(), dp(y), 1e-8);
    }
}
