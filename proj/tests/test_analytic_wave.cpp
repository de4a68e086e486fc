#include <gtest/gtest.h>

#include <random>

#include <arrival/config.hpp>
#include <arrival/dynamics.hpp>
#include <arrival/sampler.hpp>
#include <arrival/wave.hpp>

#include "oracles.hpp"

using namespace arrival;

using namespace oracle;

TEST(Gaussian, SchroedingerResidualWithForce) { EXPECT_LT(worst_schroedinger_residual(100, 7), 1e-6); }

TEST(Gaussian, ResidualDetectsMissingPhase) {
    // dropping the e^{i m a l t / hbar} factor breaks the equation when l != 0
    const double hbar = 1.0;
    GaussianParams p{1.0, 3.0, 0.5, -2.0, 1.0};
    auto bad = [&](double x, double t) {
        return log_gaussian_t(p, x, t, hbar) - cplx{0.0, p.m * p.a * p.l * t / hbar};
    };
    const double x = 3.2, t = 0.7, h = 1e-4;
    const cplx l0 = bad(x, t);
    const cplx dt = (std::exp(bad(x, t + h) - l0) - std::exp(bad(x, t - h) - l0)) / (2 * h);
    const cplx dxx = (std::exp(bad(x + h, t) - l0) - 2.0 + std::exp(bad(x - h, t) - l0)) / (h * h);
    const cplx r = cplx{0, hbar} * dt + 0.5 * dxx + p.m * p.a * x;
    EXPECT_NEAR(std::abs(r), std::abs(p.m * p.a * p.l), 1e-4);
}

TEST(Gaussian, WidthDoublesAreaAtSpreadingTime) {
    // helium, sigma = 1 um: |s_t| = sqrt(2) sigma at t = 2 m sigma^2 / hbar = 126.05 us
    const double m = 4.002603254 * 1.66053906660e-27, hbar = 1.054571817e-34;
    const double t_si = 2.0 * m * 1e-12 / hbar;
    EXPECT_NEAR(t_si, 126.05e-6, 0.01e-6);
    const auto c = to_internal_units(preset("fig5"));
    const GaussianParams p{1.0, 0.0, 0.0, -c.g, c.mass};
    EXPECT_NEAR(at_time(p, t_si * 1e3, c.hbar).width, std::sqrt(2.0), 1e-9);
}

TEST(Gaussian, UnitNormAndClassicalCentre) {
    const double hbar = 1.0;
    const GaussianParams p{0.7, 1.5, 2.0, -3.0, 2.0};
    for (double t : {0.0, 0.4, 1.3}) {
        EXPECT_NEAR(numeric_overlap(p, p, t, hbar).real(), 1.0, 1e-10);
        EXPECT_DOUBLE_EQ(at_time(p, t, hbar).centre, 1.5 + 2.0 * t - 1.5 * t * t);
    }
}

TEST(Gaussian, OverlapsMatchQuadratureAndParseval) {
    const double hbar = 1.0;
    const GaussianParams a{0.7, 1.0, 0.5, -1.0, 1.0}, b{1.1, -0.5, -0.3, -1.0, 1.0};
    const cplx exact = std::exp(log_overlap(a, b, hbar));
    for (double t : {0.0, 0.8, 2.0}) EXPECT_LT(std::abs(numeric_overlap(a, b, t, hbar) - exact), 1e-9);
    EXPECT_LT(std::abs(std::exp(log_momentum_overlap(a, b, hbar)) - exact), 1e-12);
}

TEST(State, NormConservedOverFlight) { EXPECT_LT(worst_norm_defect({-1.0, 0.0, 0.5}, 3), 1e-4); }

TEST(State, TermCountAndExchangeSymmetry) {
    auto c = internal("fig2", 0.3);
    EXPECT_EQ(make_state(c).joint.terms().size(), 8u);
    c.eta = 1.0;
    EXPECT_EQ(make_state(c).joint.terms().size(), 4u);
    c.eta = 0.3;
    const auto s = make_state(c);
    const auto sp = slit_packets(source_params(c));
    for (double t : {0.0, 0.1, 1.0}) {
        const auto xp = at_time(sp.x_plus, t, c.hbar), xm = at_time(sp.x_minus, t, c.hbar);
        const auto yu = at_time(sp.y_up, t, c.hbar), yd = at_time(sp.y_down, t, c.hbar);
        const Vec2 a{xp.centre + 0.3, yu.centre - 0.5}, b{xm.centre - 0.2, yd.centre + 0.7};
        const cplx d = log_amplitude(s, a, b, t) - log_amplitude(s, b, a, t);
        EXPECT_NEAR(d.real(), 0.0, 1e-12);
        EXPECT_NEAR(std::remainder(d.imag(), 2 * std::numbers::pi), 0.0, 1e-9);
    }
}

TEST(State, VelocityMatchesFiniteDifferences) {
    const auto r = velocity_vs_finite_differences({-1.0, 0.0, 0.5, 1.0}, {0.0, 0.05, 2.0, 30.0, 120.0}, 50);
    EXPECT_EQ(r.points, 1000);
    EXPECT_LT(r.worst, 1e-7);
}

TEST(State, CollapseSelectsPartnerPackets) {
    const auto c = internal("fig2", 1.0);  // parallel: both up or both down
    const auto s = make_state(c);
    const double t = 1.0;
    const auto up = at_time(slit_packets(source_params(c)).y_up, t, c.hbar);
    const auto xp = at_time(slit_packets(source_params(c)).x_plus, t, c.hbar);
    const auto cs = collapse(s, 1, {xp.centre, up.centre}, t);
    ASSERT_TRUE(cs.collapsed.has_value());
    // the partner is on the opposite x side and in the upper y packet
    const auto& C = cs.conditional;
    const double upper = C.evaluate({-xp.centre, up.centre}, t).log_density();
    const double lower = C.evaluate({-xp.centre, up.centre - 2 * c.l_y}, t).log_density();
    const double same_side = C.evaluate({xp.centre, up.centre}, t).log_density();
    EXPECT_GT(upper - lower, 20.0);
    EXPECT_GT(upper - same_side, 20.0);
    EXPECT_NEAR(C.log_norm2(), 0.0, 1e-12);
    EXPECT_THROW(collapse(s, 1, {1e9, 1e9}, t), DegenerateCollapse);
    EXPECT_THROW(collapse(cs, 2, {0, 0}, t), std::logic_error);
}

TEST(State, MomentumDensityNormalised) {
    for (double eta : {-1.0, 0.0, 0.5}) EXPECT_NEAR(MomentumDensity(make_state(internal("fig2", eta))).total(), 1.0, 1e-12);
}
