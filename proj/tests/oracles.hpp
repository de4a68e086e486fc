#pragma once

// Reference computations that do not go through the code under test:
// finite differences, direct quadrature, closed-form motion and a plane-wave
// reflection experiment on the Robin grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include <arrival/config.hpp>
#include <arrival/dynamics.hpp>
#include <arrival/robin.hpp>
#include <arrival/sampler.hpp>
#include <arrival/wave.hpp>

namespace oracle {

using namespace arrival;

inline InternalConfig internal(const std::string& name, double eta, std::size_t n = 1) {
    auto c = preset(name);
    c.eta = eta;
    c.n_events = n;
    return to_internal_units(c);
}

/// Schroedinger residual i hbar dG/dt + hbar^2/2m G'' + m a x G, divided by G
/// and by the largest of its three terms; derivatives by 5-point stencils.
inline double schroedinger_residual(const GaussianParams& p, double x, double t, double hbar) {
    auto L = [&](double xx, double tt) { return log_gaussian_t(p, xx, tt, hbar); };
    const cplx l0 = L(x, t);
    // time step resolving the local phase rate
    const double d = 1e-7 * t;
    const double omega = std::abs(L(x, t + d) - L(x, t - d)) / (2 * d);
    const double ht = 1e-2 / (omega + 1.0 / t), hx = 1e-3 * p.sigma;
    auto ratio = [&](double xx, double tt) { return std::exp(L(xx, tt) - l0); };
    const cplx dt = (-ratio(x, t + 2 * ht) + 8.0 * ratio(x, t + ht) - 8.0 * ratio(x, t - ht) + ratio(x, t - 2 * ht)) /
                    (12.0 * ht);
    const cplx dxx = (-ratio(x + 2 * hx, t) + 16.0 * ratio(x + hx, t) - 30.0 + 16.0 * ratio(x - hx, t) -
                      ratio(x - 2 * hx, t)) /
                     (12.0 * hx * hx);
    const cplx a = cplx{0.0, hbar} * dt, b = hbar * hbar / (2.0 * p.m) * dxx, c = p.m * p.a * x;
    return std::abs(a + b + c) / std::max({std::abs(a), std::abs(b), std::abs(c)});
}

/// Worst residual over `n` random packets under a downward force.
inline double worst_schroedinger_residual(int n, std::uint64_t seed) {
    const auto c = internal("fig2", 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        GaussianParams p{0.5 + 2.0 * U(rng), -20.0 + 40.0 * U(rng), -30.0 + 60.0 * U(rng), -c.g * (0.2 + U(rng)),
                         c.mass};
        const double t = 0.01 + 5.0 * U(rng);
        const auto g = at_time(p, t, c.hbar);
        const double x = g.centre + g.width * (-3.0 + 6.0 * U(rng));
        worst = std::max(worst, schroedinger_residual(p, x, t, c.hbar));
    }
    return worst;
}

/// <f_a(t)|f_b(t)> by trapezoidal quadrature over +-12 widths of the product
/// envelope; zero when the envelope peak is below e^-300.
inline cplx numeric_overlap(const GaussianParams& a, const GaussianParams& b, double t, double hbar) {
    const auto ga = at_time(a, t, hbar), gb = at_time(b, t, hbar);
    const double ra = ga.quad.real(), rb = gb.quad.real();
    const double centre = (ra * ga.centre + rb * gb.centre) / (ra + rb);
    const double width = 1.0 / std::sqrt(2.0 * (ra + rb));
    auto f = [&](double x) { return std::conj(ga.log_value(x)) + gb.log_value(x); };
    if (f(centre).real() < -300.0) return {0.0, 0.0};
    const double lo = centre - 12 * width, hi = centre + 12 * width;
    auto rate = [&](double x) { return std::abs(gb.dlog(x).imag() - ga.dlog(x).imag()); };
    const double h = std::min(width / 20.0, 0.2 / (std::max(rate(lo), rate(hi)) + 1e-30));
    const auto n = static_cast<long>(std::ceil((hi - lo) / h));
    cplx s{0.0, 0.0};
    for (long i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        s += w * std::exp(f(x));
    }
    return s * (hi - lo) / static_cast<double>(n);
}

/// <Psi|Psi> at time t assembled from numerically integrated 1D overlaps.
inline double numeric_norm(const Superposition<2>& J, double t) {
    std::array<std::vector<cplx>, 4> ov;
    for (std::size_t s = 0; s < 4; ++s) {
        const auto& f = J.factors(s);
        for (std::size_t i = 0; i < f.size(); ++i)
            for (std::size_t j = 0; j < f.size(); ++j) ov[s].push_back(numeric_overlap(f[i], f[j], t, J.hbar()));
    }
    cplx n{0.0, 0.0};
    for (const auto& a : J.terms())
        for (const auto& b : J.terms()) {
            cplx v = std::exp(std::conj(a.log_coeff) + b.log_coeff);
            for (std::size_t s = 0; s < 4; ++s) v *= ov[s][a.idx[s] * J.factors(s).size() + b.idx[s]];
            n += v;
        }
    return n.real();
}

/// Largest |<Psi|Psi> - 1| over the fig2 flight horizon.
inline double worst_norm_defect(const std::vector<double>& etas, int times) {
    double worst = 0.0;
    for (double eta : etas) {
        const auto c = internal("fig2", eta);
        const auto s = make_state(c);
        const double T = effective_t_max(c);
        for (int i = 0; i < times; ++i)
            worst = std::max(worst, std::abs(numeric_norm(s.joint, T * i / (times - 1)) - 1.0));
    }
    return worst;
}

struct VelocityCheck {
    double worst = 0.0;
    int points = 0;
};

/// Analytic velocity against (hbar/m) Im of a 5-point derivative of Psi,
/// at |Psi|^2-distributed points. Components are compared relative to
/// themselves, floored at the spreading velocity hbar / (m width).
inline VelocityCheck velocity_vs_finite_differences(const std::vector<double>& etas, const std::vector<double>& times,
                                                    std::size_t per_time) {
    VelocityCheck out;
    for (double eta : etas) {
        const auto c = internal("fig2", eta);
        const auto s = make_state(c);
        for (double t : times) {
            const auto pts = sample_positions(s, per_time, 11, t, static_cast<std::uint64_t>(1000 * t));
            for (const auto& x0 : pts) {
                const auto v = velocity_field(s, x0.r1, x0.r2, t);
                const auto q = pack(x0.r1, x0.r2);
                const auto e0 = s.joint.evaluate(q, t);
                const std::array<double, 4> an{v.v1.x, v.v1.y, v.v2.x, v.v2.y};
                for (int d = 0; d < 4; ++d) {
                    const double w = at_time(s.joint.factors(d).front(), t, c.hbar).width;
                    double h = 2e-2 / (std::abs(e0.grad[d]) + 1.0 / w);
                    h = (q[d] + h) - q[d];  // exactly representable offset
                    auto r = [&](double off) {
                        auto qq = q;
                        qq[d] += off;
                        return std::exp(s.joint.evaluate(qq, t).log_psi - e0.log_psi);
                    };
                    const cplx dpsi = (-r(2 * h) + 8.0 * r(h) - 8.0 * r(-h) + r(-2 * h)) / (12.0 * h);
                    const double fd = c.hbar / c.mass * dpsi.imag();
                    const double scale = std::max(std::abs(an[d]), c.hbar / (c.mass * w));
                    out.worst = std::max(out.worst, std::abs(fd - an[d]) / scale);
                }
                ++out.points;
            }
        }
    }
    return out;
}

struct ProductSetup {
    InternalConfig c;
    TwoParticleState s;
    GaussianParams y_packet;
};

/// One product term of the cesium preset: particle 1 leaves the left x slit,
/// particle 2 the right, both from the upper y slit.
inline ProductSetup cesium_product() {
    ProductSetup p{internal("fig4", 0.0), {}, {}};
    const auto sp = slit_packets(source_params(p.c));
    p.y_packet = sp.y_up;
    p.s = make_product_state(sp.x_minus, sp.y_up, sp.x_plus, sp.y_up, p.c.hbar);
    return p;
}

/// Mean right-screen arrival (ms) of `n` cesium trajectories.
inline double cesium_mean_arrival(std::size_t n) {
    const auto p = cesium_product();
    const Screens scr = screens_of(p.c);
    const auto pts = sample_positions(p.s, n, 6);
    double sum = 0.0;
    for (const auto& x0 : pts) sum += integrate_pair(x0, p.s, scr, {true, p.c.integrator}).t_right;
    return sum / static_cast<double>(n);
}

struct Reflection {
    double measured, conservation;
};

/// A packet with mean wavenumber k (hbar = m = 1) runs into the boundary and
/// comes back; what is left on the grid afterwards is the reflected probability.
inline Reflection reflect(double k, double kappa) {
    const double sigma = 15.0 / k, y0 = 6.0 * sigma;
    RobinSolverConfig c;
    c.kappa = kappa;
    c.y_far = y0 + 6.0 * sigma;
    c.n_grid = static_cast<int>(c.y_far / (0.03 / std::max(k, kappa))) + 1;
    c.dt = 0.1 / (k * k);
    const GaussianParams g{sigma, y0, -k, 0.0, 1.0};
    auto s = initial_grid(c, [&](double y) { return gaussian_t(g, y, 0.0, 1.0); });
    const double n0 = s.norm(c.dy());
    const RobinPropagator p(c);
    const int steps = static_cast<int>(2.0 * y0 / k / c.dt);
    for (int i = 0; i < steps; ++i) p.step(s);
    const double n1 = s.norm(c.dy());
    return {n1 / n0, std::abs(n1 + s.absorbed - n0)};
}

inline double plane_wave_reflection(double k, double kappa) { return std::pow((k - kappa) / (k + kappa), 2); }

}  // namespace oracle
