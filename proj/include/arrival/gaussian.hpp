#pragma once

// One-dimensional Gaussian packet under a uniform force, in closed form.
//
//   G_t(x) = (2 pi s_t^2)^(-1/4) exp(i m a l t / hbar)
//            exp(-(x - l - u t - a t^2/2)^2 / (4 sigma s_t))
//            exp(i m/hbar [(u + a t)(x - l - u t/2) - a^2 t^3 / 6])
//
// with s_t = sigma (1 + i hbar t / (2 m sigma^2)). It solves
// i hbar dG/dt = -hbar^2/(2m) G'' - m a x G exactly; the l-dependent phase is
// required for that. Everything is returned in log form because the moduli
// of distant packets underflow any floating-point format.

#include <cmath>
#include <complex>
#include <numbers>

namespace arrival {

using cplx = std::complex<double>;

struct GaussianParams {
    double sigma = 1.0;  // initial width
    double l = 0.0;      // initial centre
    double u = 0.0;      // initial velocity
    double a = 0.0;      // acceleration along this axis
    double m = 1.0;      // mass

    friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

/// Time-dependent constants of G_t; evaluate many points at one time cheaply.
struct GaussianAtTime {
    double centre;     // l + u t + a t^2 / 2
    double velocity;   // u + a t
    double width;      // |s_t|
    cplx log_const;    // log of everything independent of x
    cplx k;            // i m (u + a t) / hbar
    cplx quad;         // 1 / (4 sigma s_t)

    /// log G_t(x)
    cplx log_value(double x) const {
        const double xi = x - centre;
        return log_const + k * xi - quad * (xi * xi);
    }
    /// d/dx log G_t(x)
    cplx dlog(double x) const { return k - 2.0 * quad * (x - centre); }
    /// d^2/dx^2 log G_t(x)
    cplx d2log() const { return -2.0 * quad; }
};

inline GaussianAtTime at_time(const GaussianParams& p, double t, double hbar) {
    const double tau = hbar * t / (2.0 * p.m * p.sigma * p.sigma);
    const cplx s{p.sigma, p.sigma * tau};
    const double mh = p.m / hbar;
    GaussianAtTime g;
    g.centre = p.l + p.u * t + 0.5 * p.a * t * t;
    g.velocity = p.u + p.a * t;
    g.width = std::abs(s);
    // phase at the centre: m/hbar [u^2 t/2 + u a t^2 + a^2 t^3/3 + a l t]
    // reduced mod 2 pi so that x-dependent phase differences keep full precision
    const double phase = std::remainder(
        mh * (0.5 * p.u * p.u * t + p.u * p.a * t * t + p.a * p.a * t * t * t / 3.0 + p.a * p.l * t),
        2.0 * std::numbers::pi);
    g.log_const = cplx{-0.25 * std::log(2.0 * std::numbers::pi), phase} - 0.5 * std::log(s);
    g.k = cplx{0.0, mh * g.velocity};
    g.quad = 1.0 / (4.0 * p.sigma * s);
    return g;
}

/// log G_t(x; sigma, l, u, a).
inline cplx log_gaussian_t(const GaussianParams& p, double x, double t, double hbar) {
    return at_time(p, t, hbar).log_value(x);
}

/// G_t(x); underflows to zero far from the packet.
inline cplx gaussian_t(const GaussianParams& p, double x, double t, double hbar) {
    return std::exp(log_gaussian_t(p, x, t, hbar));
}

/// log <G_a | G_b>. The two packets must share mass and acceleration, so the
/// overlap is time independent; it is evaluated at t = 0.
inline cplx log_overlap(const GaussianParams& a, const GaussianParams& b, double hbar) {
    const double ka = a.m * a.u / hbar;
    const double kb = b.m * b.u / hbar;
    const double ia = 1.0 / (4.0 * a.sigma * a.sigma);
    const double ib = 1.0 / (4.0 * b.sigma * b.sigma);
    const double alpha = ia + ib;
    const cplx beta{2.0 * (a.l * ia + b.l * ib), kb - ka};
    const cplx gamma{-(a.l * a.l * ia + b.l * b.l * ib), ka * a.l - kb * b.l};
    const double log_pref = -0.25 * std::log(2.0 * std::numbers::pi * a.sigma * a.sigma) -
                            0.25 * std::log(2.0 * std::numbers::pi * b.sigma * b.sigma);
    return log_pref + 0.5 * std::log(std::numbers::pi / alpha) + beta * beta / (4.0 * alpha) + gamma;
}

/// log of the t = 0 packet in momentum space,
/// phi(p) = (2 sigma^2 / (pi hbar^2))^(1/4) exp(-sigma^2 (p - m u)^2 / hbar^2 - i p l / hbar).
inline cplx log_momentum_factor(const GaussianParams& g, double p, double hbar) {
    const double d = p - g.m * g.u;
    return cplx{0.25 * std::log(2.0 * g.sigma * g.sigma / (std::numbers::pi * hbar * hbar)) -
                    g.sigma * g.sigma * d * d / (hbar * hbar),
                -p * g.l / hbar};
}

/// Standard deviation of |phi(p)|^2.
inline double momentum_spread(const GaussianParams& g, double hbar) { return hbar / (2.0 * g.sigma); }

/// log <phi_a | phi_b> in momentum space; equals log_overlap by Parseval.
inline cplx log_momentum_overlap(const GaussianParams& a, const GaussianParams& b, double hbar) {
    const double sa = a.sigma * a.sigma / (hbar * hbar);
    const double sb = b.sigma * b.sigma / (hbar * hbar);
    const double pa = a.m * a.u, pb = b.m * b.u;
    const double alpha = sa + sb;
    const cplx beta{2.0 * (sa * pa + sb * pb), (a.l - b.l) / hbar};
    const double gamma = -(sa * pa * pa + sb * pb * pb);
    const double log_pref = 0.25 * std::log(2.0 * a.sigma * a.sigma / (std::numbers::pi * hbar * hbar)) +
                            0.25 * std::log(2.0 * b.sigma * b.sigma / (std::numbers::pi * hbar * hbar));
    return log_pref + 0.5 * std::log(std::numbers::pi / alpha) + beta * beta / (4.0 * alpha) + gamma;
}

}  // namespace arrival
