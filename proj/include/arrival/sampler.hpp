#pragma once

// Quantum-equilibrium sampling from |Psi_t|^2 and |Psi~_{t0}|^2.
//
// Proposal: the Gaussian mixture sum_k |c_k|^2 |T_k|^2 (interference
// ignored). By Cauchy-Schwarz |sum_k c_k T_k|^2 <= K sum_k |c_k T_k|^2 for K
// terms, so accepting with probability |Psi|^2 / (K sum_k |c_k T_k|^2) draws
// exactly from |Psi|^2 whatever the packet overlap.

#include <cmath>
#include <cstdint>
#include <vector>

#include "random.hpp"
#include "wave.hpp"

namespace arrival {

struct ConfigPoint {
    Vec2 r1, r2;
};

struct PhasePoint {
    Vec2 r1, r2;
    Vec2 p1, p2;
};

namespace detail {

/// One mixture component per term: independent normal per slot.
struct MixtureComponent {
    double log_weight;              // log |c_k|^2
    std::array<double, 4> mean;
    std::array<double, 4> sd;
};

/// Draws one point from |f|^2 where `log_amp` returns log f and `comps`
/// describe |c_k|^2 |T_k|^2.
template <class LogAmp, class LogTerms>
std::array<double, 4> rejection_draw(const std::vector<MixtureComponent>& comps, LogAmp&& log_amp,
                                     LogTerms&& log_terms, RandomStream& rng) {
    double mx = neg_inf;
    for (const auto& c : comps) mx = std::max(mx, c.log_weight);
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& c : comps) cum.push_back(acc += std::exp(c.log_weight - mx));
    const double K = static_cast<double>(comps.size());
    for (;;) {
        const double u = rng.uniform() * acc;
        std::size_t k = 0;
        while (k + 1 < cum.size() && u >= cum[k]) ++k;
        std::array<double, 4> q{};
        for (std::size_t s = 0; s < 4; ++s) q[s] = comps[k].mean[s] + comps[k].sd[s] * rng.normal();
        const double lp = 2.0 * log_amp(q).real();
        const double lq = log_terms(q);  // log sum_k |c_k T_k(q)|^2
        const double log_accept = lp - std::log(K) - lq;
        if (std::log(rng.uniform()) < log_accept) return q;
    }
}

/// log sum_k exp(x_k) over reals.
inline double log_sum_exp_real(const std::vector<double>& v) {
    double m = neg_inf;
    for (double x : v) m = std::max(m, x);
    if (!(m > neg_inf)) return neg_inf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace detail

/// i.i.d. draws from |Psi_t|^2 (t defaults to the source time t0 = 0).
/// Event i uses substream i, so any prefix is reproducible on its own.
inline std::vector<ConfigPoint> sample_positions(const TwoParticleState& s, std::size_t n,
                                                 std::uint64_t seed, double t = 0.0,
                                                 std::uint64_t first_event = 0) {
    if (s.collapsed) throw std::invalid_argument("sampling needs an uncollapsed state");
    const auto& J = s.joint;
    const double hbar = J.hbar();
    std::vector<detail::MixtureComponent> comps;
    for (const auto& term : J.terms()) {
        detail::MixtureComponent c;
        c.log_weight = 2.0 * term.log_coeff.real();
        for (std::size_t sl = 0; sl < 4; ++sl) {
            const auto g = at_time(J.factors(sl)[term.idx[sl]], t, hbar);
            c.mean[sl] = g.centre;
            c.sd[sl] = g.width;
        }
        comps.push_back(c);
    }
    auto log_amp = [&](const std::array<double, 4>& q) { return J.evaluate(q, t).log_psi; };
    auto log_terms = [&](const std::array<double, 4>& q) {
        std::vector<double> v;
        for (const auto& term : J.terms()) {
            double l = 2.0 * term.log_coeff.real();
            for (std::size_t sl = 0; sl < 4; ++sl)
                l += 2.0 * log_gaussian_t(J.factors(sl)[term.idx[sl]], q[sl], t, hbar).real();
            v.push_back(l);
        }
        return detail::log_sum_exp_real(v);
    };
    std::vector<ConfigPoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rng(seed, first_event + i, stream_tag::position);
        const auto q = detail::rejection_draw(comps, log_amp, log_terms, rng);
        out.push_back({{q[0], q[1]}, {q[2], q[3]}});
    }
    return out;
}

/// Momenta drawn from |Psi~_{t0}|^2.
inline std::array<double, 4> sample_momentum(const MomentumDensity& md, RandomStream& rng) {
    const auto& J = md.state();
    const double hbar = J.hbar();
    std::vector<detail::MixtureComponent> comps;
    for (const auto& term : J.terms()) {
        detail::MixtureComponent c;
        c.log_weight = 2.0 * term.log_coeff.real();
        for (std::size_t sl = 0; sl < 4; ++sl) {
            const auto& g = J.factors(sl)[term.idx[sl]];
            c.mean[sl] = g.m * g.u;
            c.sd[sl] = momentum_spread(g, hbar);
        }
        comps.push_back(c);
    }
    auto log_amp = [&](const std::array<double, 4>& p) { return md.log_amplitude(p); };
    auto log_terms = [&](const std::array<double, 4>& p) {
        std::vector<double> v;
        for (const auto& term : J.terms()) {
            double l = 2.0 * term.log_coeff.real();
            for (std::size_t sl = 0; sl < 4; ++sl)
                l += 2.0 * log_momentum_factor(J.factors(sl)[term.idx[sl]], p[sl], hbar).real();
            v.push_back(l);
        }
        return detail::log_sum_exp_real(v);
    };
    return detail::rejection_draw(comps, log_amp, log_terms, rng);
}

/// Positions from |Psi_{t0}|^2 and, independently, momenta from
/// |Psi~_{t0}|^2, paired per event.
inline std::vector<PhasePoint> sample_phase_points(const TwoParticleState& s, std::size_t n,
                                                   std::uint64_t seed, std::uint64_t first_event = 0) {
    std::vector<PhasePoint> out;
    if (n == 0) return out;
    const auto pos = sample_positions(s, n, seed, 0.0, first_event);
    const MomentumDensity md(s);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rng(seed, first_event + i, stream_tag::momentum);
        const auto p = sample_momentum(md, rng);
        out.push_back({pos[i].r1, pos[i].r2, {p[0], p[1]}, {p[2], p[3]}});
    }
    return out;
}

}  // namespace arrival
