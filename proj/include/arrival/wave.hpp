#pragma once

// Analytic N-particle wave functions built as superpositions of products of
// 1D Gaussian packets, the two-particle source state, Bohmian velocity
// fields and the collapse onto a conditional wave function.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gaussian.hpp"

namespace arrival {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// Result of evaluating a superposition: log Psi and the gradient of log Psi
/// with respect to every coordinate slot.
template <std::size_t Slots>
struct LogEval {
    cplx log_psi{neg_inf, 0.0};
    std::array<cplx, Slots> grad{};

    double log_density() const { return 2.0 * log_psi.real(); }
    bool is_zero() const { return !(log_psi.real() > neg_inf); }
};

/// Sum over terms of (coefficient x product of one Gaussian per coordinate).
/// Coordinates are ordered (x1, y1, x2, y2, ...). Coefficients are stored as
/// complex logarithms.
template <std::size_t N>
class Superposition {
public:
    static constexpr std::size_t slots = 2 * N;
    static constexpr std::size_t max_factors = 8;
    static constexpr std::size_t max_terms = 64;

    struct Term {
        cplx log_coeff;
        std::array<std::uint8_t, slots> idx{};
    };

    Superposition() = default;
    explicit Superposition(double hbar) : hbar_(hbar) {}

    double hbar() const { return hbar_; }
    const std::vector<GaussianParams>& factors(std::size_t slot) const { return factors_[slot]; }
    const std::vector<Term>& terms() const { return terms_; }
    double mass(std::size_t slot) const { return factors_[slot].front().m; }

    /// Index of `g` in the slot's factor table, inserting it if new.
    std::uint8_t factor_index(std::size_t slot, const GaussianParams& g) {
        auto& f = factors_[slot];
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f[i] == g) return static_cast<std::uint8_t>(i);
        if (!f.empty() && (f.front().m != g.m || f.front().a != g.a))
            throw std::invalid_argument("factors sharing a coordinate need equal mass and acceleration");
        if (f.size() == max_factors) throw std::length_error("too many distinct factors in one slot");
        f.push_back(g);
        return static_cast<std::uint8_t>(f.size() - 1);
    }

    /// Adds a term; identical factor tuples are merged into one coefficient.
    void add_term(cplx log_coeff, const std::array<GaussianParams, slots>& fs) {
        std::array<std::uint8_t, slots> idx{};
        for (std::size_t s = 0; s < slots; ++s) idx[s] = factor_index(s, fs[s]);
        add_term(log_coeff, idx);
    }

    void add_term(cplx log_coeff, const std::array<std::uint8_t, slots>& idx) {
        if (!(log_coeff.real() > neg_inf)) return;
        for (auto& t : terms_) {
            if (t.idx == idx) {
                t.log_coeff = log_add(t.log_coeff, log_coeff);
                return;
            }
        }
        if (terms_.size() == max_terms) throw std::length_error("too many terms");
        terms_.push_back({log_coeff, idx});
    }

    /// log <Psi|Psi>.
    double log_norm2() const {
        std::array<std::vector<cplx>, slots> ov;
        for (std::size_t s = 0; s < slots; ++s) {
            const auto& f = factors_[s];
            ov[s].resize(f.size() * f.size());
            for (std::size_t i = 0; i < f.size(); ++i)
                for (std::size_t j = 0; j < f.size(); ++j)
                    ov[s][i * f.size() + j] = log_overlap(f[i], f[j], hbar_);
        }
        std::vector<cplx> logs;
        logs.reserve(terms_.size() * terms_.size());
        for (const auto& a : terms_) {
            for (const auto& b : terms_) {
                cplx l = std::conj(a.log_coeff) + b.log_coeff;
                for (std::size_t s = 0; s < slots; ++s)
                    l += ov[s][a.idx[s] * factors_[s].size() + b.idx[s]];
                logs.push_back(l);
            }
        }
        return log_sum_exp(logs).real();
    }

    /// Rescales coefficients to unit norm; returns the factor applied.
    double normalize() {
        const double ln2 = log_norm2();
        if (!std::isfinite(ln2)) throw std::domain_error("cannot normalise a zero wave function");
        for (auto& t : terms_) t.log_coeff -= 0.5 * ln2;
        return std::exp(-0.5 * ln2);
    }

    /// log Psi and grad log Psi at the given coordinates and time.
    LogEval<slots> evaluate(const std::array<double, slots>& q, double t) const {
        std::array<std::array<cplx, max_factors>, slots> lv{}, dl{};
        for (std::size_t s = 0; s < slots; ++s) {
            const auto& f = factors_[s];
            for (std::size_t i = 0; i < f.size(); ++i) {
                const GaussianAtTime g = at_time(f[i], t, hbar_);
                lv[s][i] = g.log_value(q[s]);
                dl[s][i] = g.dlog(q[s]);
            }
        }
        std::array<cplx, max_terms> l{};
        double mx = neg_inf;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            cplx v = terms_[k].log_coeff;
            for (std::size_t s = 0; s < slots; ++s) v += lv[s][terms_[k].idx[s]];
            l[k] = v;
            mx = std::max(mx, v.real());
        }
        LogEval<slots> out;
        if (!(mx > neg_inf)) return out;
        cplx sum{0.0, 0.0};
        std::array<cplx, slots> gsum{};
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const double re = l[k].real() - mx;
            if (re < -745.0) continue;
            const cplx w = std::polar(std::exp(re), l[k].imag());
            sum += w;
            for (std::size_t s = 0; s < slots; ++s) gsum[s] += w * dl[s][terms_[k].idx[s]];
        }
        if (sum == cplx{0.0, 0.0}) return out;  // exact node
        out.log_psi = std::log(sum) + mx;
        for (std::size_t s = 0; s < slots; ++s) out.grad[s] = gsum[s] / sum;
        return out;
    }

    /// Probability density of coordinate `slot` alone at time t, integrating
    /// all others analytically.
    double marginal_density(std::size_t slot, double x, double t) const {
        std::array<std::vector<cplx>, slots> ov;
        for (std::size_t s = 0; s < slots; ++s) {
            if (s == slot) continue;
            const auto& f = factors_[s];
            ov[s].resize(f.size() * f.size());
            for (std::size_t i = 0; i < f.size(); ++i)
                for (std::size_t j = 0; j < f.size(); ++j)
                    ov[s][i * f.size() + j] = log_overlap(f[i], f[j], hbar_);
        }
        std::vector<cplx> lv;
        for (const auto& g : factors_[slot]) lv.push_back(log_gaussian_t(g, x, t, hbar_));
        std::vector<cplx> logs;
        for (const auto& a : terms_) {
            for (const auto& b : terms_) {
                cplx l = std::conj(a.log_coeff) + b.log_coeff + std::conj(lv[a.idx[slot]]) + lv[b.idx[slot]];
                for (std::size_t s = 0; s < slots; ++s)
                    if (s != slot) l += ov[s][a.idx[s] * factors_[s].size() + b.idx[s]];
                logs.push_back(l);
            }
        }
        const cplx ls = log_sum_exp(logs);
        if (!(ls.real() > neg_inf)) return 0.0;
        return std::exp(ls.real()) * std::cos(ls.imag());
    }

    static cplx log_add(cplx a, cplx b) {
        if (!(a.real() > neg_inf)) return b;
        if (!(b.real() > neg_inf)) return a;
        const double m = std::max(a.real(), b.real());
        const cplx s = std::exp(a - m) + std::exp(b - m);
        if (s == cplx{0.0, 0.0}) return {neg_inf, 0.0};
        return std::log(s) + m;
    }

    static cplx log_sum_exp(const std::vector<cplx>& v) {
        double m = neg_inf;
        for (const auto& x : v) m = std::max(m, x.real());
        if (!(m > neg_inf)) return {neg_inf, 0.0};
        cplx s{0.0, 0.0};
        for (const auto& x : v) {
            const double re = x.real() - m;
            if (re < -745.0) continue;
            s += std::polar(std::exp(re), x.imag());
        }
        if (s == cplx{0.0, 0.0}) return {neg_inf, 0.0};
        return std::log(s) + m;
    }

private:
    double hbar_ = 1.0;
    std::array<std::vector<GaussianParams>, slots> factors_{};
    std::vector<Term> terms_;
};

// ---------------------------------------------------------------------------
// The two-particle source state

/// Geometry and species of the double-double-slit source (internal units).
struct SourceParams {
    double sigma_x, sigma_y;
    double l_x, l_y;
    double u_x, u_y;
    double mass;
    double g;
    double hbar;
};

struct CollapseInfo {
    int detected = 1;  // 1 or 2
    Vec2 position;
    double t_c = 0.0;
};

class DegenerateCollapse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TwoParticleState {
    Superposition<2> joint;
    double eta = 0.0;
    double norm_constant = 1.0;
    double t0 = 0.0;
    std::optional<CollapseInfo> collapsed;
    Superposition<1> conditional;  // valid once collapsed

    double hbar() const { return joint.hbar(); }
    double mass(int particle) const { return joint.mass(particle == 1 ? 0 : 2); }
};

/// The four single-particle packets leaving the slits.
struct SlitPackets {
    GaussianParams x_plus, x_minus, y_up, y_down;
};

inline SlitPackets slit_packets(const SourceParams& p) {
    return {{p.sigma_x, +p.l_x, +p.u_x, 0.0, p.mass},
            {p.sigma_x, -p.l_x, -p.u_x, 0.0, p.mass},
            {p.sigma_y, +p.l_y, +p.u_y, -p.g, p.mass},
            {p.sigma_y, -p.l_y, -p.u_y, -p.g, p.mass}};
}

/// N [ (1-eta)/2 Psi_cross + (1+eta)/2 Psi_parallel ], bosonically symmetrised.
/// Terms with vanishing weight (|eta| = 1) are omitted.
inline TwoParticleState make_entangled_state(const SourceParams& p, double eta) {
    if (!(std::abs(eta) <= 1.0)) throw std::invalid_argument("eta must lie in [-1, 1]");
    const SlitPackets s = slit_packets(p);
    TwoParticleState st;
    st.eta = eta;
    st.joint = Superposition<2>(p.hbar);

    using Packet = std::pair<GaussianParams, GaussianParams>;
    const Packet up_plus{s.x_plus, s.y_up}, down_plus{s.x_plus, s.y_down};
    const Packet up_minus{s.x_minus, s.y_up}, down_minus{s.x_minus, s.y_down};
    auto add = [&](double w, const Packet& a, const Packet& b) {
        if (w == 0.0) return;
        const cplx lw = std::log(cplx{w, 0.0});
        st.joint.add_term(lw, {a.first, a.second, b.first, b.second});
        st.joint.add_term(lw, {b.first, b.second, a.first, a.second});  // 1 <-> 2
    };
    const double wc = 0.5 * (1.0 - eta), wp = 0.5 * (1.0 + eta);
    add(wc, up_plus, down_minus);
    add(wc, down_plus, up_minus);
    add(wp, up_plus, up_minus);
    add(wp, down_plus, down_minus);
    st.norm_constant = st.joint.normalize();
    return st;
}

/// A single product term; particle i occupies (xi, yi).
inline TwoParticleState make_product_state(const GaussianParams& x1, const GaussianParams& y1,
                                           const GaussianParams& x2, const GaussianParams& y2,
                                           double hbar) {
    TwoParticleState st;
    st.joint = Superposition<2>(hbar);
    st.joint.add_term(cplx{0.0, 0.0}, {x1, y1, x2, y2});
    st.norm_constant = st.joint.normalize();
    return st;
}

inline std::array<double, 4> pack(Vec2 r1, Vec2 r2) { return {r1.x, r1.y, r2.x, r2.y}; }

/// log Psi_t(r1, r2). After collapse only the undetected particle's argument
/// is used.
inline cplx log_amplitude(const TwoParticleState& s, Vec2 r1, Vec2 r2, double t) {
    if (s.collapsed) {
        const Vec2 r = s.collapsed->detected == 1 ? r2 : r1;
        return s.conditional.evaluate({r.x, r.y}, t).log_psi;
    }
    return s.joint.evaluate(pack(r1, r2), t).log_psi;
}

inline cplx evaluate_state(const TwoParticleState& s, Vec2 r1, Vec2 r2, double t) {
    return std::exp(log_amplitude(s, r1, r2, t));
}

struct VelocityField {
    Vec2 v1, v2;
    double log_density = neg_inf;  // log |Psi|^2 at the query point
    bool valid() const { return log_density > neg_inf; }
};

/// v_i = (hbar/m) Im(grad_i Psi / Psi), from the analytic gradient.
inline VelocityField velocity_field(const TwoParticleState& s, Vec2 r1, Vec2 r2, double t) {
    VelocityField out;
    const double hbar = s.hbar();
    if (s.collapsed) {
        const bool second = s.collapsed->detected == 1;
        const Vec2 r = second ? r2 : r1;
        const auto e = s.conditional.evaluate({r.x, r.y}, t);
        out.log_density = e.log_density();
        if (e.is_zero()) return out;
        const double k = hbar / s.conditional.mass(0);
        const Vec2 v{k * e.grad[0].imag(), k * e.grad[1].imag()};
        (second ? out.v2 : out.v1) = v;
        return out;
    }
    const auto e = s.joint.evaluate(pack(r1, r2), t);
    out.log_density = e.log_density();
    if (e.is_zero()) return out;
    const double k1 = hbar / s.joint.mass(0), k2 = hbar / s.joint.mass(2);
    out.v1 = {k1 * e.grad[0].imag(), k1 * e.grad[1].imag()};
    out.v2 = {k2 * e.grad[2].imag(), k2 * e.grad[3].imag()};
    return out;
}

/// Inserts the detected particle's position at t_c into the wave function,
/// leaving a normalised one-particle superposition of the other particle's
/// packets. Those packets keep evolving in closed form, which is the
/// one-particle Schroedinger evolution of the conditional wave function.
inline TwoParticleState collapse(const TwoParticleState& s, int detected, Vec2 R, double t_c) {
    if (s.collapsed) throw std::logic_error("state is already collapsed");
    if (detected != 1 && detected != 2) throw std::invalid_argument("detected must be 1 or 2");
    const std::size_t ds = detected == 1 ? 0 : 2;  // detected slots ds, ds+1
    const std::size_t rs = detected == 1 ? 2 : 0;  // remaining slots
    const auto& J = s.joint;

    std::array<std::vector<cplx>, 2> lv;
    for (std::size_t d = 0; d < 2; ++d)
        for (const auto& g : J.factors(ds + d))
            lv[d].push_back(log_gaussian_t(g, d == 0 ? R.x : R.y, t_c, J.hbar()));

    TwoParticleState out = s;
    out.conditional = Superposition<1>(J.hbar());
    double mx = neg_inf;
    for (const auto& term : J.terms()) {
        const cplx c = term.log_coeff + lv[0][term.idx[ds]] + lv[1][term.idx[ds + 1]];
        mx = std::max(mx, c.real());
        out.conditional.add_term(c, {J.factors(rs)[term.idx[rs]], J.factors(rs + 1)[term.idx[rs + 1]]});
    }
    if (!(mx > std::log(1e-300)) || out.conditional.terms().empty())
        throw DegenerateCollapse("conditional wave function vanishes at the detected position");
    out.conditional.normalize();
    out.collapsed = CollapseInfo{detected, R, t_c};
    return out;
}

// ---------------------------------------------------------------------------
// Momentum space

/// |Psi~_{t0}(p1, p2)|^2 as a closed-form mixture; same coefficients as the
/// position-space state, each factor Fourier transformed.
class MomentumDensity {
public:
    explicit MomentumDensity(const TwoParticleState& s) : joint_(s.joint) {
        if (s.collapsed) throw std::invalid_argument("momentum density needs an uncollapsed state");
    }

    const Superposition<2>& state() const { return joint_; }

    /// log Psi~(p) with p = (p1x, p1y, p2x, p2y).
    cplx log_amplitude(const std::array<double, 4>& p) const {
        const double hbar = joint_.hbar();
        std::array<std::vector<cplx>, 4> lv;
        for (std::size_t s = 0; s < 4; ++s)
            for (const auto& g : joint_.factors(s)) lv[s].push_back(log_momentum_factor(g, p[s], hbar));
        std::vector<cplx> logs;
        for (const auto& t : joint_.terms()) {
            cplx l = t.log_coeff;
            for (std::size_t s = 0; s < 4; ++s) l += lv[s][t.idx[s]];
            logs.push_back(l);
        }
        return Superposition<2>::log_sum_exp(logs);
    }

    double density(const std::array<double, 4>& p) const {
        return std::exp(2.0 * log_amplitude(p).real());
    }

    /// Integral of the density over all momenta, from closed-form overlaps.
    double total() const {
        const double hbar = joint_.hbar();
        std::vector<cplx> logs;
        for (const auto& a : joint_.terms()) {
            for (const auto& b : joint_.terms()) {
                cplx l = std::conj(a.log_coeff) + b.log_coeff;
                for (std::size_t s = 0; s < 4; ++s)
                    l += log_momentum_overlap(joint_.factors(s)[a.idx[s]], joint_.factors(s)[b.idx[s]], hbar);
                logs.push_back(l);
            }
        }
        const cplx ls = Superposition<2>::log_sum_exp(logs);
        return std::exp(ls.real()) * std::cos(ls.imag());
    }

private:
    Superposition<2> joint_;
};

inline MomentumDensity momentum_density(const TwoParticleState& s) { return MomentumDensity(s); }

}  // namespace arrival
