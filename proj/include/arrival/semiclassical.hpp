#pragma once

// Classical (for a linear potential: Wigner) trajectories from the product
// phase-space density |Psi|^2 |Psi~|^2, mapped to the screens in closed form.

#include <cmath>
#include <limits>
#include <vector>

#include "dynamics.hpp"
#include "parallel.hpp"
#include "sampler.hpp"

namespace arrival {

struct ClassicalArrival {
    double t = 0.0;
    double x = 0.0;
    bool hit = false;
};

/// Earliest t > 0 with y0 + (py/m) t - g t^2 / 2 = y_screen.
inline ClassicalArrival classical_arrival(Vec2 r0, Vec2 p0, double m, double y_screen, double g) {
    const double v = p0.y / m, d = r0.y - y_screen;  // d > 0: starts above
    double t = std::numeric_limits<double>::infinity();
    if (g == 0.0) {
        if (v != 0.0 && -d / v > 0) t = -d / v;
    } else {
        const double disc = v * v + 2.0 * g * d;
        if (disc >= 0) {
            const double sq = std::sqrt(disc);
            // roots (v -+ sq) / g, computed without cancellation
            const double q = v >= 0 ? v + sq : v - sq;
            const double r1 = q / g, r2 = q != 0.0 ? -2.0 * d / q : 0.0;
            for (double r : {r1, r2})
                if (r > 0 && r < t) t = r;
        }
    }
    if (!std::isfinite(t)) return {};
    return {t, r0.x + p0.x / m * t, true};
}

/// Arrival of one particle on whichever screen it reaches first on the
/// matching side of x_split.
inline ClassicalArrival classical_screen_arrival(Vec2 r0, Vec2 p0, double m, const Screens& scr, double g,
                                                 Screen& where) {
    ClassicalArrival best;
    where = Screen::none;
    for (Screen s : {Screen::left, Screen::right}) {
        const auto a = classical_arrival(r0, p0, m, s == Screen::left ? scr.y_left : scr.y_right, g);
        if (!a.hit || (scr.is_left(a.x) != (s == Screen::left))) continue;
        if (!best.hit || a.t < best.t) {
            best = a;
            where = s;
        }
    }
    return best;
}

/// One record per event, both particles mapped independently.
inline DetectionRecord semiclassical_record(const PhasePoint& pp, double m, double g, const Screens& scr,
                                            std::uint64_t event_id) {
    DetectionRecord rec;
    rec.event_id = event_id;
    Screen s1, s2;
    const auto a1 = classical_screen_arrival(pp.r1, pp.p1, m, scr, g, s1);
    const auto a2 = classical_screen_arrival(pp.r2, pp.p2, m, scr, g, s2);
    if (!a1.hit || !a2.hit || a1.t > scr.t_max || a2.t > scr.t_max) {
        if (a1.hit && a1.t <= scr.t_max) rec.set(s1, a1.t, a1.x);
        if (a2.hit && a2.t <= scr.t_max) rec.set(s2, a2.t, a2.x);
        rec.lost = LostReason::no_hit;
        return rec;
    }
    const bool one_first = a1.t <= a2.t;
    rec.first = one_first ? s1 : s2;
    if (s1 == s2) {
        const auto& a = one_first ? a1 : a2;
        rec.set(s1, a.t, a.x);
        rec.lost = LostReason::wrong_side;
        return rec;
    }
    rec.set(s1, a1.t, a1.x);
    rec.set(s2, a2.t, a2.x);
    return rec;
}

inline std::vector<DetectionRecord> run_semiclassical(const InternalConfig& c, const Screens& scr, std::size_t n,
                                                      std::uint64_t seed) {
    std::vector<DetectionRecord> out(n);
    if (n == 0) return out;
    const TwoParticleState s = make_state(c);
    parallel_for(n, c.workers, [&](std::size_t i) {
        const auto pp = sample_phase_points(s, 1, seed, i).front();
        out[i] = semiclassical_record(pp, c.mass, c.g, scr, i);
    });
    return out;
}

}  // namespace arrival
