#pragma once

// Bohmian trajectories of the two-particle state up to detection.
//
// Phase 1 integrates the four-dimensional guidance equation until one
// particle crosses the screen plane on its side. With collapse enabled the
// other particle then follows the conditional wave function (a 2D ODE);
// otherwise the joint 4D flow continues. All quantities are internal units.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "ode.hpp"
#include "parallel.hpp"
#include "sampler.hpp"
#include "wave.hpp"

namespace arrival {

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

struct Screens {
    double y_left = -4000.0;
    double y_right = -80000.0;
    double x_split = 0.0;
    double t_max = 300.0;

    bool is_left(double x) const { return x < x_split; }
    double height(double x) const { return is_left(x) ? y_left : y_right; }
};

inline Screens screens_of(const InternalConfig& c) {
    return {c.y_left, c.y_right, c.x_split, effective_t_max(c)};
}

enum class LostReason { none, t_max, node_trap, wrong_side, degenerate_collapse, no_hit, start_below };

inline const char* to_string(LostReason r) {
    switch (r) {
    case LostReason::none: return "";
    case LostReason::t_max: return "t_max";
    case LostReason::node_trap: return "node_trap";
    case LostReason::wrong_side: return "wrong_side";
    case LostReason::degenerate_collapse: return "degenerate_collapse";
    case LostReason::no_hit: return "no_hit";
    case LostReason::start_below: return "start_below";
    }
    return "";
}

enum class Screen { none, left, right };
enum class Source { bohmian, semiclassical, abr };

inline const char* to_string(Screen s) {
    return s == Screen::left ? "left" : s == Screen::right ? "right" : "";
}
inline const char* to_string(Source s) {
    return s == Source::bohmian ? "bohmian" : s == Source::semiclassical ? "semiclassical" : "abr";
}

/// One event. Missing times/positions are NaN.
struct DetectionRecord {
    std::uint64_t event_id = 0;
    double t_left = nan_value, x_left = nan_value;
    double t_right = nan_value, x_right = nan_value;
    Screen first = Screen::none;
    bool collapse_applied = false;
    LostReason lost = LostReason::none;

    bool kept() const { return lost == LostReason::none; }
    void set(Screen s, double t, double x) {
        if (s == Screen::left) {
            t_left = t;
            x_left = x;
        } else {
            t_right = t;
            x_right = x;
        }
    }
    friend bool operator==(const DetectionRecord& a, const DetectionRecord& b) {
        auto same = [](double u, double v) { return (std::isnan(u) && std::isnan(v)) || u == v; };
        return a.event_id == b.event_id && same(a.t_left, b.t_left) && same(a.x_left, b.x_left) &&
               same(a.t_right, b.t_right) && same(a.x_right, b.x_right) && a.first == b.first &&
               a.collapse_applied == b.collapse_applied && a.lost == b.lost;
    }
};

struct Knot {
    double t;
    Vec2 r1, r2;
};

struct Trajectory {
    std::vector<Knot> knots;
    LostReason end = LostReason::none;
};

/// Keeps at most `max_knots` knots, always including both ends.
inline void decimate(std::vector<Knot>& k, std::size_t max_knots) {
    if (k.size() <= max_knots || max_knots < 2) return;
    std::vector<Knot> out;
    out.reserve(max_knots);
    const double stride = static_cast<double>(k.size() - 1) / static_cast<double>(max_knots - 1);
    std::size_t last = k.size();
    for (std::size_t j = 0; j < max_knots; ++j) {
        const auto i = static_cast<std::size_t>(std::llround(j * stride));
        if (i != last) out.push_back(k[i]);
        last = i;
    }
    k = std::move(out);
}

namespace detail {

enum class PhaseStatus { crossed, t_max, node_trap };

template <std::size_t D>
struct PhaseResult {
    PhaseStatus status;
    double t;
    OdeVec<D> y;
    int particle = -1;  // index into the watched list
};

/// Integrates dy/dt = vel(t, y) from (t0, y0) until one of the watched
/// particles (x at slot 2j, y at slot 2j+1 of the watch list) crosses the
/// screen plane, or t_end. `vel` returns false at a node and stores
/// log|Psi|^2 through its last argument.
template <std::size_t D, class Vel>
PhaseResult<D> integrate_phase(Vel& vel, const OdeVec<D>& y0, double t0, double t_end,
                               const std::vector<std::size_t>& watch, const Screens& scr,
                               const InternalIntegrator& opt, const std::function<void(double, const OdeVec<D>&)>& on_step) {
    double log_max = -std::numeric_limits<double>::infinity();
    double last_logd = log_max;
    const double log_eps = std::log(opt.node_epsilon);
    auto rhs = [&](double t, const OdeVec<D>& y, OdeVec<D>& dy) {
        double ld = 0.0;
        if (!vel(t, y, dy, ld)) return false;
        if (ld < log_max + log_eps) return false;
        last_logd = ld;
        return true;
    };

    StepControl sc;
    sc.rtol = opt.rtol;
    sc.atol = opt.atol;
    sc.h_min = opt.dt_min;
    DormandPrince<D> dp(sc);
    if (!dp.reset(rhs, t0, y0, opt.h0)) return {PhaseStatus::node_trap, t0, y0};
    log_max = last_logd;

    auto gap = [&](const auto& y, std::size_t slot) { return y[slot + 1] - scr.height(y[slot]); };
    for (std::size_t j = 0; j < watch.size(); ++j)
        if (!(gap(y0, watch[j]) > 0)) return {PhaseStatus::crossed, t0, y0, static_cast<int>(j)};

    while (dp.t() < t_end) {
        const OdeVec<D> prev = dp.y();
        const auto st = dp.step(rhs, t_end - dp.t());
        if (st == StepStatus::too_small) return {PhaseStatus::node_trap, dp.t(), dp.y()};
        if (st != StepStatus::accepted) continue;
        log_max = std::max(log_max, last_logd);
        const auto& ds = dp.dense();

        int who = -1;
        double tc = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < watch.size(); ++j) {
            const std::size_t s = watch[j];
            if (!(gap(prev, s) > 0) || gap(dp.y(), s) > 0) continue;
            auto g = [&](double t) { return ds.component(s + 1, t) - scr.height(ds.component(s, t)); };
            const double t = bisect_crossing(g, ds.t0, ds.t1(), 1e-9, 1e-12);
            // ties within 1e-9 ms go to the first watched particle
            if (who < 0 || t < tc - 1e-9) {
                who = static_cast<int>(j);
                tc = t;
            }
        }
        if (who >= 0) {
            const OdeVec<D> yc = ds(tc);
            if (on_step) on_step(tc, yc);
            return {PhaseStatus::crossed, tc, yc, who};
        }
        if (on_step) on_step(dp.t(), dp.y());
    }
    return {PhaseStatus::t_max, dp.t(), dp.y()};
}

}  // namespace detail

struct PairOptions {
    bool collapse_enabled = true;
    InternalIntegrator integrator{1e-9, 1e-9, 1e-9, 1e-3, 1e-24, 2000, false};
};

/// Follows one sampled pair to detection.
inline DetectionRecord integrate_pair(const ConfigPoint& x0, const TwoParticleState& s, const Screens& scr,
                                      const PairOptions& opt, Trajectory* traj = nullptr,
                                      std::uint64_t event_id = 0) {
    DetectionRecord rec;
    rec.event_id = event_id;
    if (s.collapsed) throw std::invalid_argument("integrate_pair needs an uncollapsed state");

    auto vel4 = [&](double t, const OdeVec<4>& y, OdeVec<4>& dy, double& ld) {
        const auto v = velocity_field(s, {y[0], y[1]}, {y[2], y[3]}, t);
        if (!v.valid()) return false;
        dy = {v.v1.x, v.v1.y, v.v2.x, v.v2.y};
        ld = v.log_density;
        return std::isfinite(dy[0] + dy[1] + dy[2] + dy[3]);
    };
    std::function<void(double, const OdeVec<4>&)> rec4;
    if (traj) {
        traj->knots.clear();
        traj->knots.push_back({0.0, x0.r1, x0.r2});
        rec4 = [&](double t, const OdeVec<4>& y) { traj->knots.push_back({t, {y[0], y[1]}, {y[2], y[3]}}); };
    }
    auto finish = [&](LostReason why) {
        rec.lost = why;
        if (traj) {
            traj->end = why;
            decimate(traj->knots, opt.integrator.full_trajectory ? traj->knots.size() : opt.integrator.max_knots);
        }
        return rec;
    };

    const OdeVec<4> y0 = pack(x0.r1, x0.r2);
    const auto p1 = detail::integrate_phase<4>(vel4, y0, 0.0, scr.t_max, {0, 2}, scr, opt.integrator, rec4);
    if (p1.status == detail::PhaseStatus::t_max) return finish(LostReason::t_max);
    if (p1.status == detail::PhaseStatus::node_trap) return finish(LostReason::node_trap);
    if (p1.t == 0.0) return finish(LostReason::start_below);

    const int det = p1.particle;  // 0 or 1
    const std::size_t ds = det == 0 ? 0 : 2, rs = det == 0 ? 2 : 0;
    const Vec2 R{p1.y[ds], p1.y[ds + 1]};
    const Screen first = scr.is_left(R.x) ? Screen::left : Screen::right;
    rec.first = first;
    rec.set(first, p1.t, R.x);

    auto second_hit = [&](double t, double x) {
        const Screen side = scr.is_left(x) ? Screen::left : Screen::right;
        if (side == first) return finish(LostReason::wrong_side);
        rec.set(side, t, x);
        return finish(LostReason::none);
    };

    if (opt.collapse_enabled) {
        TwoParticleState cs;
        try {
            cs = collapse(s, det + 1, R, p1.t);
        } catch (const DegenerateCollapse&) {
            return finish(LostReason::degenerate_collapse);
        }
        rec.collapse_applied = true;
        auto vel2 = [&](double t, const OdeVec<2>& y, OdeVec<2>& dy, double& ld) {
            const auto e = cs.conditional.evaluate({y[0], y[1]}, t);
            if (e.is_zero()) return false;
            const double k = cs.hbar() / cs.conditional.mass(0);
            dy = {k * e.grad[0].imag(), k * e.grad[1].imag()};
            ld = e.log_density();
            return std::isfinite(dy[0] + dy[1]);
        };
        std::function<void(double, const OdeVec<2>&)> rec2;
        if (traj) {
            rec2 = [&](double t, const OdeVec<2>& y) {
                const Vec2 r{y[0], y[1]};
                traj->knots.push_back({t, det == 0 ? R : r, det == 0 ? r : R});
            };
        }
        const OdeVec<2> z0{p1.y[rs], p1.y[rs + 1]};
        const auto p2 = detail::integrate_phase<2>(vel2, z0, p1.t, scr.t_max, {0}, scr, opt.integrator, rec2);
        if (p2.status == detail::PhaseStatus::t_max) return finish(LostReason::t_max);
        if (p2.status == detail::PhaseStatus::node_trap) return finish(LostReason::node_trap);
        return second_hit(p2.t, p2.y[0]);
    }

    const auto p2 = detail::integrate_phase<4>(vel4, p1.y, p1.t, scr.t_max, {rs}, scr, opt.integrator, rec4);
    if (p2.status == detail::PhaseStatus::t_max) return finish(LostReason::t_max);
    if (p2.status == detail::PhaseStatus::node_trap) return finish(LostReason::node_trap);
    return second_hit(p2.t, p2.y[rs]);
}

// ---------------------------------------------------------------------------
// Ensembles

inline SourceParams source_params(const InternalConfig& c) {
    return {c.sigma_x, c.sigma_y, c.l_x, c.l_y, c.u_x, c.u_y, c.mass, c.g, c.hbar};
}

inline TwoParticleState make_state(const InternalConfig& c) {
    return make_entangled_state(source_params(c), c.eta);
}

struct EnsembleOptions {
    std::size_t first_event = 0;
    std::size_t n_trajectories = 0;  // trajectories kept for the first events
    std::size_t progress_every = 0;  // 0 = silent
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct EnsembleResult {
    std::vector<DetectionRecord> records;
    std::vector<Trajectory> trajectories;
    std::size_t lost() const {
        std::size_t k = 0;
        for (const auto& r : records) k += !r.kept();
        return k;
    }
};

/// Samples n_events initial points and integrates each pair. Records come
/// back ordered by event id whatever the worker count.
inline EnsembleResult run_ensemble(const InternalConfig& c, const Screens& scr, const EnsembleOptions& eo = {}) {
    const TwoParticleState s = make_state(c);
    PairOptions po{c.collapse_enabled, c.integrator};
    EnsembleResult out;
    out.records.resize(c.n_events);
    out.trajectories.resize(std::min(eo.n_trajectories, c.n_events));
    std::atomic<std::size_t> done{0};
    std::mutex progress_mu;
    parallel_for(c.n_events, c.workers, [&](std::size_t i) {
        const std::uint64_t id = eo.first_event + i;
        const auto x0 = sample_positions(s, 1, c.seed, 0.0, id).front();
        Trajectory* tr = i < out.trajectories.size() ? &out.trajectories[i] : nullptr;
        out.records[i] = integrate_pair(x0, s, scr, po, tr, id);
        const std::size_t d = ++done;
        if (eo.progress && eo.progress_every && d % eo.progress_every == 0) {
            std::lock_guard lk(progress_mu);
            eo.progress(d, c.n_events);
        }
    });
    return out;
}

}  // namespace arrival
