#pragma once

// Absorbing-boundary-rule ensembles.
//
// Both screens sit at one height y_b, so the detection surface is the union
// of the planes y1 = y_b and y2 = y_b. Every product term keeps its form:
// x-factors stay analytic and each distinct y-factor is evolved once on a
// Robin grid (both particles share the table). Trajectories advance in lock
// step with the grid by classical RK4 using snapshots at t, t + h/2, t + h.
//
// After a detection at (X, y_b, t_c) the detected particle's factors are
// evaluated there and folded into the term coefficients; the remaining
// particle then follows the same grid factors with the new coefficients,
// which is the exact conditional wave function of the n-particle rule.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "dynamics.hpp"
#include "parallel.hpp"
#include "robin.hpp"
#include "sampler.hpp"
#include "wave.hpp"

namespace arrival {

struct SurvivalPoint {
    double t;
    double fraction;   // trajectories with at least one particle undetected
    double wave_norm;  // ||Psi_t||^2 over the region above the detectors
};

/// Derived solver geometry for an ABR run (internal units).
struct AbrSetup {
    double y_boundary, y_far;
    double drop, fall_time;
    double kappa0, kappa;
    double dt, t_max;
    int n_grid;
    int steps_per_half;  // grid steps per RK4 half step
};

inline AbrSetup abr_setup(const InternalConfig& c) {
    if (c.y_left != c.y_right)
        throw ConfigError("y_left", "absorbing-boundary runs need both screens at the same height");
    if (!(c.y_left < 0)) throw ConfigError("y_left", "absorbing-boundary screens must lie below the slits");
    if (!(c.g > 0)) throw ConfigError("g", "absorbing-boundary runs need gravity");
    if (!(c.abr_kappa_over_kappa0 > 0)) throw ConfigError("kappa", "must be positive");
    AbrSetup s{};
    s.y_boundary = c.y_left;
    s.drop = -c.y_left;
    s.fall_time = fall_time(s.drop, c.g);
    s.kappa0 = kappa0(c.mass, s.drop, c.g, c.hbar);
    s.kappa = c.abr_kappa_over_kappa0 * s.kappa0;
    s.dt = c.abr_dt > 0 ? c.abr_dt : 2e-4 * s.fall_time;
    s.t_max = c.abr_t_max > 0 ? c.abr_t_max : 4.0 * s.fall_time;
    s.n_grid = c.abr_n_grid;
    s.steps_per_half = std::max(1, c.abr_grid_steps_per_half_step);
    // Components launched upwards at 8.5 momentum spreads turn around below
    // y_far; there |psi| stays under 1e-10 for the helium preset.
    const double v_up = std::abs(c.u_y) + 8.5 * c.hbar / (2.0 * c.mass * c.sigma_y);
    s.y_far = c.l_y + 10.0 * c.sigma_y + v_up * v_up / (2.0 * c.g);
    if (!(s.y_boundary < -c.l_y)) throw ConfigError("y_left", "screen must lie below both slits");
    return s;
}

struct AbrResult {
    AbrSetup setup{};
    std::vector<DetectionRecord> records;
    std::vector<Trajectory> trajectories;
    std::vector<SurvivalPoint> survival;
    std::size_t outward_violations = 0;
    double max_far_amplitude = 0.0;  // largest |psi| seen at the far grid end
    double max_norm_defect = 0.0;    // max |norm + absorbed - initial| over factors
};

namespace detail {

/// The wave function at one time: analytic x-factors and grid y-factors.
struct AbrSnapshot {
    double t = 0.0;
    std::array<std::vector<GaussianAtTime>, 2> x;  // particle 1, 2 factor tables
    const std::vector<RobinGridState>* y = nullptr;
};

class AbrField {
public:
    AbrField(const Superposition<2>& joint, const RobinSolverConfig& rc) : joint_(joint), rc_(rc) {
        for (std::size_t slot : {1u, 3u})
            for (const auto& g : joint.factors(slot))
                if (std::find(yfac_.begin(), yfac_.end(), g) == yfac_.end()) yfac_.push_back(g);
        for (const auto& t : joint.terms()) {
            TermMap m;
            m.log_c = t.log_coeff;
            m.x = {t.idx[0], t.idx[2]};
            for (int p = 0; p < 2; ++p) {
                const auto& g = joint.factors(2 * p + 1)[t.idx[2 * p + 1]];
                m.y[p] = static_cast<int>(std::find(yfac_.begin(), yfac_.end(), g) - yfac_.begin());
            }
            terms_.push_back(m);
        }
    }

    const std::vector<GaussianParams>& y_factors() const { return yfac_; }
    std::size_t n_terms() const { return terms_.size(); }
    const Superposition<2>& joint() const { return joint_; }

    AbrSnapshot snapshot(double t, const std::vector<RobinGridState>& y) const {
        AbrSnapshot s;
        s.t = t;
        s.y = &y;
        for (int p = 0; p < 2; ++p)
            for (const auto& g : joint_.factors(2 * p)) s.x[p].push_back(at_time(g, t, joint_.hbar()));
        return s;
    }

    /// Velocities of both particles. `coeff` (log, one per term) replaces
    /// the state's coefficients when given; `frozen` >= 0 marks a particle
    /// whose factors are already folded into `coeff` and ignored here.
    bool velocity(const AbrSnapshot& S, const std::array<double, 4>& q, const std::vector<cplx>* coeff,
                  int frozen, std::array<double, 4>& v) const {
        const double dy = rc_.dy();
        std::array<std::array<cplx, 8>, 2> yv{}, yd{};
        for (int p = 0; p < 2; ++p) {
            if (p == frozen) continue;
            const GridStencil st(q[2 * p + 1], rc_.y_boundary, dy, rc_.n_grid);
            for (std::size_t f = 0; f < yfac_.size(); ++f) st.apply((*S.y)[f].psi, yv[p][f], yd[p][f]);
        }
        std::array<cplx, Superposition<2>::max_terms> L{};
        double mx = neg_inf;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            cplx l = coeff ? (*coeff)[k] : terms_[k].log_c;
            for (int p = 0; p < 2; ++p)
                if (p != frozen) l += S.x[p][terms_[k].x[p]].log_value(q[2 * p]);
            L[k] = l;
            mx = std::max(mx, l.real());
        }
        if (!(mx > neg_inf)) return false;
        cplx sum{}, gx[2]{}, gy[2]{};
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const double re = L[k].real() - mx;
            if (re < -745.0) continue;
            const cplx w = std::polar(std::exp(re), L[k].imag());
            cplx a = w;
            for (int r = 0; r < 2; ++r)
                if (r != frozen) a *= yv[r][terms_[k].y[r]];
            sum += a;
            for (int r = 0; r < 2; ++r) {
                if (r == frozen) continue;
                gx[r] += a * S.x[r][terms_[k].x[r]].dlog(q[2 * r]);
                const int s = 1 - r;
                cplx b = w * yd[r][terms_[k].y[r]];
                if (s != frozen) b *= yv[s][terms_[k].y[s]];
                gy[r] += b;
            }
        }
        if (sum == cplx{0.0, 0.0} || !std::isfinite(std::abs(sum))) return false;
        const double k = joint_.hbar() / joint_.mass(0);
        for (int r = 0; r < 2; ++r) {
            if (r == frozen) {
                v[2 * r] = v[2 * r + 1] = 0.0;
                continue;
            }
            v[2 * r] = k * (gx[r] / sum).imag();
            v[2 * r + 1] = k * (gy[r] / sum).imag();
        }
        return std::isfinite(v[0] + v[1] + v[2] + v[3]);
    }

    /// Log coefficients after particle `det` (0/1) is found at (X, y_b) at
    /// t_c, given its y-factors' boundary values there.
    std::vector<cplx> collapsed(int det, double X, double t_c, const std::vector<cplx>& y_boundary_values) const {
        std::vector<cplx> out(terms_.size());
        const double hbar = joint_.hbar();
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const auto& xg = joint_.factors(2 * det)[terms_[k].x[det]];
            const cplx yb = y_boundary_values[terms_[k].y[det]];
            out[k] = terms_[k].log_c + log_gaussian_t(xg, X, t_c, hbar) +
                     (yb == cplx{0.0, 0.0} ? cplx{neg_inf, 0.0} : std::log(yb));
        }
        return out;
    }

    /// ||Psi||^2 from factor overlaps: x analytic, y on the grid.
    double norm2(const std::vector<RobinGridState>& y) const {
        const double dy = rc_.dy();
        const std::size_t nf = yfac_.size();
        std::vector<cplx> oy(nf * nf);
        for (std::size_t a = 0; a < nf; ++a)
            for (std::size_t b = 0; b < nf; ++b) {
                const auto& pa = y[a].psi;
                const auto& pb = y[b].psi;
                cplx s = 0.5 * std::conj(pa[0]) * pb[0];
                for (std::size_t j = 1; j < pa.size(); ++j) s += std::conj(pa[j]) * pb[j];
                oy[a * nf + b] = s * dy;
            }
        const double hbar = joint_.hbar();
        cplx total{};
        for (const auto& A : terms_)
            for (const auto& B : terms_) {
                cplx l = std::conj(A.log_c) + B.log_c;
                for (int p = 0; p < 2; ++p)
                    l += log_overlap(joint_.factors(2 * p)[A.x[p]], joint_.factors(2 * p)[B.x[p]], hbar);
                if (l.real() < -745.0) continue;
                cplx v = std::exp(l);
                for (int p = 0; p < 2; ++p) v *= oy[A.y[p] * nf + B.y[p]];
                total += v;
            }
        return total.real();
    }

private:
    struct TermMap {
        cplx log_c;
        std::array<int, 2> x{}, y{};
    };
    Superposition<2> joint_;
    RobinSolverConfig rc_;
    std::vector<GaussianParams> yfac_;
    std::vector<TermMap> terms_;
};

/// Cubic Lagrange interpolation of the boundary history at time t.
inline cplx boundary_at(const std::vector<cplx>& hist, double dt, double t) {
    const double s = t / dt;
    int j0 = static_cast<int>(std::floor(s)) - 1;
    j0 = std::max(0, std::min(j0, static_cast<int>(hist.size()) - 4));
    if (hist.size() < 4) return hist.back();
    const double u = s - j0;
    cplx v{};
    for (int i = 0; i < 4; ++i) {
        double w = 1.0;
        for (int m = 0; m < 4; ++m)
            if (m != i) w *= (u - m) / (i - m);
        v += w * hist[j0 + i];
    }
    return v;
}

}  // namespace detail

struct AbrOptions {
    std::size_t n_trajectories = 0;
};

/// Runs the ABR ensemble for the configuration's kappa (in units of kappa0).
inline AbrResult evolve_abr_ensemble(const InternalConfig& c, const AbrOptions& ao = {}) {
    AbrResult out;
    const AbrSetup su = abr_setup(c);
    out.setup = su;

    RobinSolverConfig rc;
    rc.kappa = su.kappa;
    rc.y_boundary = su.y_boundary;
    rc.y_far = su.y_far;
    rc.n_grid = su.n_grid;
    rc.dt = su.dt;
    rc.t_max = su.t_max;
    rc.mass = c.mass;
    rc.hbar = c.hbar;
    rc.g = c.g;
    const RobinPropagator prop(rc);

    const TwoParticleState s = make_state(c);
    const detail::AbrField field(s.joint, rc);
    const std::size_t nf = field.y_factors().size();

    std::vector<RobinGridState> grid;
    for (const auto& g : field.y_factors())
        grid.push_back(initial_grid(rc, [&](double y) { return gaussian_t(g, y, 0.0, c.hbar); }));
    std::vector<double> norm0;
    for (const auto& gs : grid) norm0.push_back(gs.norm(rc.dy()));
    std::vector<std::vector<cplx>> history(nf);
    for (std::size_t f = 0; f < nf; ++f) history[f].push_back(grid[f].psi[0]);

    const std::size_t n = c.n_events;
    out.records.resize(n);
    out.trajectories.resize(std::min(ao.n_trajectories, n));

    struct Ev {
        std::array<double, 4> q{};
        int phase = 0;  // 0: both in flight, 1: one detected, 2: done
        int detected = -1;
        Screen first = Screen::none;
        std::vector<cplx> coeff;
    };
    std::vector<Ev> ev(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x0 = sample_positions(s, 1, c.seed, 0.0, i).front();
        ev[i].q = pack(x0.r1, x0.r2);
        out.records[i].event_id = i;
        if (!(x0.r1.y > su.y_boundary) || !(x0.r2.y > su.y_boundary)) {
            out.records[i].lost = LostReason::start_below;
            ev[i].phase = 2;
        }
        if (i < out.trajectories.size()) out.trajectories[i].knots.push_back({0.0, x0.r1, x0.r2});
    }

    const int m = su.steps_per_half;
    const double h = 2.0 * m * su.dt;
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(su.t_max / h - 1e-9));
    const double Xs = c.x_split;
    auto side = [&](double x) { return x < Xs ? Screen::left : Screen::right; };

    std::size_t remaining = 0;
    for (const auto& e : ev) remaining += e.phase < 2;
    double next_survival = 0.0;
    auto record_survival = [&](double t) {
        if (c.abr_survival_cadence > 0 && t + 1e-12 < next_survival) return;
        next_survival = t + c.abr_survival_cadence;
        out.survival.push_back({t, static_cast<double>(remaining) / static_cast<double>(n), field.norm2(grid)});
    };
    record_survival(0.0);

    std::vector<RobinGridState> g0, gh;
    std::vector<std::size_t> active;
    std::vector<unsigned char> newly_done(n);
    std::vector<std::size_t> violations(n);

    for (std::size_t step = 0; step < n_steps && remaining > 0; ++step) {
        const double t = step * h;
        g0 = grid;
        for (int r = 0; r < m; ++r) {
            for (std::size_t f = 0; f < nf; ++f) {
                prop.step(grid[f]);
                history[f].push_back(grid[f].psi[0]);
            }
        }
        gh = grid;
        for (int r = 0; r < m; ++r) {
            for (std::size_t f = 0; f < nf; ++f) {
                prop.step(grid[f]);
                history[f].push_back(grid[f].psi[0]);
            }
        }
        for (std::size_t f = 0; f < nf; ++f)
            out.max_far_amplitude = std::max(out.max_far_amplitude, std::abs(grid[f].psi.back()));
        const auto S0 = field.snapshot(t, g0), Sh = field.snapshot(t + 0.5 * h, gh),
                   S1 = field.snapshot(t + h, grid);

        active.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (ev[i].phase < 2) active.push_back(i);

        parallel_for(active.size(), c.workers, [&](std::size_t a) {
            const std::size_t i = active[a];
            Ev& e = ev[i];
            DetectionRecord& rec = out.records[i];
            const std::vector<cplx>* coeff = e.phase == 1 && c.collapse_enabled ? &e.coeff : nullptr;
            const int frozen = e.phase == 1 && c.collapse_enabled ? e.detected : -1;
            const int moving_mask = e.phase == 0 ? 3 : (e.detected == 0 ? 2 : 1);
            auto f = [&](const detail::AbrSnapshot& S, const std::array<double, 4>& q, std::array<double, 4>& v) {
                if (!field.velocity(S, q, coeff, frozen, v)) return false;
                for (int p = 0; p < 2; ++p)
                    if (!(moving_mask >> p & 1)) v[2 * p] = v[2 * p + 1] = 0.0;
                return true;
            };
            std::array<double, 4> k1, k2, k3, k4, tmp;
            const auto& q = e.q;
            bool ok = f(S0, q, k1);
            for (int d = 0; ok && d < 4; ++d) tmp[d] = q[d] + 0.5 * h * k1[d];
            ok = ok && f(Sh, tmp, k2);
            for (int d = 0; ok && d < 4; ++d) tmp[d] = q[d] + 0.5 * h * k2[d];
            ok = ok && f(Sh, tmp, k3);
            for (int d = 0; ok && d < 4; ++d) tmp[d] = q[d] + h * k3[d];
            ok = ok && f(S1, tmp, k4);
            if (!ok) {
                rec.lost = LostReason::node_trap;
                e.phase = 2;
                newly_done[i] = 1;
                return;
            }
            std::array<double, 4> qn;
            for (int d = 0; d < 4; ++d) qn[d] = q[d] + h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);

            // crossings within this step, by linear interpolation
            std::array<double, 2> theta{2.0, 2.0};
            for (int p = 0; p < 2; ++p) {
                if (!(moving_mask >> p & 1)) continue;
                const double y0 = q[2 * p + 1], y1 = qn[2 * p + 1];
                if (y1 <= su.y_boundary) theta[p] = (y0 - su.y_boundary) / (y0 - y1);
            }
            std::array<int, 2> order{0, 1};
            if (theta[1] * h < theta[0] * h - 1e-9) order = {1, 0};
            for (int p : order) {
                if (theta[p] > 1.0) continue;
                const double tc = t + theta[p] * h;
                const double xc = q[2 * p] + theta[p] * (qn[2 * p] - q[2 * p]);
                // outward check: the normal velocity at the crossing point
                std::array<double, 4> qc = qn, vc{};
                qc[2 * p] = xc;
                qc[2 * p + 1] = su.y_boundary;
                if (field.velocity(S1, qc, coeff, frozen, vc) && !(vc[2 * p + 1] < 0.0)) ++violations[i];
                const Screen sd = side(xc);
                if (e.phase == 0) {
                    e.phase = 1;
                    e.detected = p;
                    e.first = sd;
                    rec.first = sd;
                    rec.set(sd, tc, xc);
                    if (c.collapse_enabled) {
                        std::vector<cplx> yb(nf);
                        for (std::size_t ff = 0; ff < nf; ++ff) yb[ff] = detail::boundary_at(history[ff], su.dt, tc);
                        e.coeff = field.collapsed(p, xc, tc, yb);
                        double mxc = neg_inf;
                        for (const auto& l : e.coeff) mxc = std::max(mxc, l.real());
                        rec.collapse_applied = true;
                        if (!(mxc > std::log(1e-300))) {
                            rec.lost = LostReason::degenerate_collapse;
                            e.phase = 2;
                            newly_done[i] = 1;
                            return;
                        }
                    }
                    qn[2 * p] = xc;
                    qn[2 * p + 1] = su.y_boundary;
                } else {
                    if (sd == e.first) rec.lost = LostReason::wrong_side;
                    else rec.set(sd, tc, xc);
                    e.phase = 2;
                    newly_done[i] = 1;
                    qn[2 * p] = xc;
                    qn[2 * p + 1] = su.y_boundary;
                }
            }
            e.q = qn;
            if (i < out.trajectories.size())
                out.trajectories[i].knots.push_back({t + h, {qn[0], qn[1]}, {qn[2], qn[3]}});
        });
        for (std::size_t i : active) {
            if (newly_done[i]) {
                --remaining;
                newly_done[i] = 0;
            }
        }
        record_survival(t + h);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (ev[i].phase < 2) out.records[i].lost = LostReason::t_max;
        out.outward_violations += violations[i];
    }
    for (std::size_t f = 0; f < nf; ++f)
        out.max_norm_defect =
            std::max(out.max_norm_defect, std::abs(grid[f].norm(rc.dy()) + grid[f].absorbed - norm0[f]));
    for (std::size_t k = 0; k < out.trajectories.size(); ++k) {
        out.trajectories[k].end = out.records[k].lost;
        decimate(out.trajectories[k].knots, c.integrator.max_knots);
    }
    return out;
}

/// Survival fraction at time t (step interpolation of the sampled curve).
inline double survival_at(const std::vector<SurvivalPoint>& s, double t, bool wave_norm = false) {
    if (s.empty()) return 1.0;
    double v = wave_norm ? s.front().wave_norm : s.front().fraction;
    for (const auto& p : s) {
        if (p.t > t + 1e-12) break;
        v = wave_norm ? p.wave_norm : p.fraction;
    }
    return v;
}

}  // namespace arrival
