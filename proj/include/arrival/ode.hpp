#pragma once

// Dormand-Prince 5(4) stepper with Hairer's continuous extension.
//
// The right-hand side reports failure (e.g. a wave-function node) by
// returning false; the stepper treats that like an error-test failure and
// shrinks the step.

#include <algorithm>
#include <array>
#include <cmath>

namespace arrival {

template <std::size_t D>
using OdeVec = std::array<double, D>;

/// Interpolant over one accepted step, y(t0 + theta h), theta in [0, 1].
template <std::size_t D>
struct DenseStep {
    double t0 = 0.0, h = 0.0;
    std::array<OdeVec<D>, 5> r{};

    OdeVec<D> operator()(double t) const {
        const double th = (t - t0) / h, th1 = 1.0 - th;
        OdeVec<D> y;
        for (std::size_t i = 0; i < D; ++i)
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        return y;
    }
    double component(std::size_t i, double t) const {
        const double th = (t - t0) / h, th1 = 1.0 - th;
        return r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
    }
    double t1() const { return t0 + h; }
};

struct StepControl {
    double rtol = 1e-9;
    double atol = 1e-9;
    double h_min = 1e-9;
    double h_max = 1e30;
    double safety = 0.9;
};

enum class StepStatus { accepted, rejected, rhs_failed, too_small };

template <std::size_t D>
class DormandPrince {
public:
    explicit DormandPrince(StepControl c) : c_(c) {}

    /// Starts a fresh integration at (t, y). Returns false if f fails there.
    template <class F>
    bool reset(F& f, double t, const OdeVec<D>& y, double h) {
        t_ = t;
        y_ = y;
        h_ = h;
        return f(t_, y_, k1_);
    }

    double t() const { return t_; }
    double h() const { return h_; }
    const OdeVec<D>& y() const { return y_; }
    const OdeVec<D>& dydt() const { return k1_; }
    const DenseStep<D>& dense() const { return dense_; }
    std::size_t accepted_steps() const { return accepted_; }
    std::size_t rejected_steps() const { return rejected_; }

    /// Attempts one step of at most `h_cap`. On acceptance the state
    /// advances and dense() describes the step just taken.
    template <class F>
    StepStatus step(F& f, double h_cap) {
        const double h = std::min(h_, h_cap);
        if (h < c_.h_min) return StepStatus::too_small;
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                         a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                         a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                         a75 = -2187.0 / 6784, a76 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                         e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
        constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                         d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                         d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

        OdeVec<D> k2, k3, k4, k5, k6, k7, tmp, y1;
        auto fail = [&] {
            h_ = 0.25 * h;
            ++rejected_;
            return StepStatus::rhs_failed;
        };
        for (std::size_t i = 0; i < D; ++i) tmp[i] = y_[i] + h * a21 * k1_[i];
        if (!f(t_ + c2 * h, tmp, k2)) return fail();
        for (std::size_t i = 0; i < D; ++i) tmp[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
        if (!f(t_ + c3 * h, tmp, k3)) return fail();
        for (std::size_t i = 0; i < D; ++i) tmp[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
        if (!f(t_ + c4 * h, tmp, k4)) return fail();
        for (std::size_t i = 0; i < D; ++i)
            tmp[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        if (!f(t_ + c5 * h, tmp, k5)) return fail();
        for (std::size_t i = 0; i < D; ++i)
            tmp[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        if (!f(t_ + h, tmp, k6)) return fail();
        for (std::size_t i = 0; i < D; ++i)
            y1[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        if (!f(t_ + h, y1, k7)) return fail();

        double err = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            const double e =
                h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = c_.atol + c_.rtol * std::max(std::abs(y_[i]), std::abs(y1[i]));
            err = std::max(err, std::abs(e) / sc);
        }
        if (!std::isfinite(err)) return fail();
        if (err > 1.0) {
            h_ = h * std::max(0.2, c_.safety * std::pow(err, -0.2));
            ++rejected_;
            return StepStatus::rejected;
        }
        dense_.t0 = t_;
        dense_.h = h;
        for (std::size_t i = 0; i < D; ++i) {
            const double dy = y1[i] - y_[i];
            const double bspl = h * k1_[i] - dy;
            dense_.r[0][i] = y_[i];
            dense_.r[1][i] = dy;
            dense_.r[2][i] = bspl;
            dense_.r[3][i] = dy - h * k7[i] - bspl;
            dense_.r[4][i] =
                h * (d1 * k1_[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        t_ += h;
        y_ = y1;
        k1_ = k7;
        const double grow = err == 0.0 ? 5.0 : std::min(5.0, c_.safety * std::pow(err, -0.2));
        h_ = std::min(c_.h_max, h * std::max(grow, 0.2));
        ++accepted_;
        return StepStatus::accepted;
    }

    /// Shrinks the next trial step (node clamping).
    void clamp_step(double h) { h_ = std::min(h_, h); }

private:
    StepControl c_;
    double t_ = 0.0, h_ = 0.0;
    OdeVec<D> y_{}, k1_{};
    DenseStep<D> dense_{};
    std::size_t accepted_ = 0, rejected_ = 0;
};

/// Finds t in [a, b] where g(t) changes sign (g(a) > 0 >= g(b)) by bisection,
/// to |dt| <= rel_tol * |t| (with an absolute floor).
template <class G>
double bisect_crossing(G&& g, double a, double b, double rel_tol, double abs_floor = 1e-15) {
    double ga = g(a);
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (b - a <= std::max(rel_tol * std::abs(m), abs_floor)) break;
        const double gm = g(m);
        if ((gm > 0) == (ga > 0)) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace arrival
