#pragma once

// One-dimensional Schroedinger evolution above an absorbing detector surface.
//
// Grid y_j = y_boundary + j dy, j = 0..n-1, with the detector at j = 0. The
// boundary condition n.grad psi = i kappa psi (outward normal -y) reads
// d psi/dy = -i kappa psi there and is closed with the ghost value
// psi_{-1} = psi_1 + 2 i kappa dy psi_0. Beyond the far end psi = 0.
//
// With the trapezoid norm (weight 1/2 at j = 0) the Crank-Nicolson step
// satisfies exactly
//   N^{n+1} - N^n = -dt (hbar kappa / m) |(psi_0^n + psi_0^{n+1}) / 2|^2,
// so norm + absorbed is conserved to rounding.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaussian.hpp"

namespace arrival {

/// Detector wavenumber matched to the classical speed after falling `drop`.
inline double kappa0(double mass, double drop, double g, double hbar) {
    return mass * std::sqrt(2.0 * g * drop) / hbar;
}

struct RobinSolverConfig {
    double kappa = 1.0;
    double y_boundary = 0.0;  // detector plane
    double y_far = 1.0;       // far end, psi = 0 beyond it
    int n_grid = 4096;
    double dt = 1e-3;
    double t_max = 1.0;
    double mass = 1.0;
    double hbar = 1.0;
    double g = 0.0;  // V(y) = m g y

    double dy() const { return (y_far - y_boundary) / (n_grid - 1); }
    double y(int j) const { return y_boundary + j * dy(); }
    void validate() const {
        if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
        if (n_grid < 256) throw std::invalid_argument("n_grid must be at least 256");
        if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
        if (!(y_far > y_boundary)) throw std::invalid_argument("y_far must lie above y_boundary");
        if (!(mass > 0) || !(hbar > 0)) throw std::invalid_argument("mass and hbar must be positive");
    }
};

struct RobinGridState {
    std::vector<cplx> psi;
    double t = 0.0;
    double absorbed = 0.0;  // cumulative probability lost through the boundary

    /// Trapezoid norm with the boundary point weighted 1/2.
    double norm(double dy) const {
        if (psi.empty()) return 0.0;
        double s = 0.5 * std::norm(psi[0]);
        for (std::size_t j = 1; j < psi.size(); ++j) s += std::norm(psi[j]);
        return s * dy;
    }
};

/// Grid sampling of a function of y at t = 0.
inline RobinGridState initial_grid(const RobinSolverConfig& c, const std::function<cplx(double)>& f) {
    RobinGridState s;
    s.psi.resize(c.n_grid);
    for (int j = 0; j < c.n_grid; ++j) s.psi[j] = f(c.y(j));
    return s;
}

/// Crank-Nicolson stepper; the tridiagonal factorisation is done once.
class RobinPropagator {
public:
    explicit RobinPropagator(const RobinSolverConfig& c) : c_(c) {
        c.validate();
        const int n = c.n_grid;
        const double dy = c.dy();
        const double k = c.hbar * c.hbar / (2.0 * c.mass);  // hbar^2 / 2m
        const cplx ia{0.0, c.dt / (2.0 * c.hbar)};            // i dt / 2 hbar
        diag_.resize(n);
        up_.resize(n);
        lo_.resize(n);
        for (int j = 0; j < n; ++j) {
            const double V = c.mass * c.g * c.y(j);
            diag_[j] = 2.0 * k / (dy * dy) + V;
            up_[j] = -k / (dy * dy);
            lo_[j] = -k / (dy * dy);
        }
        diag_[0] += cplx{0.0, -2.0 * k * c.kappa / dy};
        up_[0] = -2.0 * k / (dy * dy);
        // (1 + ia H) psi^{n+1} = (1 - ia H) psi^n; Thomas factorisation.
        b_.resize(n);
        cp_.resize(n);
        for (int j = 0; j < n; ++j) {
            const cplx a = ia * lo_[j], b = 1.0 + ia * diag_[j], cc = ia * up_[j];
            const cplx denom = j == 0 ? b : b - a * cp_[j - 1];
            if (std::abs(denom) < 1e-300) throw std::runtime_error("singular Crank-Nicolson system at row " + std::to_string(j));
            b_[j] = denom;
            cp_[j] = cc / denom;
        }
        ia_ = ia;
        flux_ = c.hbar * c.kappa / c.mass;
    }

    const RobinSolverConfig& config() const { return c_; }

    void step(RobinGridState& s) const {
        const int n = c_.n_grid;
        if (static_cast<int>(s.psi.size()) != n) throw std::invalid_argument("grid size mismatch");
        rhs_.resize(n);
        const auto& p = s.psi;
        for (int j = 0; j < n; ++j) {
            cplx h = diag_[j] * p[j];
            if (j > 0) h += lo_[j] * p[j - 1];
            if (j + 1 < n) h += up_[j] * p[j + 1];
            rhs_[j] = p[j] - ia_ * h;
        }
        const cplx old0 = p[0];
        // forward sweep
        rhs_[0] /= b_[0];
        for (int j = 1; j < n; ++j) rhs_[j] = (rhs_[j] - ia_ * lo_[j] * rhs_[j - 1]) / b_[j];
        for (int j = n - 2; j >= 0; --j) rhs_[j] -= cp_[j] * rhs_[j + 1];
        s.psi.swap(rhs_);
        s.absorbed += c_.dt * flux_ * std::norm(0.5 * (old0 + s.psi[0]));
        s.t += c_.dt;
    }

private:
    RobinSolverConfig c_;
    std::vector<cplx> diag_, up_, lo_, b_, cp_;
    mutable std::vector<cplx> rhs_;
    cplx ia_;
    double flux_ = 0.0;
};

/// Convenience wrapper: one step with a fresh propagator.
inline RobinGridState step_robin(const RobinGridState& g, const RobinSolverConfig& c) {
    RobinGridState out = g;
    RobinPropagator(c).step(out);
    return out;
}

/// Six-point Lagrange interpolation of grid values and their derivative at y.
/// Points outside the grid are extrapolated from the nearest stencil.
struct GridStencil {
    int j0 = 0;
    double w[6]{}, dw[6]{};

    GridStencil(double y, double y0, double dy, int n) {
        const double s = (y - y0) / dy;
        j0 = static_cast<int>(std::floor(s)) - 2;
        j0 = std::max(0, std::min(j0, n - 6));
        const double u = s - j0;
        for (int i = 0; i < 6; ++i) {
            double num = 1.0, den = 1.0;
            for (int m = 0; m < 6; ++m) {
                if (m == i) continue;
                num *= u - m;
                den *= i - m;
            }
            w[i] = num / den;
            double d = 0.0;
            for (int p = 0; p < 6; ++p) {
                if (p == i) continue;
                double prod = 1.0;
                for (int m = 0; m < 6; ++m)
                    if (m != i && m != p) prod *= u - m;
                d += prod;
            }
            dw[i] = d / den / dy;
        }
    }

    template <class V>
    void apply(const V& f, cplx& value, cplx& deriv) const {
        value = deriv = cplx{0.0, 0.0};
        for (int i = 0; i < 6; ++i) {
            value += w[i] * f[j0 + i];
            deriv += dw[i] * f[j0 + i];
        }
    }
};

}  // namespace arrival
