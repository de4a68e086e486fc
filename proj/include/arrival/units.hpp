#pragma once

// Physical constants and the internal unit system.
//
// Internally every quantity is expressed in micrometres, milliseconds and
// units of 1e-27 kg. In this system hbar ~ 105.46 and g ~ 9.81, so the
// exponents of the Gaussian packets stay O(1)-O(1e8) instead of involving
// 1e-34 divisors.

#include <map>
#include <stdexcept>
#include <string>

namespace arrival {

namespace si {
// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;           // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double standard_gravity = 9.81;          // m/s^2
}  // namespace si

/// Conversion factors from SI to internal units.
namespace scale {
inline constexpr double length = 1e6;   // m  -> um
inline constexpr double time = 1e3;     // s  -> ms
inline constexpr double mass = 1e27;    // kg -> 1e-27 kg
inline constexpr double velocity = length / time;
inline constexpr double acceleration = length / (time * time);
inline constexpr double action = mass * length * length / time;
inline constexpr double wavenumber = 1.0 / length;
inline constexpr double momentum = mass * velocity;
}  // namespace scale

struct PhysicalConstants {
    double hbar = si::hbar;
    double g = si::standard_gravity;
    std::map<std::string, double> species_mass;  // kg

    double mass_of(const std::string& species) const {
        auto it = species_mass.find(species);
        if (it == species_mass.end())
            throw std::invalid_argument("unknown species '" + species + "'");
        return it->second;
    }

    void validate() const {
        if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
        if (!(g >= 0)) throw std::invalid_argument("g must be non-negative");
        for (const auto& [name, m] : species_mass)
            if (!(m > 0)) throw std::invalid_argument("mass of '" + name + "' must be positive");
    }
};

/// Atomic masses (AME2016 / CODATA 2018), converted with the unified atomic
/// mass unit above.
inline PhysicalConstants default_constants() {
    PhysicalConstants c;
    const double u = si::atomic_mass_unit;
    c.species_mass = {
        {"helium-4", 4.002603254 * u},
        {"lithium-7", 7.016003437 * u},
        {"sodium-23", 22.9897692820 * u},
        {"rubidium-87", 86.909180531 * u},
        {"cesium-133", 132.905451961 * u},
    };
    return c;
}

/// Constants as seen by the numerical core.
struct InternalConstants {
    double hbar;
    double g;
};

inline InternalConstants to_internal(const PhysicalConstants& c) {
    return {c.hbar * scale::action, c.g * scale::acceleration};
}

}  // namespace arrival
