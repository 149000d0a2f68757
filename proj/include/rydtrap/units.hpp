#pragma once

#include <numbers>

namespace rydtrap::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact / recommended values, SI.
inline constexpr double planck = 6.62607015e-34;          // J s
inline constexpr double hbar = planck / two_pi;           // J s
inline constexpr double boltzmann = 1.380649e-23;         // J / K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double standard_gravity = 9.81;          // m / s^2

// Atomic units (infinite nuclear mass).
inline constexpr double au_field = 5.14220674763e11;      // V/m per a.u. of field
inline constexpr double au_frequency = 6.579683920502e15; // Hz per Hartree
inline constexpr double bohr_radius = 5.29177210903e-11;  // m

inline constexpr double rb85_mass = 84.911789738 * atomic_mass_unit;

inline constexpr double micro = 1e-6;
inline constexpr double milli = 1e-3;

}  // namespace rydtrap::units
