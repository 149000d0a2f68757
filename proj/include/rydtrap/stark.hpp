#pragma once

#include <cstdlib>
#include <string>

#include "rydtrap/units.hpp"

namespace rydtrap::atom {

/// Hydrogenic level in the parabolic basis |n k m>, k = n1 - n2.
struct RydbergLevel {
    int n = 0;
    int m = 0;
    int k = 0;
    std::string label = "generic";

    /// Throws ConfigError when the quantum numbers are inconsistent.
    void validate() const;

    bool circular() const { return std::abs(m) == n - 1; }
    bool same_state(const RydbergLevel& o) const { return n == o.n && m == o.m && k == o.k; }

    static RydbergLevel e();
    /// n = 50 circular level.
    static RydbergLevel g();
    /// n = 51, m = 49 Stark level; k = -1 gives a g-i frequency that
    /// decreases with field at 1 MHz/(V/m).
    static RydbergLevel i(int k = -1);
};

enum class Polarization { pi, sigma_plus, sigma_minus };

Polarization polarization_from_string(const std::string& s);
std::string to_string(Polarization p);

struct StarkParams {
    double validity_cap = 1e4;      // V/m
    double t_sp = 30e-3;            // s, circular-state radiative lifetime
    int i_k = -1;
    bool exact = false;             // diagonalize instead of 2nd-order formula
    int exact_extra_manifolds = 6;
    double mass = units::rb85_mass; // kg
};

/// Stark energies, couplings and decay rates for hydrogenic Rydberg levels.
/// Frequencies are angular (rad/s) unless the name says hz.
class StarkModel {
public:
    StarkModel() : StarkModel(StarkParams{}) {}
    explicit StarkModel(const StarkParams& p);

    const StarkParams& params() const { return p_; }
    RydbergLevel level_e() const { return RydbergLevel::e(); }
    RydbergLevel level_g() const { return RydbergLevel::g(); }
    RydbergLevel level_i() const { return RydbergLevel::i(p_.i_k); }

    /// Coefficients of shift/h = c1 E + c2 E^2 (Hz per V/m, Hz per (V/m)^2).
    double first_order_hz(const RydbergLevel& l) const;
    double second_order_hz(const RydbergLevel& l) const;

    /// Energy shift / hbar at field magnitude E (V/m). Range error above
    /// the validity cap or for negative E.
    double stark_shift(const RydbergLevel& l, double E) const;
    /// d(stark_shift)/dE, rad/s per V/m.
    double stark_slope(const RydbergLevel& l, double E) const;

    /// Bare energy difference E(a) - E(b) / hbar at zero field.
    double bare_frequency(const RydbergLevel& a, const RydbergLevel& b) const;
    /// e-g transition angular frequency at field E.
    double omega_eg(double E) const;
    double omega_eg0() const { return omega_eg0_; }

    /// Half the second derivative of (omega_a - omega_b) at E = 0,
    /// rad/s per (V/m)^2. Defaults to the e/g pair.
    double differential_polarizability() const;
    double differential_polarizability(const RydbergLevel& a, const RydbergLevel& b) const;

    /// Gamma_sp sin^2 theta + Gamma_s.
    double residual_se_rate(double theta, double surface_rate) const;
    double gamma_sp() const { return 1.0 / p_.t_sp; }

    /// Dipole element in atomic units (e a0). pi: <a|z|b>. sigma+-: the
    /// spherical component r_{+-1} taken from the lower-m level to the
    /// upper one, so the result is symmetric in (a, b). Zero when the
    /// selection rules forbid. Supported n: 47..55.
    double dipole_matrix_element(const RydbergLevel& a, const RydbergLevel& b, Polarization pol) const;

private:
    StarkParams p_;
    double omega_eg0_ = 0.0;
};

}  // namespace rydtrap::atom
