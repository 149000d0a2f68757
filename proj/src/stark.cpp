#include "rydtrap/stark.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "rydtrap/errors.hpp"
#include "rydtrap/hydrogen.hpp"

namespace rydtrap::atom {

namespace hy = hydrogen;

namespace {

constexpr double hz_per_au_field = units::au_frequency / units::au_field;
constexpr int min_supported_n = 47;
constexpr int max_supported_n = 55;

std::string describe(const RydbergLevel& l) {
    std::ostringstream os;
    os << l.label << "(n=" << l.n << ", m=" << l.m << ", k=" << l.k << ")";
    return os.str();
}

}  // namespace

void RydbergLevel::validate() const {
    if (n < 1) throw ConfigError("level " + describe(*this) + ": n must be positive");
    const int am = std::abs(m);
    if (am > n - 1) throw ConfigError("level " + describe(*this) + ": |m| must not exceed n-1");
    if (std::abs(k) > n - 1 - am) throw ConfigError("level " + describe(*this) + ": |k| must not exceed n-1-|m|");
    if ((n - 1 - am - k) % 2 != 0) throw ConfigError("level " + describe(*this) + ": k and n-1-|m| differ in parity");
}

RydbergLevel RydbergLevel::e() { return {51, 50, 0, "e"}; }
RydbergLevel RydbergLevel::g() { return {50, 49, 0, "g"}; }
RydbergLevel RydbergLevel::i(int k) {
    RydbergLevel l{51, 49, k, "i"};
    l.validate();
    return l;
}

Polarization polarization_from_string(const std::string& s) {
    if (s == "pi") return Polarization::pi;
    if (s == "sigma+") return Polarization::sigma_plus;
    if (s == "sigma-") return Polarization::sigma_minus;
    throw ConfigError("unknown polarization '" + s + "' (expected pi, sigma+, sigma-)");
}

std::string to_string(Polarization p) {
    switch (p) {
        case Polarization::pi: return "pi";
        case Polarization::sigma_plus: return "sigma+";
        case Polarization::sigma_minus: return "sigma-";
    }
    return "?";
}

StarkModel::StarkModel(const StarkParams& p) : p_(p) {
    if (!(p_.validity_cap > 0.0)) throw ConfigError("Stark validity cap must be positive");
    if (!(p_.t_sp > 0.0)) throw ConfigError("spontaneous lifetime must be positive");
    if (!(p_.mass > 0.0)) throw ConfigError("atomic mass must be positive");
    if (p_.exact_extra_manifolds < 0) throw ConfigError("exact_extra_manifolds must be >= 0");
    RydbergLevel::i(p_.i_k);
    omega_eg0_ = bare_frequency(level_e(), level_g());
}

double StarkModel::first_order_hz(const RydbergLevel& l) const {
    return hy::first_order(l.n, l.k) * hz_per_au_field;
}

double StarkModel::second_order_hz(const RydbergLevel& l) const {
    return hy::second_order(l.n, l.k, l.m) * hz_per_au_field / units::au_field;
}

double StarkModel::stark_shift(const RydbergLevel& l, double E) const {
    if (!(E >= 0.0) || E > p_.validity_cap) {
        std::ostringstream os;
        os << "field " << E << " V/m outside the Stark model range [0, " << p_.validity_cap << "]";
        throw RangeError(os.str());
    }
    l.validate();
    if (p_.exact && E > 0.0)
        return units::two_pi * units::au_frequency *
               hy::exact_stark_shift(l.n, l.k, l.m, E / units::au_field, p_.exact_extra_manifolds);
    return units::two_pi * (first_order_hz(l) * E + second_order_hz(l) * E * E);
}

double StarkModel::stark_slope(const RydbergLevel& l, double E) const {
    if (!(E >= 0.0) || E > p_.validity_cap) throw RangeError("field outside the Stark model range");
    if (p_.exact) {
        const double h = 1e-3;
        const double lo = std::max(0.0, E - h), hi = std::min(p_.validity_cap, E + h);
        return (stark_shift(l, hi) - stark_shift(l, lo)) / (hi - lo);
    }
    return units::two_pi * (first_order_hz(l) + 2.0 * second_order_hz(l) * E);
}

double StarkModel::bare_frequency(const RydbergLevel& a, const RydbergLevel& b) const {
    return units::two_pi * units::au_frequency * (hy::bare_energy(a.n) - hy::bare_energy(b.n));
}

double StarkModel::omega_eg(double E) const {
    return omega_eg0_ + stark_shift(level_e(), E) - stark_shift(level_g(), E);
}

double StarkModel::differential_polarizability() const {
    return differential_polarizability(level_e(), level_g());
}

double StarkModel::differential_polarizability(const RydbergLevel& a, const RydbergLevel& b) const {
    return units::two_pi * (second_order_hz(a) - second_order_hz(b));
}

double StarkModel::residual_se_rate(double theta, double surface_rate) const {
    if (!(surface_rate >= 0.0)) throw ConfigError("surface emission rate must be >= 0");
    const double s = std::sin(theta);
    return gamma_sp() * s * s + surface_rate;
}

double StarkModel::dipole_matrix_element(const RydbergLevel& a, const RydbergLevel& b, Polarization pol) const {
    for (const RydbergLevel* l : {&a, &b}) {
        l->validate();
        if (l->n < min_supported_n || l->n > max_supported_n)
            throw RangeError("level " + describe(*l) + " outside the supported range n = 47..55");
    }
    const auto& sa = hy::parabolic_state(a.n, a.k, a.m);
    const auto& sb = hy::parabolic_state(b.n, b.k, b.m);
    switch (pol) {
        case Polarization::pi:
            return a.m == b.m ? hy::parabolic_dipole(sa, sb, 0) : 0.0;
        case Polarization::sigma_plus:
            if (a.m == b.m + 1) return hy::parabolic_dipole(sa, sb, 1);
            if (b.m == a.m + 1) return hy::parabolic_dipole(sb, sa, 1);
            return 0.0;
        case Polarization::sigma_minus:
            if (a.m == b.m - 1) return hy::parabolic_dipole(sa, sb, -1);
            if (b.m == a.m - 1) return hy::parabolic_dipole(sb, sa, -1);
            return 0.0;
    }
    return 0.0;
}

}  // namespace rydtrap::atom
