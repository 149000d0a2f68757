#include <doctest.h>

#include <cmath>

#include "rydtrap/errors.hpp"
#include "rydtrap/hydrogen.hpp"
#include "rydtrap/stark.hpp"

using namespace rydtrap;
using namespace rydtrap::atom;

namespace {
constexpr double hz_per_au_field = units::au_frequency / units::au_field;  // Hz per (V/m) per a.u.

// Textbook hydrogen parabolic-state Stark coefficients (atomic units).
double first_order_oracle(int n, int k) { return 1.5 * n * k; }
double second_order_oracle(int n, int k, int m) {
    return -(1.0 / 16.0) * std::pow(n, 4) * (17.0 * n * n - 3.0 * k * k - 9.0 * m * m + 19.0);
}
}  // namespace

TEST_SUITE("stark_atom") {

TEST_CASE("levels") {
    CHECK(RydbergLevel::e().circular());
    CHECK(RydbergLevel::g().circular());
    CHECK_FALSE(RydbergLevel::i().circular());
    CHECK_THROWS_AS((RydbergLevel{50, 50, 0, "bad"}.validate()), ConfigError);
    CHECK_THROWS_AS((RydbergLevel{51, 49, 0, "parity"}.validate()), ConfigError);
}

TEST_CASE("zero-field e-g frequency is the hydrogen value") {
    StarkModel s;
    double oracle = 0.5 * (1.0 / (50.0 * 50.0) - 1.0 / (51.0 * 51.0)) * units::au_frequency;
    CHECK(s.omega_eg0() / units::two_pi == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(oracle == doctest::Approx(51.0994e9).epsilon(1e-5));
}

TEST_CASE("Stark coefficients match the closed-form parabolic expressions") {
    StarkModel s;
    for (auto l : {RydbergLevel::e(), RydbergLevel::g(), RydbergLevel::i(-1), RydbergLevel::i(1)}) {
        CAPTURE(l.label);
        CHECK(s.first_order_hz(l) == doctest::Approx(first_order_oracle(l.n, l.k) * hz_per_au_field));
        double c2 = second_order_oracle(l.n, l.k, l.m) * units::au_frequency / (units::au_field * units::au_field);
        CHECK(s.second_order_hz(l) == doctest::Approx(c2).epsilon(1e-9));
    }
    // i level: g-i frequency falls by about 1 MHz per V/m.
    CHECK(s.first_order_hz(RydbergLevel::i(-1)) == doctest::Approx(-0.979e6).epsilon(1e-3));
}

TEST_CASE("second-order formula agrees with multi-manifold diagonalization at 50 V/m") {
    const double F = 50.0 / units::au_field;
    for (int n : {50, 51})
        for (int m : {49, 50}) {
            if (m > n - 1) continue;
            for (int k = -(n - m - 1); k <= n - m - 1; k += 2) {
                CAPTURE(n);
                CAPTURE(m);
                CAPTURE(k);
                double pert = hydrogen::first_order(n, k) * F + hydrogen::second_order(n, k, m) * F * F;
                double exact = hydrogen::exact_stark_shift(n, k, m, F);
                CHECK(std::abs(exact - pert) <= 1e-3 * std::abs(exact));
            }
        }
}

TEST_CASE("exact option follows the perturbative shift at low field") {
    StarkParams p;
    p.exact = true;
    StarkModel exact(p), pert;
    for (double E : {10.0, 400.0})
        CHECK(exact.stark_shift(RydbergLevel::g(), E) ==
              doctest::Approx(pert.stark_shift(RydbergLevel::g(), E)).epsilon(1e-3));
}

TEST_CASE("residual spontaneous emission") {
    StarkModel s;
    // 1 / (Gamma_sp sin^2 theta) with T_sp = 30 ms, theta = 10 mrad.
    double oracle = 30e-3 / std::pow(std::sin(0.01), 2);
    CHECK(1.0 / s.residual_se_rate(0.01, 0.0) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(oracle == doctest::Approx(300.0).epsilon(1e-3));
    CHECK(s.residual_se_rate(0.0, 0.0) == 0.0);
    CHECK(s.residual_se_rate(0.0, 2.0) == 2.0);
}

TEST_CASE("validity cap and sign errors") {
    StarkModel s;
    CHECK_THROWS_AS(s.stark_shift(RydbergLevel::g(), 2e4), RangeError);
    CHECK_THROWS_AS(s.stark_shift(RydbergLevel::g(), -1.0), RangeError);
}

TEST_CASE("dipole selection rules and symmetry") {
    StarkModel s;
    auto e = RydbergLevel::e(), g = RydbergLevel::g(), i = RydbergLevel::i();
    CHECK(s.dipole_matrix_element(e, g, Polarization::pi) == 0.0);
    CHECK(s.dipole_matrix_element(g, i, Polarization::sigma_plus) == 0.0);
    double d = s.dipole_matrix_element(e, g, Polarization::sigma_plus);
    CHECK(std::abs(d) > 1000.0);
    CHECK(s.dipole_matrix_element(g, e, Polarization::sigma_plus) == doctest::Approx(d));
    CHECK(std::abs(s.dipole_matrix_element(g, i, Polarization::pi)) == doctest::Approx(177.64).epsilon(1e-4));
}

TEST_CASE("fast angular coefficients match the Racah formula") {
    double worst = 0.0;
    for (int l = 0; l < 40; l += 3)
        for (int m = -l; m <= l; m += 2)
            for (int q = -1; q <= 1; ++q)
                for (int l2 : {l - 1, l + 1}) {
                    if (l2 < 0) continue;
                    worst = std::max(worst, std::abs(hydrogen::angular_c1(l2, m + q, l, m, q) -
                                                     hydrogen::angular_c1_racah(l2, m + q, l, m, q)));
                }
    CHECK(worst < 1e-12);
}

TEST_CASE("radial integral closed form for circular neighbours") {
    // <2p| r |1s> = 2^7 sqrt(6) / 3^5; large n approaches the orbit radius n^2.
    CHECK(std::abs(hydrogen::radial_integral(2, 1, 1, 0)) == doctest::Approx(128.0 * std::sqrt(6.0) / 243.0).epsilon(1e-12));
    double r = std::abs(hydrogen::radial_integral(51, 50, 50, 49));
    CHECK(r / (50.5 * 50.5) == doctest::Approx(1.0).epsilon(0.02));
}

}
