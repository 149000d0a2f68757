#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rydtrap/dressing.hpp"
#include "rydtrap/errors.hpp"
#include "support.hpp"

using namespace rydtrap;
using namespace rydtrap::dressing;

namespace {
constexpr double two_pi = units::two_pi;

DressingConfig paper_like(double omega0_hz = 200e6, double delta0_hz = 556.23e6) {
    DressingConfig c;
    c.omega0 = two_pi * omega0_hz;
    c.delta0 = two_pi * delta0_hz;
    return c;
}
}  // namespace

TEST_SUITE("dressing") {

TEST_CASE("two-level g-i ladder matches the closed-form light shift") {
    atom::StarkModel stark;
    DressedAtom two(stark, BasisSpec::two_level_gi());
    REQUIRE(two.dimension() == 2);
    const auto g = atom::RydbergLevel::g(), i = atom::RydbergLevel::i();
    double worst = 0.0;
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b) {
            DressingConfig c = paper_like(5e6 * std::pow(100.0, a / 9.0), 450e6 + 1050e6 * b / 9.0);
            double E = 395.0 + a;
            // Detuning of i (one photon fewer) from g in the rotating frame.
            double delta = stark.bare_frequency(i, g) + stark.stark_shift(i, E) - stark.stark_shift(g, E) -
                           c.drive_frequency(stark);
            REQUIRE(delta > 0.0);
            double oracle = 0.5 * (delta - std::sqrt(delta * delta + c.omega0 * c.omega0));
            double got = two.dressed_energy(g, E, 0.0, c) - stark.stark_shift(g, E);
            worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
        }
    CHECK(worst < 1e-9);
}

TEST_CASE("undressed limit reproduces the bare transition") {
    atom::StarkModel stark;
    DressedAtom atom(stark);
    CHECK(atom.dimension() == default_basis_dimension);
    DressingConfig c = paper_like(0.0);
    for (double E : {380.0, 400.0, 405.0})
        CHECK(atom.dressed_transition(E, 0.0, c) == doctest::Approx(stark.omega_eg(E)).epsilon(1e-14));
}

TEST_CASE("config validation and hashing") {
    DressingConfig c = paper_like();
    CHECK_NOTHROW(c.validate());
    DressingConfig bad = c;
    bad.delta0 = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    DressingConfig p = c;
    p.perpendicular = false;
    CHECK(p.hash() != c.hash());
    CHECK(c.profile(0.0) == 1.0);
    CHECK(std::abs(c.profile(c.y_node)) < 1e-15);
}

TEST_CASE("optimizer finds the root of a synthetic flatness map") {
    // d1, d2 linear in log parameters with a known root.
    const double O = two_pi * 180e6, D = two_pi * 700e6;
    FlatnessFunction f = [&](double o, double d) {
        double a = std::log(o / O), b = std::log(d / D);
        return DressedAtom::Derivatives{two_pi * 50.0 * (a - 0.7 * b), two_pi * 20.0 * (a + b)};
    };
    auto r = optimize_flatness(f, two_pi * 200e6, two_pi * 556e6);
    CHECK(r.omega0 == doctest::Approx(O).epsilon(1e-6));
    CHECK(r.delta0 == doctest::Approx(D).epsilon(1e-6));
    CHECK_FALSE(r.trace.empty());
}

TEST_CASE("optimizer reports failure when d1 cannot vanish") {
    FlatnessFunction f = [](double, double) { return DressedAtom::Derivatives{two_pi * 10.0, 0.0}; };
    CHECK_THROWS_AS(optimize_flatness(f, two_pi * 200e6, two_pi * 556e6), OptimizationError);
}

TEST_CASE("dressed table interpolates the direct evaluation") {
    atom::StarkModel stark;
    DressedAtom atom(stark);
    DressingConfig c = paper_like(190.1685e6, 939.4737e6);
    DressedTable::Grid grid;
    grid.E_min = 395.0;
    grid.E_max = 405.0;
    grid.n_E = 11;
    auto t = build_dressed_table(atom, c, grid, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uE(395.0, 405.0), uth(0.0, 0.04);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        double E = uE(rng), th = uth(rng);
        worst = std::max(worst, std::abs(t(E, th) - atom.dressed_transition(E, th, c)));
    }
    CHECK(worst < two_pi * 0.1);
    CHECK_THROWS_AS(t(406.0, 0.0), RangeError);
    CHECK_THROWS_AS(t(400.0, 0.05), RangeError);
    CHECK(t(400.0, -0.01) == doctest::Approx(t(400.0, 0.01)));

    SUBCASE("cache round trip and corruption") {
        auto dir = testing::scratch_dir("table_cache");
        auto path = (dir / "t.bin").string();
        auto key = table_key(atom, c, grid);
        save_table(t, key, path);
        auto back = load_table(path, key);
        REQUIRE(back.has_value());
        CHECK((back->values() - t.values()).cwiseAbs().maxCoeff() == 0.0);
        CHECK_FALSE(load_table(path, key + 1).has_value());
        {
            std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
            io.seekp(100);
            io.put('\x11');
        }
        CHECK_FALSE(load_table(path, key).has_value());
    }
}

}
