#include <doctest.h>

#include <cmath>
#include <random>

#include "rydtrap/dynamics.hpp"
#include "rydtrap/ensemble.hpp"
#include "rydtrap/errors.hpp"
#include "rydtrap/field_model.hpp"

using namespace rydtrap;
using namespace rydtrap::dynamics;

namespace {
constexpr double two_pi = units::two_pi;
const double m85 = units::rb85_mass;

// Static field phi = a1 z + a2 (z^2 - r^2 / 2) inside a ball.
std::shared_ptr<const field::FieldModel> static_field(double a1, double a2, double radius = 1e-2) {
    return std::make_shared<field::AnalyticFieldModel>(field::AnalyticFieldModel::Coefficients{a1, a2, 0.0},
                                                       field::AnalyticFieldModel::Coefficients{}, 0.0, radius);
}
}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("free fall in a uniform field") {
    // Uniform |E|: no Stark force, only gravity.
    StarkMotion m(static_field(-400.0, 0.0), quadratic_potential(1e3), m85, 9.81);
    TrajectoryState s;
    s.v = Vector3d(1e-3, 0, 2e-3);
    IntegratorOptions o;
    o.static_sample_dt = 1e-3;
    o.loss_radius = 1.0;
    auto t = integrate_trajectory(s, m, 0.02, o);
    REQUIRE(t.status == Status::completed);
    for (const auto& q : t.samples) {
        CHECK(q.r.x() == doctest::Approx(1e-3 * q.t).epsilon(1e-10));
        CHECK(q.r.z() == doctest::Approx(2e-3 * q.t - 0.5 * 9.81 * q.t * q.t).epsilon(1e-9));
        CHECK(q.E == doctest::Approx(400.0));
    }
}

TEST_CASE("Stark force in a quadrupole field matches the harmonic solution") {
    // |E|^2 = a2^2 (x^2 + y^2 + 4 z^2) with shift alpha |E|^2: omega_z = 2 omega_x.
    const double a2 = 1e6, wx = two_pi * 100.0;
    const double alpha = m85 * wx * wx / (2.0 * units::hbar * a2 * a2);
    StarkMotion m(static_field(0.0, a2), quadratic_potential(alpha), m85, 0.0);
    TrajectoryState s;
    s.r = Vector3d(20e-6, 10e-6, 15e-6);
    IntegratorOptions o;
    o.static_sample_dt = 1e-4;
    auto t = integrate_trajectory(s, m, 0.05, o);
    REQUIRE(t.status == Status::completed);
    double worst = 0.0;
    for (const auto& q : t.samples) {
        Vector3d an(20e-6 * std::cos(wx * q.t), 10e-6 * std::cos(wx * q.t), 15e-6 * std::cos(2 * wx * q.t));
        worst = std::max(worst, (q.r - an).norm());
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("harmonic test double: trap frequencies to 0.1%") {
    HarmonicMotion h(Vector3d(two_pi * 64.0, two_pi * 64.0, two_pi * 175.0), m85);
    auto f = trap_frequencies(h);
    CHECK(f.f_long == doctest::Approx(175.0).epsilon(1e-3));
    CHECK(f.f_trans == doctest::Approx(64.0).epsilon(1e-3));
    CHECK(f.micromotion == 0.0);
    CHECK(f.mean_position.norm() < 1e-12);
}

TEST_CASE("spectral peak of a pure tone") {
    std::vector<double> t, x;
    for (int k = 0; k < 4000; ++k) {
        t.push_back(k * 1e-4);
        x.push_back(std::sin(two_pi * 123.4 * t.back() + 0.3));
    }
    CHECK(spectral_peak(t, x, 5.0, 1000.0) == doctest::Approx(123.4).epsilon(1e-4));
}

TEST_CASE("energy is conserved with the drives frozen") {
    HarmonicMotion h(Vector3d(two_pi * 50.0, two_pi * 70.0, two_pi * 90.0), m85);
    TrajectoryState s;
    s.r = Vector3d(30e-6, -20e-6, 10e-6);
    s.v = Vector3d(1e-3, 2e-3, -1e-3);
    auto t = integrate_trajectory(s, h, 0.5);
    auto energy = [&](const TrajectoryState& q) { return h.evaluate(q.r, q.t).energy + 0.5 * m85 * q.v.squaredNorm(); };
    double e0 = energy(t.samples.front()), worst = 0.0;
    for (const auto& q : t.samples) worst = std::max(worst, std::abs(energy(q) - e0) / e0);
    CHECK(worst < 1e-9);
}

TEST_CASE("integrator error shrinks with the tolerance") {
    HarmonicMotion h(Vector3d(two_pi * 175.0, two_pi * 64.0, two_pi * 64.0), m85);
    TrajectoryState s;
    s.r = Vector3d(50e-6, 0, 0);
    auto err = [&](double rtol) {
        IntegratorOptions o;
        o.rtol = rtol;
        o.atol_position = rtol * 1e-4;
        o.atol_velocity = rtol * 1e-2;
        o.static_sample_dt = 0.2;  // one output interval, steps set by the tolerance alone
        auto t = integrate_trajectory(s, h, 0.2, o);
        return std::abs(t.samples.back().r.x() - 50e-6 * std::cos(two_pi * 175.0 * 0.2));
    };
    double e1 = err(1e-5), e2 = err(1e-8), e3 = err(1e-11);
    CHECK(e2 < e1);
    CHECK(e3 < e2);
    CHECK(e3 < 1e-13);
}

TEST_CASE("loss and integrator failures") {
    HarmonicMotion h(Vector3d::Constant(two_pi * 10.0), m85);
    TrajectoryState s;
    s.v = Vector3d(0.1, 0, 0);  // amplitude 1.6 mm
    IntegratorOptions o;
    o.loss_radius = 500e-6;
    auto t = integrate_trajectory(s, h, 0.1, o);
    CHECK(t.status == Status::lost);
    CHECK(t.end_time == doctest::Approx(std::asin(500e-6 * two_pi * 10.0 / 0.1) / (two_pi * 10.0)).epsilon(1e-3));

    IntegratorOptions tiny;
    tiny.max_steps = 3;
    CHECK_THROWS_AS(integrate_trajectory(TrajectoryState{}, h, 1.0, tiny), IntegratorError);
}

TEST_CASE("batch integration preserves order and matches single runs") {
    HarmonicMotion h(Vector3d(two_pi * 30.0, two_pi * 40.0, two_pi * 50.0), m85);
    std::vector<TrajectoryState> init(6);
    for (int k = 0; k < 6; ++k) init[k].r = Vector3d(1e-6 * k, 2e-6, -1e-6 * k);
    auto batch = integrate_batch(init, h, 0.05, {}, 3);
    for (int k = 0; k < 6; ++k) {
        auto single = integrate_trajectory(init[k], h, 0.05);
        CHECK(batch[k].samples.back().r == single.samples.back().r);
    }
}

TEST_CASE("trap depth of an isotropic harmonic well") {
    // Atoms start at rest at O: the radius never exceeds |v| / omega, so the
    // retention is the Maxwell speed CDF at R omega. Its median is 1.5382
    // sqrt(kT/m), hence T_d = m (R omega / 1.5382)^2 / k.
    const double w = two_pi * 20.0, R = 400e-6;
    HarmonicMotion h(Vector3d::Constant(w), m85);
    ensemble::EnsembleSpec spec;
    spec.cloud_rms = 0.0;
    spec.recoil = 0.0;
    spec.N = 400;
    DepthOptions o;
    o.probe_duration = 0.05;
    o.radius = R;
    o.T_lo = 1e-6;
    o.T_hi = 1e-3;
    o.bisections = 10;
    auto r = trap_depth(h, [&](double T0) {
        auto s = spec;
        s.T0 = T0;
        return ensemble::sample_ensemble(s);
    }, o);
    const double oracle = m85 * std::pow(R * w / 1.538172, 2) / units::boltzmann;
    CHECK(r.T_depth == doctest::Approx(oracle).epsilon(0.1));
    CHECK(r.ci_lo < oracle);
    CHECK(r.ci_hi > oracle);
    CHECK_FALSE(r.saturated);
}

TEST_CASE("Stern-Gerlach separation of twins in different wells") {
    const double w1 = two_pi * 100.0, w2 = two_pi * 101.0, x0 = 10e-6;
    HarmonicMotion a(Vector3d::Constant(w1), m85), b(Vector3d::Constant(w2), m85);
    TrajectoryState s;
    s.r = Vector3d(x0, 0, 0);
    auto r = stern_gerlach(s, a, b, 0.05, 0.8e-6);
    REQUIRE(r.crossing_time.has_value());
    // First t with x0 |cos w1 t - cos w2 t| = 0.8 um, by dense scan.
    double t_or = 0.0;
    for (double t = 0.0; t < 0.05; t += 1e-7)
        if (x0 * std::abs(std::cos(w1 * t) - std::cos(w2 * t)) >= 0.8e-6) {
            t_or = t;
            break;
        }
    CHECK(*r.crossing_time == doctest::Approx(t_or).epsilon(0.02));
    CHECK_FALSE(r.partial);
}

TEST_CASE("theta statistics and lifetime") {
    Trajectory t;
    for (int k = 0; k < 4; ++k) {
        TrajectoryState s;
        s.theta = 0.01;
        t.samples.push_back(s);
    }
    auto st = mean_theta({t});
    CHECK(st.mean_theta == doctest::Approx(0.01));
    atom::StarkModel stark;
    CHECK(st.lifetime(stark, 0.0) == doctest::Approx(30e-3 / std::pow(std::sin(0.01), 2)).epsilon(1e-9));
    Trajectory flat;
    flat.samples.resize(3);
    CHECK(std::isinf(mean_theta({flat}).lifetime(stark, 0.0)));
}

}
