#include <doctest.h>

#include <cmath>
#include <random>

#include "rydtrap/ensemble.hpp"
#include "rydtrap/errors.hpp"
#include "rydtrap/field_model.hpp"

using namespace rydtrap;
using namespace rydtrap::ensemble;

namespace {
constexpr double two_pi = units::two_pi;

PhaseSeries linear_phase(double rate, double duration, double dt = 1e-3) {
    PhaseSeries p;
    const int n = static_cast<int>(std::lround(duration / dt));
    for (int k = 0; k <= n; ++k) {
        p.t.push_back(duration * k / n);
        p.phi.push_back(rate * p.t.back());
    }
    return p;
}

std::vector<PhaseSeries> gaussian_rates(int N, double sigma, double duration, std::uint64_t seed = 5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<PhaseSeries> out;
    for (int j = 0; j < N; ++j) out.push_back(linear_phase(n(rng), duration));
    return out;
}

double C_at(const CoherenceResult& r, double t) {
    for (const auto& p : r.contrast)
        if (std::abs(p.t - t) < 1e-9) return p.C;
    FAIL("time not on the readout grid");
    return 0.0;
}
}  // namespace

TEST_SUITE("ensemble_coherence") {

TEST_CASE("sampler moments") {
    EnsembleSpec s;
    s.N = 100000;
    auto atoms = sample_ensemble(s);
    Vector3d mv = Vector3d::Zero(), mr2 = Vector3d::Zero();
    for (const auto& a : atoms) {
        mv += a.v;
        mr2 += a.r.cwiseProduct(a.r);
    }
    mv /= s.N;
    const double sigma_v = std::sqrt(units::boltzmann * s.T0 / s.mass);
    const double band = 3.0 * sigma_v / std::sqrt(s.N);
    CHECK(std::abs(mv.x() - s.recoil) < band);
    CHECK(std::abs(mv.y()) < band);
    CHECK(std::abs(mv.z()) < band);
    for (int k = 0; k < 3; ++k) CHECK(std::sqrt(mr2[k] / s.N) == doctest::Approx(0.3e-6).epsilon(0.02));
    CHECK(s.recoil == doctest::Approx(6.0e-3).epsilon(0.02));
}

TEST_CASE("sampler determinism and temperature scaling") {
    EnsembleSpec s;
    s.N = 50;
    s.recoil = 0.0;
    auto a = sample_ensemble(s), b = sample_ensemble(s);
    for (int j = 0; j < s.N; ++j) CHECK(a[j].v == b[j].v);
    auto hot = s;
    hot.T0 = 4.0 * s.T0;
    auto c = sample_ensemble(hot);
    for (int j = 0; j < s.N; ++j) CHECK((c[j].v - 2.0 * a[j].v).norm() < 1e-15);
    auto other = s;
    other.seed = 2;
    CHECK(sample_ensemble(other)[0].v != a[0].v);
}

TEST_CASE("classical bound") {
    EnsembleSpec s;
    s.T0 = 50e-9;
    CHECK_THROWS_WITH_AS(sample_ensemble(s), doctest::Contains("100 nK"), ConfigError);
}

TEST_CASE("pulse sequences") {
    auto r = PulseSequence::ramsey(0.5);
    CHECK(r.pulses.size() == 1);
    auto e = PulseSequence::echo(0.5);
    CHECK(e.duration == doctest::Approx(1.0));
    CHECK(e.pulses[1].angle == doctest::Approx(units::pi));
    CHECK(e.pulses[1].dispersion == doctest::Approx(0.1));
    auto m = PulseSequence::multi_echo(0.1, 0.5);
    CHECK(m.pulses.size() == 6);
    CHECK(m.pulses[1].time == doctest::Approx(0.05));
    PulseSequence bad = e;
    std::swap(bad.pulses[0], bad.pulses[1]);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(sequence_kind_from_string("multi-echo") == SequenceKind::multi_echo);
    CHECK_THROWS_AS(sequence_kind_from_string("hahn"), ConfigError);
}

TEST_CASE("pinned atom accumulates no phase") {
    dynamics::Trajectory t;
    for (int k = 0; k <= 10; ++k) {
        dynamics::TrajectoryState s;
        s.t = 0.01 * k;
        s.E = 400.0;
        t.samples.push_back(s);
    }
    auto omega = [](double E, double th) { return 1e9 + 1e3 * (E - 400.0) + 1e6 * th * th; };
    auto p = accumulate_phase(t, omega, omega(400.0, 0.0));
    for (double v : p.phi) CHECK(v == 0.0);
    CHECK(p.cadence_error == 0.0);
}

TEST_CASE("trapezoidal phase is exact for linear frequency ramps") {
    dynamics::Trajectory t;
    for (int k = 0; k <= 20; ++k) {
        dynamics::TrajectoryState s;
        s.t = 0.005 * k;
        s.E = 400.0 + 10.0 * s.t;
        t.samples.push_back(s);
    }
    auto p = accumulate_phase(t, [](double E, double) { return 3.0 * E; }, 1200.0);
    // integral of 30 t dt = 15 t^2
    CHECK(p.phi.back() == doctest::Approx(15.0 * 0.1 * 0.1).epsilon(1e-12));
}

TEST_CASE("echo refocuses linear phases exactly with perfect pulses") {
    auto phases = gaussian_rates(200, 40.0, 1.0);
    auto seq = PulseSequence::echo(0.5, 0.0);
    auto r = run_synthetic(phases, seq, 1, 1e-3);
    CHECK(C_at(r, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(C_at(r, 0.3) < 0.1);
}

TEST_CASE("Ramsey contrast of Gaussian rates is a Gaussian decay") {
    const double sigma = 50.0;
    auto r = run_synthetic(gaussian_rates(4000, sigma, 0.1), PulseSequence::ramsey(0.1), 1, 1e-3);
    for (double t : {0.01, 0.02, 0.03, 0.05})
        CHECK(C_at(r, t) == doctest::Approx(std::exp(-0.5 * sigma * sigma * t * t)).epsilon(0.05));
    for (const auto& p : r.contrast) {
        CHECK(p.C >= 0.0);
        CHECK(p.C <= 1.0);
    }
    auto t2 = extract_t2(r.contrast);
    REQUIRE(t2.crossing.has_value());
    CHECK(*t2.crossing == doctest::Approx(std::sqrt(2.0 * std::log(2.0)) / sigma).epsilon(0.03));
}

TEST_CASE("single trajectory with perfect pulses keeps full contrast") {
    std::vector<PhaseSeries> one{linear_phase(123.0, 1.0)};
    auto r = run_synthetic(one, PulseSequence::echo(0.5, 0.0), 1, 1e-3);
    for (const auto& p : r.contrast) CHECK(p.C == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pulse dispersion lowers the revival") {
    auto phases = gaussian_rates(500, 30.0, 1.0);
    double last = 2.0;
    for (double d : {0.0, 0.05, 0.1, 0.2}) {
        auto r = run_synthetic(phases, PulseSequence::echo(0.5, d), 7, 1e-3);
        double c = C_at(r, 1.0);
        CHECK(c < last + 1e-12);
        last = c;
    }
    CHECK(last < 0.99);
}

TEST_CASE("T2 extraction") {
    std::vector<ContrastPoint> curve;
    const double tau = 0.04;
    for (int k = 0; k <= 2000; ++k) curve.push_back({k * 1e-4, std::exp(-k * 1e-4 / tau), 1.0, 0.0});
    auto r = extract_t2(curve, 0.1);
    REQUIRE(r.crossing.has_value());
    CHECK(*r.crossing == doctest::Approx(tau * std::log(2.0)).epsilon(1e-4));
    CHECK(r.peak_time == doctest::Approx(0.1));
    CHECK(*r.equivalent == doctest::Approx(tau).epsilon(1e-9));

    std::vector<ContrastPoint> flat{{0.0, 1.0, 1.0, 0.0}, {1.0, 0.9, 1.0, 0.0}};
    CHECK(extract_t2(flat).saturated);
}

TEST_CASE("contrast estimator") {
    using cplx = std::complex<double>;
    auto p = contrast_of({cplx(1, 0), cplx(0, 1), cplx(NAN, NAN)}, 3);
    CHECK(p.C == doctest::Approx(std::sqrt(0.5)));
    CHECK(p.survival == doctest::Approx(2.0 / 3.0));
    auto q = contrast_of({cplx(NAN, NAN)}, 1);
    CHECK(q.C == 0.0);
    CHECK(q.survival == 0.0);
}

TEST_CASE("trajectory runs: uniform transition keeps C = 1 and results are reproducible") {
    dynamics::HarmonicMotion h(Vector3d::Constant(two_pi * 80.0), units::rb85_mass);
    EnsembleSpec s;
    s.N = 40;
    RunOptions o;
    o.threads = 2;
    o.phase_checkpoints = {0.01};
    auto flat = run_sequence(s, PulseSequence::ramsey(0.05), [](double, double) { return 5.0; }, 5.0, h, o);
    for (const auto& p : flat.contrast) CHECK(p.C == doctest::Approx(1.0).epsilon(1e-12));

    // Per-atom pulse angles make the echo runs non-trivial.
    auto w = [](double E, double th) { return 1e3 * (E + th); };
    auto a = run_sequence(s, PulseSequence::echo(0.025, 0.1), w, 0.0, h, o);
    o.threads = 1;
    auto b = run_sequence(s, PulseSequence::echo(0.025, 0.1), w, 0.0, h, o);
    REQUIRE(a.contrast.size() == b.contrast.size());
    for (std::size_t k = 0; k < a.contrast.size(); ++k) CHECK(a.contrast[k].C == b.contrast[k].C);
    for (int j = 0; j < s.N; ++j) CHECK(a.final_state[j] == b.final_state[j]);
}

TEST_CASE("all trajectories lost") {
    dynamics::HarmonicMotion h(Vector3d::Constant(two_pi * 80.0), units::rb85_mass, 1e-6);
    EnsembleSpec s;
    s.N = 5;
    s.center = Vector3d(0, 0, 1e-3);
    CHECK_THROWS_AS(run_sequence(s, PulseSequence::ramsey(0.01), [](double, double) { return 0.0; }, 0.0, h),
                    EmptyEnsembleError);
}

TEST_CASE("transition range: lost atoms drop out at the edge, survivors raise") {
    // Isotropic well whose field magnitude is 1 V/m per um of radius, so a
    // table edge in E is an edge in radius.
    struct RadialWell final : dynamics::MotionModel {
        dynamics::HarmonicMotion h{Vector3d::Constant(two_pi * 100.0), units::rb85_mass};
        Sample evaluate(const Vector3d& r, double t) const override {
            auto s = h.evaluate(r, t);
            s.E = 1e6 * r.norm();
            return s;
        }
        bool in_domain(const Vector3d& r) const override { return h.in_domain(r); }
        double drive_omega() const override { return 0.0; }
        double mass() const override { return h.mass(); }
    } well;
    EnsembleSpec s;
    s.N = 100;
    s.T0 = 1e-6;  // rms excursion ~16 um
    RunOptions o;
    o.integrator.loss_radius = 30e-6;
    auto table_to = [](double E_max) {
        return [E_max](double E, double) {
            if (E > E_max) throw RangeError("outside the table");
            return 0.0;
        };
    };
    CoherenceResult r;
    REQUIRE_NOTHROW(r = run_sequence(s, PulseSequence::ramsey(0.05), table_to(30.0), 0.0, well, o));
    CHECK(r.survival > 0.0);
    CHECK(r.survival < 1.0);
    for (const auto& p : r.contrast) CHECK(p.C == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(run_sequence(s, PulseSequence::ramsey(0.05), table_to(20.0), 0.0, well, o), RangeError);
}

TEST_CASE("patch field statistics") {
    auto base = std::make_shared<field::AnalyticFieldModel>(field::AnalyticFieldModel::Coefficients{-400.0, 0, 0},
                                                            field::AnalyticFieldModel::Coefficients{}, 0.0, 1e-2);
    PatchSpec spec;
    PatchFieldModel m(base, spec);
    auto st = patch_statistics(m, spec.ball_radius, 10000, 99);
    CHECK(st.mean == doctest::Approx(8e-3).epsilon(0.1));
    CHECK(st.rms_dispersion == doctest::Approx(0.4e-3).epsilon(0.2));

    // Deterministic per seed; the patch is curl free.
    PatchFieldModel m2(base, spec);
    Vector3d x(100e-6, -50e-6, 30e-6);
    CHECK(m.patch(x).E == m2.patch(x).E);
    auto J = m.patch(x).J;
    CHECK((J - J.transpose()).norm() < 1e-9 * J.norm() + 1e-30);

    PatchSpec zero = spec;
    zero.mean = zero.dispersion = 0.0;
    auto z = apply_patch_field(base, zero);
    CHECK(z->field(x, 0.0) == base->field(x, 0.0));
}

TEST_CASE("frequency spread of two-valued samples") {
    dynamics::Trajectory t;
    for (int k = 0; k < 1000; ++k) {
        dynamics::TrajectoryState s;
        s.E = k % 2 ? 1.0 : -1.0;
        t.samples.push_back(s);
    }
    auto f = frequency_spread({t}, [](double E, double) { return 10.0 * E; });
    CHECK(f.mean == doctest::Approx(0.0));
    CHECK(f.stddev == doctest::Approx(10.0).epsilon(1e-3));
    CHECK(f.broadening == doctest::Approx(2.0 * f.stddev));
}

}
