// Acceptance run: one PASS/FAIL line per criterion, measured value next to
// the target. Heavy stages go through the same pipeline as the rydtrap CLI;
// the field basis, dressing parameters and table are cached under the build
// tree so reruns skip them.

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rydtrap/app.hpp"
#include "rydtrap/config.hpp"
#include "rydtrap/ensemble.hpp"
#include "rydtrap/geometry.hpp"
#include "rydtrap/hydrogen.hpp"
#include "rydtrap/log.hpp"

#ifndef RYDTRAP_TEST_SCRATCH
#define RYDTRAP_TEST_SCRATCH "test-scratch"
#endif

using namespace rydtrap;
using nlohmann::json;
using Eigen::Vector3d;
namespace fs = std::filesystem;

namespace {

constexpr double two_pi = units::two_pi;

// Tolerances.
constexpr double kLifetimeTarget = 300.0;        // s
constexpr double kLifetimeRel = 0.01;
constexpr double kHexapoleRel = 0.01;
constexpr double kCentralField = 400.0;          // V/m
constexpr double kCentralFieldRel = 0.02;
constexpr double kFLong = 175.0, kFTrans = 64.0; // Hz
constexpr double kFreqRel = 0.15;
constexpr double kDepth = 180e-6;                // K
constexpr double kDepthRel = 0.30;
constexpr double kBroadening = 20e3;             // Hz
constexpr double kBroadeningFactor = 2.0;
constexpr double kSlopeMax = 1.0;                // Hz per V/m
constexpr double kVariationMax = 100.0;          // Hz over +-1 V/m
constexpr double kOmega0 = 200e6, kDelta0 = 556.230e6;  // Hz
constexpr double kDressingRel = 0.25;
constexpr double kTwoLevelRel = 1e-9;
constexpr double kStarkRel = 1e-3;
constexpr double kT2 = 24e-3;                    // s
constexpr double kCEnd = 0.13;
constexpr double kRamseyFactor = 2.0;
constexpr double kRevivalTime = 1.0;             // s
constexpr double kRevivalTimeTol = 0.05;         // s
constexpr double kRevivalMin = 0.6;
constexpr double kRevivalWarmLo = 0.4, kRevivalWarmHi = 0.7;

int failures = 0;

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d  %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void note(const std::string& text) {
    std::printf("          %s\n", text.c_str());
    std::fflush(stdout);
}

// Runs one criterion; an exception is a failure with its message.
void criterion(int id, const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("error: ") + e.what());
    }
}

// Extra printout; its failure is noted but does not decide the criterion.
void diagnostic(const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        note(std::string("diagnostic failed: ") + e.what());
    }
}

bool within_rel(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }
bool within_factor(double x, double target, double f) { return x >= target / f && x <= target * f; }

fs::path root() { return fs::path(RYDTRAP_TEST_SCRATCH) / "acceptance"; }

config::RunConfig base_config(const std::string& out) {
    config::RunConfig c;
    c.cache.dir = (root() / "cache").string();
    c.output_dir = (root() / out).string();
    return c;
}

json run(app::Command cmd, const config::RunConfig& c) { return app::orchestrate(cmd, c).at("results"); }

double number(const json& r, const char* key) {
    if (!r.contains(key) || r.at(key).is_null()) throw std::runtime_error(std::string("no value for ") + key);
    return r.at(key).get<double>();
}

// Contrast column of a contrast.csv written by a run.
std::vector<double> contrast_column(const fs::path& path) {
    std::vector<double> out;
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream s(line);
        std::string t, C;
        std::getline(s, t, ',');
        std::getline(s, C, ',');
        out.push_back(std::stod(C));
    }
    return out;
}

ensemble::PhaseSeries linear_phase(double rate, double duration, double dt = 1e-3) {
    ensemble::PhaseSeries p;
    const int n = static_cast<int>(std::lround(duration / dt));
    for (int k = 0; k <= n; ++k) {
        p.t.push_back(duration * k / n);
        p.phi.push_back(rate * p.t.back());
    }
    return p;
}

// Coherence run on the pipeline's trap with a caller-chosen transition,
// for diagnostics the CLI does not print.
ensemble::T2Result coherence_with(app::Pipeline& p, const ensemble::PulseSequence& seq,
                                  const ensemble::TransitionFunction& omega, double revival_from,
                                  ensemble::CoherenceResult* out = nullptr) {
    const auto& c = p.config();
    ensemble::RunOptions ro;
    ro.output_dt = c.sequence.output_dt_s;
    ro.integrator = c.integrator();
    auto r = ensemble::run_sequence(c.ensemble_spec(), seq, omega, p.reference(), *p.coherence_motion(), ro);
    auto t2 = ensemble::extract_t2(r.contrast, revival_from);
    if (out) *out = std::move(r);
    return t2;
}

}  // namespace

int main() {
    log::set_level(log::Level::warn);
    fs::create_directories(root());
    std::printf("acceptance run, scratch %s\n", root().string().c_str());

    criterion(1, "residual spontaneous-emission lifetime at theta = 10 mrad", [] {
        atom::StarkModel stark;
        double life = 1.0 / stark.residual_se_rate(0.01, 0.0);
        report(1, "residual spontaneous-emission lifetime at theta = 10 mrad",
               within_rel(life, kLifetimeTarget, kLifetimeRel),
               fmt("%.3f s", life) + " (target 300 s +- 1%)");
    });

    criterion(2, "field solver vs exact hexapole harmonic", [] {
        const double r0 = 0.5e-3, R = r0 / 2;
        auto b = field::solve_basis_fields(field::hexapole_geometry(r0));
        const auto& f = b.fields[0];
        double worst = 0.0, ref = 0.0;
        for (int i = 0; i <= 60; ++i)
            for (int j = 0; j <= 30; ++j) {
                double r = R * j / 30.0, z = -R + 2 * R * i / 60.0;
                if (r * r + z * z > R * R) continue;
                double an = (z * z * z - 1.5 * z * r * r) / (r0 * r0 * r0);
                worst = std::max(worst, std::abs(f.spline(r, z).v - an));
                ref = std::max(ref, std::abs(an));
            }
        report(2, "field solver vs exact hexapole harmonic", worst / ref < kHexapoleRel,
               fmt("max deviation %.3g", 100 * worst / ref) + "% over the central half-radius (target < 1%)");
    });

    criterion(3, "central field at U0 = 0.2 V", [] {
        auto r = run(app::Command::calibrate, base_config("calibrate"));
        double E = number(r, "E_O_V_per_m");
        report(3, "central field at U0 = 0.2 V", within_rel(E, kCentralField, kCentralFieldRel),
               fmt("|E(O)| = %.2f V/m", E) + " (target 400 V/m +- 2%)");
        note(fmt("eta = %.5f", number(r, "eta")) + fmt(", oscillating part at O %.2e V/m", number(r, "E_O_oscillating_V_per_m")));
    });

    criterion(4, "trap frequencies", [] {
        auto r = run(app::Command::frequencies, base_config("frequencies"));
        double fl = number(r, "f_long_Hz"), ft = number(r, "f_trans_Hz");
        report(4, "trap frequencies", within_rel(fl, kFLong, kFreqRel) && within_rel(ft, kFTrans, kFreqRel),
               fmt("longitudinal %.1f Hz", fl) + fmt(", transverse %.1f Hz", ft) + " (targets 175 / 64 Hz +- 15%)");
    });

    criterion(5, "trap depth", [] {
        auto c = base_config("depth");
        c.depth.N = 200;
        c.depth.probe_s = 0.2;
        auto r = run(app::Command::depth, c);
        double Td = number(r, "T_depth_K");
        report(5, "trap depth", within_rel(Td, kDepth, kDepthRel),
               fmt("T_d = %.2f uK", Td * 1e6) + fmt(" [%.2f, ", number(r, "ci_lo_K") * 1e6) +
                   fmt("%.2f] uK", number(r, "ci_hi_K") * 1e6) + " (target 180 uK +- 30%)");
    });

    criterion(6, "undressed broadening at 0.3 uK", [] {
        auto c = base_config("undressed");
        c.dressing.mode = "off";
        c.sequence.duration_s = 0.05;
        auto r = run(app::Command::ramsey, c);
        double w = number(r, "broadening_Hz");
        report(6, "undressed broadening at 0.3 uK", within_factor(w, kBroadening, kBroadeningFactor),
               fmt("%.1f kHz", w * 1e-3) + " (target 20 kHz within a factor 2)");
    });

    criterion(7, "dressing flatness and optimized parameters", [] {
        auto r = run(app::Command::dress_optimize, base_config("dress"));
        double O = number(r, "Omega0_Hz"), D = number(r, "delta0_Hz");
        double d1 = number(r, "d1_Hz_per_V_per_m"), var = number(r, "variation_1V_per_m_Hz");
        bool flat = std::abs(d1) < kSlopeMax && var <= kVariationMax;
        bool params = within_rel(O, kOmega0, kDressingRel) && within_rel(D, kDelta0, kDressingRel);
        report(7, "dressing flatness and optimized parameters", flat && params,
               fmt("|d1| = %.2e Hz/(V/m)", std::abs(d1)) + fmt(", variation %.3f Hz", var) +
                   fmt(", Omega0 = %.3f MHz", O * 1e-6) + fmt(", delta0 = %.3f MHz", D * 1e-6) +
                   " (targets < 1 Hz/(V/m), <= 100 Hz, 200 / 556.23 MHz +- 25%)");
        note(std::string("flatness ") + (flat ? "met" : "missed") + fmt(", Omega0 off by %.1f%%", 100 * (O / kOmega0 - 1)) +
             fmt(", delta0 off by %.1f%%", 100 * (D / kDelta0 - 1)));
    });

    criterion(8, "two-level dressed shift vs closed form", [] {
        atom::StarkModel stark;
        dressing::DressedAtom two(stark, dressing::BasisSpec::two_level_gi());
        const auto g = atom::RydbergLevel::g(), i = atom::RydbergLevel::i();
        double worst = 0.0;
        int points = 0;
        for (int a = 0; a < 10; ++a)
            for (int b = 0; b < 10; ++b) {
                dressing::DressingConfig c;
                c.omega0 = two_pi * 5e6 * std::pow(100.0, a / 9.0);
                c.delta0 = two_pi * (450e6 + 1050e6 * b / 9.0);
                double E = 395.0 + a;
                double delta = stark.bare_frequency(i, g) + stark.stark_shift(i, E) - stark.stark_shift(g, E) -
                               c.drive_frequency(stark);
                double oracle = 0.5 * (delta - std::sqrt(delta * delta + c.omega0 * c.omega0));
                double got = two.dressed_energy(g, E, 0.0, c) - stark.stark_shift(g, E);
                worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
                ++points;
            }
        report(8, "two-level dressed shift vs closed form", worst < kTwoLevelRel,
               fmt("max relative deviation %.2e", worst) + " on " + std::to_string(points) +
                   " (Omega, Delta) points (target 1e-9)");
    });

    criterion(9, "second-order Stark formula vs exact diagonalization at 50 V/m", [] {
        const double F = 50.0 / units::au_field;
        double worst_multi = 0.0, worst_single = 0.0;
        std::string states;
        for (int n : {50, 51})
            for (int m : {49, 50}) {
                if (m > n - 1) continue;
                for (int k = -(n - m - 1); k <= n - m - 1; k += 2) {
                    double first = atom::hydrogen::first_order(n, k) * F;
                    double pert = first + atom::hydrogen::second_order(n, k, m) * F * F;
                    double exact = atom::hydrogen::exact_stark_shift(n, k, m, F);
                    worst_multi = std::max(worst_multi, std::abs(exact - pert) / std::abs(exact));
                    // Inside one n manifold z is diagonal in the parabolic basis
                    // (eigenvalue 3/2 n k), so that diagonalization gives only
                    // the first-order shift.
                    double single = first;
                    worst_single = std::max(worst_single, std::abs(single - pert) / std::abs(pert));
                    states += " (" + std::to_string(n) + "," + std::to_string(m) + "," + std::to_string(k) + ")";
                }
            }
        report(9, "second-order Stark formula vs exact diagonalization at 50 V/m", worst_multi < kStarkRel,
               fmt("max relative deviation %.2e", worst_multi) + " vs diagonalization over manifolds n..n+6 (target 1e-3)");
        note("states (n,m,k):" + states);
        note(fmt("diagnostic: single-manifold diagonalization differs by up to %.3g", worst_single) +
             " relative (it has no second-order term)");
    });

    criterion(10, "Ramsey decay at 0.3 uK, N = 500", [] {
        auto c = base_config("ramsey");
        auto r = run(app::Command::ramsey, c);
        double t2 = number(r, "T2_crossing_s"), Cend = number(r, "C_end");
        bool pass = within_factor(t2, kT2, kRamseyFactor) && within_factor(Cend, kCEnd, kRamseyFactor);
        report(10, "Ramsey decay at 0.3 uK, N = 500", pass,
               fmt("C = 1/2 at %.2f ms", t2 * 1e3) + fmt(", C(0.5 s) = %.4f", Cend) +
                   " (targets 24 ms and 0.13, each within a factor 2)");
        note(fmt("mean |drift| %.1f rad/s", number(r, "mean_abs_drift_rate_rad_per_s")) +
             fmt(", survival %.3f", number(r, "survival")) + fmt(", cadence error %.2e rad", number(r, "cadence_error_rad")));
        diagnostic([&] {
            app::Pipeline p(c);
            auto table = p.table();
            ensemble::CoherenceResult cr;
            auto flat = coherence_with(p, ensemble::PulseSequence::ramsey(c.sequence.duration_s),
                                       [table](double E, double) { return (*table)(E, 0.0); }, 0.0, &cr);
            note(std::string("diagnostic, transition at theta = 0: C = 1/2 at ") +
                 (flat.crossing ? fmt("%.2f ms", *flat.crossing * 1e3) : std::string("never")) +
                 fmt(", C(0.5 s) = %.4f", cr.contrast.back().C));
        });
    });

    criterion(11, "echo revival, t_pi = 0.5 s, 10% pulse dispersion, N = 500", [] {
        auto c = base_config("echo");
        auto r = run(app::Command::echo, c);
        double tp = number(r, "revival_peak_time_s"), Cp = number(r, "revival_peak_C");
        auto w = base_config("echo_1uK");
        w.ensemble.T0_uK = 1.0;
        double Cw = std::nan("");
        std::string warm;
        try {
            auto rw = run(app::Command::echo, w);
            Cw = number(rw, "revival_peak_C");
            warm = fmt(", at 1 uK peak C = %.3f", Cw) + fmt(" at %.3f s", number(rw, "revival_peak_time_s"));
        } catch (const std::exception& e) {
            warm = std::string(", 1 uK run failed: ") + e.what();
        }
        bool pass = std::abs(tp - kRevivalTime) <= kRevivalTimeTol && Cp >= kRevivalMin && Cw >= kRevivalWarmLo &&
                    Cw <= kRevivalWarmHi;
        report(11, "echo revival, t_pi = 0.5 s, 10% pulse dispersion, N = 500", pass,
               fmt("peak C = %.3f", Cp) + fmt(" at %.3f s", tp) + warm +
                   " (targets C >= 0.6 at 1 s +- 0.05 s, 1 uK in [0.4, 0.7])");
        for (const auto& cfg : {c, w})
            diagnostic([&] {
                app::Pipeline p(cfg);
                auto table = p.table();
                auto seq = ensemble::PulseSequence::echo(cfg.sequence.t_pi_s, cfg.sequence.dispersion,
                                                         cfg.sequence.echo_window_s);
                auto flat = coherence_with(p, seq, [table](double E, double) { return (*table)(E, 0.0); },
                                           1.5 * cfg.sequence.t_pi_s);
                note(fmt("diagnostic, transition at theta = 0, T0 = %.1f uK: ", cfg.ensemble.T0_uK) +
                     fmt("peak C = %.3f", flat.peak_contrast) + fmt(" at %.3f s", flat.peak_time));
            });
    });

    criterion(12, "property suite", [] {
        std::vector<std::pair<std::string, bool>> props;
        auto c = base_config("properties");
        app::Pipeline p(c);
        auto b = p.basis();
        auto d = p.drives();
        auto f = p.field();
        const Vector3d O = Vector3d::Zero();

        {
            const double T = two_pi / d.omega1, E0 = f->field(O, 0.0).norm();
            double worst = 0.0;
            for (int k = 1; k < 64; ++k) worst = std::max(worst, std::abs(f->field(O, T * k / 64).norm() - E0) / E0);
            props.push_back({fmt("eta null: |E(O, t)| constant over a drive period to %.1e", worst), worst < 1e-9});
        }
        {
            auto f2 = field::make_trap_field(b, d.scaled(2.0));
            double worst = 0.0;
            for (const Vector3d& x : {Vector3d(50e-6, 20e-6, -30e-6), Vector3d(-80e-6, 0, 120e-6), Vector3d(0, 0, 0)})
                for (double t : {0.0, 0.3e-3, 1.1e-3}) {
                    auto a = f->sample(x, t), q = f2->sample(x, t);
                    worst = std::max(worst, (q.E - 2.0 * a.E).norm() / a.E.norm());
                    worst = std::max(worst, (q.J - 2.0 * a.J).norm() / a.J.norm());
                }
            props.push_back({fmt("linearity in the drives to %.1e", worst), worst < 1e-9});
        }
        {
            field::DriveWaveforms s = d;
            s.U1 = s.U2 = 0.0;
            auto fs_ = field::make_trap_field(b, s);
            double worst = 0.0;
            for (const Vector3d& x : {Vector3d(60e-6, 0, 90e-6), Vector3d(0, 150e-6, 40e-6), Vector3d(-30e-6, 70e-6, 200e-6)}) {
                auto a = fs_->field(x, 0.0), m = fs_->field(Vector3d(x.x(), x.y(), -x.z()), 0.0);
                Vector3d mirrored(-m.x(), -m.y(), m.z());
                worst = std::max(worst, (a - mirrored).norm() / a.norm());
            }
            props.push_back({fmt("mirror symmetry of the directing field to %.1e", worst), worst < 1e-6});
        }
        {
            dynamics::HarmonicMotion h(Vector3d(two_pi * 175.0, two_pi * 64.0, two_pi * 64.0), units::rb85_mass);
            dynamics::TrajectoryState s;
            s.r = Vector3d(50e-6, 0, 0);
            auto err = [&](double rtol) {
                dynamics::IntegratorOptions o;
                o.rtol = rtol;
                o.atol_position = rtol * 1e-4;
                o.atol_velocity = rtol * 1e-2;
                o.static_sample_dt = 0.2;
                auto t = dynamics::integrate_trajectory(s, h, 0.2, o);
                return std::abs(t.samples.back().r.x() - 50e-6 * std::cos(two_pi * 175.0 * 0.2));
            };
            double e1 = err(1e-5), e2 = err(1e-8), e3 = err(1e-11);
            props.push_back({fmt("integrator convergence: %.1e", e1) + fmt(" > %.1e", e2) + fmt(" > %.1e m", e3),
                             e2 < e1 && e3 < e2 && e3 < 1e-13});
        }
        {
            ensemble::RunOptions ro;
            ro.integrator = c.integrator();
            auto spec = c.ensemble_spec();
            spec.N = 16;
            auto seq = ensemble::PulseSequence::echo(0.01, 0.1);
            auto omega = p.transition();
            double ref = p.reference();
            ro.threads = 1;
            auto a = ensemble::run_sequence(spec, seq, omega, ref, *p.coherence_motion(), ro);
            ro.threads = 2;
            auto q = ensemble::run_sequence(spec, seq, omega, ref, *p.coherence_motion(), ro);
            bool same = a.contrast.size() == q.contrast.size() && a.final_state == q.final_state;
            for (std::size_t k = 0; same && k < a.contrast.size(); ++k) same = a.contrast[k].C == q.contrast[k].C;
            props.push_back({"seed determinism: bit-identical reruns on the trap (1 and 2 threads)", same});
        }
        std::vector<double> all_C;
        {
            std::mt19937_64 rng(5);
            std::normal_distribution<double> nd(0.0, 40.0);
            std::vector<ensemble::PhaseSeries> phases;
            for (int j = 0; j < 300; ++j) phases.push_back(linear_phase(nd(rng), 1.0));
            auto r = ensemble::run_synthetic(phases, ensemble::PulseSequence::echo(0.5, 0.0), 1, 1e-3);
            double C2 = 0.0;
            for (const auto& pt : r.contrast) {
                if (std::abs(pt.t - 1.0) < 1e-9) C2 = pt.C;
                all_C.push_back(pt.C);
            }
            props.push_back({fmt("synthetic linear phases, perfect pulses: C(2 t_pi) = 1 - %.1e", 1.0 - C2),
                             std::abs(C2 - 1.0) < 1e-12});
        }
        for (const char* dir : {"ramsey", "echo", "echo_1uK", "undressed"}) {
            auto path = root() / dir / "contrast.csv";
            if (fs::exists(path))
                for (double C : contrast_column(path)) all_C.push_back(C);
        }
        bool bounded = true;
        for (double C : all_C) bounded = bounded && C >= 0.0 && C <= 1.0 + 1e-12;
        props.push_back({"contrast bounds 0 <= C <= 1 over " + std::to_string(all_C.size()) + " points", bounded});

        bool pass = true;
        for (const auto& [text, ok] : props) pass = pass && ok;
        int n_ok = 0;
        for (const auto& pr : props) n_ok += pr.second;
        report(12, "property suite", pass, std::to_string(n_ok) + " of " + std::to_string(props.size()) + " properties hold");
        for (const auto& [text, ok] : props) note(std::string(ok ? "ok    " : "FAILED ") + text);
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
