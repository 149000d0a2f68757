#include "rydtrap/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "rydtrap/errors.hpp"
#include "rydtrap/log.hpp"

namespace rydtrap::ensemble {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Runs body(j) for j in [0, n) on a pool; the first exception wins and is
// rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
    int nt = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nt = std::max(1, std::min<int>(nt, static_cast<int>(n)));
    std::atomic<std::size_t> next{0};
    std::mutex m;
    std::exception_ptr err;
    auto work = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < n;) {
            try {
                body(j);
            } catch (...) {
                std::lock_guard lock(m);
                if (!err) err = std::current_exception();
                next = n;
            }
        }
    };
    if (nt == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nt; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (err) std::rethrow_exception(err);
}

Vector3d normal3(std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    const double a = n01(rng), b = n01(rng), c = n01(rng);
    return {a, b, c};
}

}  // namespace

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x2545f4914f6cdd1dull + salt)));
}

void EnsembleSpec::validate() const {
    if (!(T0 >= classical_T_min)) {
        std::ostringstream os;
        os << "ensemble.T0 = " << T0 * 1e9 << " nK is below the 100 nK bound of the classical centre-of-mass treatment";
        throw ConfigError(os.str());
    }
    if (!(cloud_rms >= 0.0)) throw ConfigError("ensemble.cloud_rms must be >= 0");
    if (N < 1) throw ConfigError("ensemble.N must be >= 1");
    if (!(mass > 0.0)) throw ConfigError("ensemble.mass must be positive");
    if (!std::isfinite(recoil) || !center.allFinite()) throw ConfigError("ensemble recoil and centre must be finite");
}

std::vector<TrajectoryState> sample_ensemble(const EnsembleSpec& spec) {
    spec.validate();
    const double sv = std::sqrt(units::boltzmann * spec.T0 / spec.mass);
    std::vector<TrajectoryState> out(static_cast<std::size_t>(spec.N));
    for (int j = 0; j < spec.N; ++j) {
        auto rng = stream_rng(spec.seed, static_cast<std::uint64_t>(j));
        const Vector3d p = normal3(rng);
        const Vector3d v = normal3(rng);
        TrajectoryState& s = out[static_cast<std::size_t>(j)];
        s.r = spec.center + spec.cloud_rms * p;
        s.v = sv * v;
        s.v.x() += spec.recoil;
    }
    return out;
}

// ---- sequences --------------------------------------------------------------

std::string to_string(SequenceKind k) {
    switch (k) {
        case SequenceKind::ramsey: return "ramsey";
        case SequenceKind::echo: return "echo";
        case SequenceKind::multi_echo: return "multi-echo";
    }
    return "?";
}

SequenceKind sequence_kind_from_string(const std::string& s) {
    if (s == "ramsey") return SequenceKind::ramsey;
    if (s == "echo") return SequenceKind::echo;
    if (s == "multi-echo") return SequenceKind::multi_echo;
    throw ConfigError("unknown sequence kind '" + s + "' (ramsey, echo, multi-echo)");
}

void PulseSequence::validate() const {
    if (!(duration > 0.0)) throw ConfigError("sequence duration must be positive");
    if (pulses.empty()) throw ConfigError("sequence needs at least one pulse");
    for (std::size_t i = 0; i < pulses.size(); ++i) {
        const auto& p = pulses[i];
        if (!(p.dispersion >= 0.0)) throw ConfigError("pulse dispersion must be >= 0");
        if (!(p.time >= 0.0) || p.time > duration) throw ConfigError("pulse time outside the readout window");
        if (i > 0 && !(p.time > pulses[i - 1].time)) throw ConfigError("pulse times must be strictly increasing");
    }
}

PulseSequence PulseSequence::ramsey(double duration, double dispersion) {
    PulseSequence s;
    s.kind = SequenceKind::ramsey;
    s.duration = duration;
    s.pulses.push_back({0.0, units::pi / 2, dispersion, 0.0});
    return s;
}

PulseSequence PulseSequence::echo(double t_pi, double dispersion, double duration) {
    PulseSequence s;
    s.kind = SequenceKind::echo;
    s.duration = duration > 0.0 ? duration : 2.0 * t_pi;
    s.pulses.push_back({0.0, units::pi / 2, 0.0, 0.0});
    s.pulses.push_back({t_pi, units::pi, dispersion, 0.0});
    return s;
}

PulseSequence PulseSequence::multi_echo(double period, double duration, double dispersion) {
    if (!(period > 0.0)) throw ConfigError("multi-echo period must be positive");
    PulseSequence s;
    s.kind = SequenceKind::multi_echo;
    s.duration = duration;
    s.pulses.push_back({0.0, units::pi / 2, 0.0, 0.0});
    for (double t = 0.5 * period; t <= duration; t += period) s.pulses.push_back({t, units::pi, dispersion, 0.0});
    return s;
}

// ---- phase ------------------------------------------------------------------

TransitionFunction table_transition(std::shared_ptr<const dressing::DressedTable> table) {
    return [table](double E, double theta) { return (*table)(E, theta); };
}

PhaseSeries accumulate_phase(const dynamics::Trajectory& trajectory, const TransitionFunction& omega,
                             double reference) {
    PhaseSeries ps;
    const auto& s = trajectory.samples;
    if (s.empty()) return ps;
    std::vector<double> rate(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) rate[k] = omega(s[k].E, s[k].theta) - reference;
    ps.t.resize(s.size());
    ps.phi.resize(s.size());
    ps.t[0] = 0.0;
    ps.phi[0] = 0.0;
    for (std::size_t k = 1; k < s.size(); ++k) {
        ps.t[k] = s[k].t - s[0].t;
        ps.phi[k] = ps.phi[k - 1] + 0.5 * (rate[k] + rate[k - 1]) * (s[k].t - s[k - 1].t);
    }
    // Richardson estimate from the same integral on every other sample.
    if (s.size() >= 3) {
        double coarse = 0.0;
        std::size_t k = 2;
        for (; k < s.size(); k += 2) coarse += 0.5 * (rate[k] + rate[k - 2]) * (s[k].t - s[k - 2].t);
        const std::size_t last = k - 2;
        ps.cadence_error = std::abs(coarse - ps.phi[last]) / 3.0;
    }
    return ps;
}

// ---- spin -------------------------------------------------------------------

std::vector<double> pulse_angles(const PulseSequence& seq, std::uint64_t seed, std::uint64_t trajectory) {
    auto rng = stream_rng(seed, trajectory, 0x70756c7365ull);
    std::normal_distribution<double> n01;
    std::vector<double> a;
    a.reserve(seq.pulses.size());
    for (const auto& p : seq.pulses) {
        const double x = n01(rng);  // drawn even for perfect pulses: streams stay aligned
        a.push_back(p.angle * (1.0 + p.dispersion * x));
    }
    return a;
}

namespace {

using cplx = std::complex<double>;

double phase_at(const PhaseSeries& ps, double t) {
    if (ps.t.empty()) return nan;
    if (t <= ps.t.front()) return ps.phi.front();
    if (t > ps.t.back() * (1.0 + 1e-12) + 1e-15) return nan;
    if (t >= ps.t.back()) return ps.phi.back();
    const auto it = std::upper_bound(ps.t.begin(), ps.t.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - ps.t.begin());
    const double w = (t - ps.t[k - 1]) / (ps.t[k] - ps.t[k - 1]);
    return ps.phi[k - 1] + w * (ps.phi[k] - ps.phi[k - 1]);
}

void rotate(std::array<cplx, 2>& c, double angle, double axis) {
    const double ca = std::cos(0.5 * angle), sa = std::sin(0.5 * angle);
    const cplx mi(0.0, -1.0);
    const cplx g = ca * c[0] + mi * std::polar(1.0, -axis) * sa * c[1];
    const cplx e = mi * std::polar(1.0, axis) * sa * c[0] + ca * c[1];
    c = {g, e};
}

}  // namespace

std::vector<cplx> propagate_spin(const PulseSequence& seq, const std::vector<double>& angles, const PhaseSeries& phase,
                                 const std::vector<double>& at, std::array<cplx, 2>* final_state) {
    std::vector<cplx> out(at.size(), cplx(nan, nan));
    std::array<cplx, 2> c{cplx(1.0, 0.0), cplx(0.0, 0.0)};
    double t_now = 0.0, phi_now = phase_at(phase, 0.0);
    auto advance = [&](double t) {
        const double phi = phase_at(phase, t);
        if (std::isnan(phi)) return false;
        c[1] *= std::polar(1.0, -(phi - phi_now));
        phi_now = phi;
        t_now = t;
        return true;
    };
    std::size_t p = 0;
    bool alive = !std::isnan(phi_now);
    for (std::size_t k = 0; k < at.size() && alive; ++k) {
        while (alive && p < seq.pulses.size() && seq.pulses[p].time <= at[k]) {
            alive = advance(seq.pulses[p].time);
            if (alive) rotate(c, angles[p], seq.pulses[p].phase);
            ++p;
        }
        if (!alive || !advance(at[k])) break;
        out[k] = 2.0 * c[1] * std::conj(c[0]);
    }
    (void)t_now;
    if (final_state) *final_state = c;
    return out;
}

ContrastPoint contrast_of(const std::vector<cplx>& z, std::size_t total) {
    ContrastPoint cp;
    cplx m(0.0, 0.0);
    std::size_t n = 0;
    for (const auto& v : z)
        if (!std::isnan(v.real())) {
            m += v;
            ++n;
        }
    cp.survival = total ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
    if (n == 0) return cp;
    m /= static_cast<double>(n);
    cp.C = std::min(1.0, std::abs(m));
    if (n > 1 && cp.C > 0.0) {
        const cplx u = std::conj(m) / std::abs(m);
        double s1 = 0.0, s2 = 0.0;
        for (const auto& v : z)
            if (!std::isnan(v.real())) {
                const double s = (v * u).real();
                s1 += s;
                s2 += s * s;
            }
        const double mean = s1 / static_cast<double>(n);
        const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
        cp.stderr_C = std::sqrt(var / static_cast<double>(n - 1));
    }
    return cp;
}

namespace {

std::vector<double> readout_grid(const PulseSequence& seq, double dt) {
    if (!(dt > 0.0)) throw ConfigError("output cadence must be positive");
    const long K = std::max(1L, std::lround(seq.duration / dt));
    std::vector<double> g;
    for (long k = 0; k <= K; ++k) g.push_back(seq.duration * static_cast<double>(k) / static_cast<double>(K));
    for (const auto& p : seq.pulses) {
        g.push_back(p.time);
        if (p.angle > 0.75 * units::pi && 2.0 * p.time <= seq.duration) g.push_back(2.0 * p.time);
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), g.end());
    return g;
}

// An atom on its way out of the trap may cross the edge of the transition
// table before it reaches the loss sphere; it counts as lost from the last
// sample inside. Surviving atoms never get here, their range errors stand.
void clip_to_transition_range(dynamics::Trajectory& tr, const TransitionFunction& omega) {
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
        try {
            omega(tr.samples[k].E, tr.samples[k].theta);
        } catch (const RangeError&) {
            tr.samples.resize(k);
            if (k > 0) tr.end_time = tr.samples.back().t;
            return;
        }
    }
}

double drift_fit(const PhaseSeries& ps) {
    const std::size_t n = ps.t.size();
    if (n < 2) return 0.0;
    double st = 0, sp = 0, stt = 0, stp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        st += ps.t[k];
        sp += ps.phi[k];
        stt += ps.t[k] * ps.t[k];
        stp += ps.t[k] * ps.phi[k];
    }
    const double d = static_cast<double>(n) * stt - st * st;
    return d > 0.0 ? (static_cast<double>(n) * stp - st * sp) / d : 0.0;
}

void reduce(CoherenceResult& res, const std::vector<double>& grid, const std::vector<std::vector<cplx>>& z) {
    const std::size_t n = z.size();
    std::vector<cplx> col(n);
    res.contrast.clear();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (std::size_t j = 0; j < n; ++j) col[j] = z[j][k];
        ContrastPoint cp = contrast_of(col, n);
        cp.t = grid[k];
        res.contrast.push_back(cp);
    }
    res.survival = res.contrast.empty() ? 0.0 : res.contrast.back().survival;
}

}  // namespace

CoherenceResult run_sequence(const EnsembleSpec& spec, const PulseSequence& seq, const TransitionFunction& omega,
                             double reference, const dynamics::MotionModel& motion, const RunOptions& opt) {
    seq.validate();
    const auto atoms = sample_ensemble(spec);
    const auto grid = readout_grid(seq, opt.output_dt);
    const std::size_t n = atoms.size();

    CoherenceResult res;
    std::vector<std::vector<cplx>> z(n);
    res.checkpoint_phases.assign(n, std::vector<double>(opt.phase_checkpoints.size(), nan));
    res.final_state.resize(n);
    res.drift_rate.assign(n, nan);
    res.status.assign(n, dynamics::Status::lost);
    std::vector<double> cad(n, 0.0), sin2(n, 0.0);
    std::vector<std::size_t> cnt(n, 0);

    parallel_for(n, opt.threads, [&](std::size_t j) {
        dynamics::Trajectory tr;
        if (motion.in_domain(atoms[j].r)) {
            tr = dynamics::integrate_trajectory(atoms[j], motion, seq.duration, opt.integrator);
        } else {
            tr.status = dynamics::Status::lost;
        }
        if (tr.status == dynamics::Status::lost) clip_to_transition_range(tr, omega);
        const PhaseSeries ps = accumulate_phase(tr, omega, reference);
        const auto angles = pulse_angles(seq, spec.seed, j);
        z[j] = propagate_spin(seq, angles, ps, grid, &res.final_state[j]);
        for (std::size_t c = 0; c < opt.phase_checkpoints.size(); ++c)
            res.checkpoint_phases[j][c] = phase_at(ps, opt.phase_checkpoints[c]);
        res.drift_rate[j] = ps.t.size() > 1 ? drift_fit(ps) : nan;
        res.status[j] = tr.status;
        cad[j] = ps.cadence_error;
        for (const auto& s : tr.samples) {
            const double sn = std::sin(s.theta);
            sin2[j] += sn * sn;
        }
        cnt[j] = tr.samples.size();
    });

    reduce(res, grid, z);
    if (res.contrast.empty() || res.contrast.front().survival == 0.0)
        throw EmptyEnsembleError("every trajectory of the ensemble was lost");
    double s2 = 0.0;
    std::size_t c2 = 0;
    for (std::size_t j = 0; j < n; ++j) {
        res.cadence_error = std::max(res.cadence_error, cad[j]);
        s2 += sin2[j];
        c2 += cnt[j];
    }
    res.mean_sin2_theta = c2 ? s2 / static_cast<double>(c2) : 0.0;
    return res;
}

CoherenceResult run_synthetic(const std::vector<PhaseSeries>& phases, const PulseSequence& seq, std::uint64_t seed,
                              double output_dt) {
    seq.validate();
    if (phases.empty()) throw EmptyEnsembleError("synthetic ensemble is empty");
    const auto grid = readout_grid(seq, output_dt);
    CoherenceResult res;
    std::vector<std::vector<cplx>> z(phases.size());
    res.final_state.resize(phases.size());
    for (std::size_t j = 0; j < phases.size(); ++j) {
        z[j] = propagate_spin(seq, pulse_angles(seq, seed, j), phases[j], grid, &res.final_state[j]);
        res.drift_rate.push_back(drift_fit(phases[j]));
        res.status.push_back(dynamics::Status::completed);
    }
    reduce(res, grid, z);
    return res;
}

T2Result extract_t2(const std::vector<ContrastPoint>& curve, double revival_from) {
    T2Result r;
    for (std::size_t k = 1; k < curve.size(); ++k)
        if (curve[k - 1].C >= 0.5 && curve[k].C < 0.5) {
            const double w = (curve[k - 1].C - 0.5) / (curve[k - 1].C - curve[k].C);
            r.crossing = curve[k - 1].t + w * (curve[k].t - curve[k - 1].t);
            break;
        }
    r.saturated = !r.crossing;
    if (revival_from > 0.0) {
        for (const auto& p : curve)
            if (p.t >= revival_from - 1e-12 && p.C > r.peak_contrast) {
                r.peak_contrast = p.C;
                r.peak_time = p.t;
            }
        if (r.peak_contrast > 0.0 && r.peak_contrast < 1.0 && r.peak_time > 0.0)
            r.equivalent = -r.peak_time / std::log(r.peak_contrast);
    }
    return r;
}

FrequencySpread frequency_spread(const std::vector<dynamics::Trajectory>& trajectories,
                                 const TransitionFunction& omega) {
    FrequencySpread fs;
    double mean = 0.0, m2 = 0.0;
    for (const auto& tr : trajectories)
        for (const auto& s : tr.samples) {
            const double w = omega(s.E, s.theta);
            ++fs.samples;
            const double d = w - mean;
            mean += d / static_cast<double>(fs.samples);
            m2 += d * (w - mean);
        }
    if (fs.samples > 1) {
        fs.mean = mean;
        fs.stddev = std::sqrt(m2 / static_cast<double>(fs.samples - 1));
        fs.broadening = 2.0 * fs.stddev;
    }
    return fs;
}

// ---- patch field ----------------------------------------------------------------

namespace {

std::vector<Vector3d> ball_points(double radius, int n, std::uint64_t seed) {
    auto rng = stream_rng(seed, 0, 0x62616c6cull);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vector3d> pts;
    pts.reserve(static_cast<std::size_t>(n));
    while (static_cast<int>(pts.size()) < n) {
        const Vector3d p(u(rng), u(rng), u(rng));
        if (p.squaredNorm() <= 1.0) pts.push_back(radius * p);
    }
    return pts;
}

}  // namespace

PatchFieldModel::PatchFieldModel(std::shared_ptr<const field::FieldModel> base, const PatchSpec& spec)
    : base_(std::move(base)) {
    if (!base_) throw ConfigError("patch field needs a base field model");
    if (!(spec.mean >= 0.0) || !(spec.dispersion >= 0.0) || !(spec.correlation > 0.0) || spec.modes < 1 ||
        !(spec.ball_radius > 0.0))
        throw ConfigError("invalid patch-field spec");
    if (spec.mean == 0.0 && spec.dispersion == 0.0) return;

    auto rng = stream_rng(spec.seed, 0, 0x7061746368ull);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01(0.0, units::two_pi);
    const Vector3d dir = normal3(rng).normalized();
    // Potential psi = sum b sin(k.r + phase) with k ~ N(0, 1/l^2): the field
    // -grad psi is curl-free with a squared-exponential covariance.
    for (int m = 0; m < spec.modes; ++m) {
        k_.push_back(normal3(rng) / spec.correlation);
        phase_.push_back(u01(rng));
        amp_.push_back(n01(rng) * std::sqrt(2.0 / spec.modes) * spec.correlation);
    }
    if (spec.dispersion == 0.0) amp_.assign(amp_.size(), 0.0);

    const auto pts = ball_points(spec.ball_radius, 4096, spec.seed);
    std::vector<Vector3d> fluct;
    fluct.reserve(pts.size());
    for (const auto& p : pts) fluct.push_back(patch(p).E);
    double U = spec.mean, s = 1.0;
    {
        double m = 0.0, m2 = 0.0;
        for (const auto& f : fluct) {
            const double a = f.dot(dir);
            m += a;
            m2 += a * a;
        }
        m /= static_cast<double>(fluct.size());
        const double sd = std::sqrt(std::max(0.0, m2 / static_cast<double>(fluct.size()) - m * m));
        if (sd > 0.0) s = spec.dispersion / sd;
    }
    // Fixed point on (U, s) for the magnitude statistics of U dir + s f.
    for (int it = 0; it < 50 && spec.dispersion > 0.0; ++it) {
        double m = 0.0, m2 = 0.0;
        for (const auto& f : fluct) {
            const double a = (U * dir + s * f).norm();
            m += a;
            m2 += a * a;
        }
        m /= static_cast<double>(fluct.size());
        const double sd = std::sqrt(std::max(0.0, m2 / static_cast<double>(fluct.size()) - m * m));
        if (sd > 0.0) s *= spec.dispersion / sd;
        U += spec.mean - m;
        if (std::abs(spec.mean - m) < 1e-9 * spec.mean && std::abs(sd - spec.dispersion) < 1e-9 * spec.dispersion)
            break;
    }
    for (auto& a : amp_) a *= s;
    uniform_ = U * dir;
}

field::FieldSample PatchFieldModel::patch(const Eigen::Vector3d& x) const {
    field::FieldSample fs;
    fs.E = uniform_;
    fs.J.setZero();
    for (std::size_t m = 0; m < k_.size(); ++m) {
        const double arg = k_[m].dot(x) + phase_[m];
        fs.E -= amp_[m] * std::cos(arg) * k_[m];
        fs.J += amp_[m] * std::sin(arg) * (k_[m] * k_[m].transpose());
    }
    return fs;
}

field::FieldSample PatchFieldModel::sample(const Eigen::Vector3d& x, double t) const {
    field::FieldSample fs = base_->sample(x, t);
    if (k_.empty() && uniform_.isZero()) return fs;
    const field::FieldSample p = patch(x);
    fs.E += p.E;
    fs.J += p.J;
    return fs;
}

std::shared_ptr<const field::FieldModel> apply_patch_field(std::shared_ptr<const field::FieldModel> base,
                                                           const PatchSpec& spec) {
    if (spec.mean == 0.0 && spec.dispersion == 0.0) return base;
    return std::make_shared<PatchFieldModel>(std::move(base), spec);
}

PatchStats patch_statistics(const PatchFieldModel& model, double ball_radius, int n, std::uint64_t seed) {
    const auto pts = ball_points(ball_radius, n, seed ^ 0x5eedull);
    double m = 0.0, m2 = 0.0;
    for (const auto& p : pts) {
        const double a = model.patch(p).E.norm();
        m += a;
        m2 += a * a;
    }
    PatchStats st;
    st.mean = m / n;
    st.rms_dispersion = std::sqrt(std::max(0.0, m2 / n - st.mean * st.mean));
    return st;
}

dynamics::LevelPotential dressed_potential(const dressing::DressedAtom& atom, const dressing::DressingConfig& cfg,
                                           const atom::RydbergLevel& level, double E_min, double E_max, int n) {
    if (n < 3 || !(E_max > E_min)) throw ConfigError("dressed potential grid needs >= 3 points on a positive range");
    std::vector<double> shifts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double E = E_min + (E_max - E_min) * i / (n - 1);
        shifts[static_cast<std::size_t>(i)] = atom.dressed_energy(level, E, 0.0, cfg);
    }
    return dynamics::tabulated_potential(level.label + " (dressed)", E_min, E_max, std::move(shifts));
}

}  // namespace rydtrap::ensemble
