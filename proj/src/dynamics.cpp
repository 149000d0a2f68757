#include "rydtrap/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>
#include <gsl/gsl_spline.h>

#include "rydtrap/errors.hpp"
#include "rydtrap/log.hpp"

namespace rydtrap::dynamics {

namespace {

// GSL's default handler aborts; every status is checked explicitly here.
const bool gsl_handler_off = [] {
    gsl_set_error_handler_off();
    return true;
}();

}  // namespace

// ---- level potentials ----------------------------------------------------

LevelPotential stark_potential(const atom::StarkModel& stark, const atom::RydbergLevel& level) {
    level.validate();
    return {level.label, [stark, level](double E, double& shift, double& slope) {
                shift = stark.stark_shift(level, E);
                slope = stark.stark_slope(level, E);
            }};
}

LevelPotential quadratic_potential(double alpha, std::string name) {
    return {std::move(name), [alpha](double E, double& shift, double& slope) {
                shift = alpha * E * E;
                slope = 2.0 * alpha * E;
            }};
}

LevelPotential tabulated_potential(std::string name, double E_min, double E_max, std::vector<double> shifts) {
    const int n = static_cast<int>(shifts.size());
    if (n < 3 || !(E_max > E_min)) throw ConfigError("tabulated potential needs >= 3 points on a positive E range");
    std::vector<double> E(n);
    for (int i = 0; i < n; ++i) E[i] = E_min + (E_max - E_min) * i / (n - 1);
    std::shared_ptr<gsl_spline> spline(gsl_spline_alloc(gsl_interp_cspline, n), gsl_spline_free);
    if (gsl_spline_init(spline.get(), E.data(), shifts.data(), n) != GSL_SUCCESS)
        throw ConfigError("tabulated potential: spline construction failed");
    // Evaluation without an accelerator is read-only and thread-safe.
    const double lo_v = shifts.front(), hi_v = shifts.back();
    const double lo_s = gsl_spline_eval_deriv(spline.get(), E_min, nullptr);
    const double hi_s = gsl_spline_eval_deriv(spline.get(), E_max, nullptr);
    return {std::move(name), [spline, E_min, E_max, lo_v, hi_v, lo_s, hi_s](double e, double& shift, double& slope) {
                if (e <= E_min) {
                    slope = lo_s;
                    shift = lo_v + lo_s * (e - E_min);
                } else if (e >= E_max) {
                    slope = hi_s;
                    shift = hi_v + hi_s * (e - E_max);
                } else {
                    shift = gsl_spline_eval(spline.get(), e, nullptr);
                    slope = gsl_spline_eval_deriv(spline.get(), e, nullptr);
                }
            }};
}

// ---- motion models -------------------------------------------------------

StarkMotion::StarkMotion(std::shared_ptr<const field::FieldModel> field, LevelPotential level, double mass,
                         double gravity)
    : field_(std::move(field)), level_(std::move(level)), mass_(mass), gravity_(gravity) {
    if (!field_) throw ConfigError("motion model needs a field model");
    if (!level_.eval) throw ConfigError("motion model needs a level potential");
    if (!(mass_ > 0.0)) throw ConfigError("atomic mass must be positive");
    if (!(gravity_ >= 0.0)) throw ConfigError("gravity must be >= 0 (it points along -z)");
}

MotionModel::Sample StarkMotion::evaluate(const Vector3d& r, double t) const {
    const field::FieldSample fs = field_->sample(r, frozen_ ? *frozen_ : t);
    Sample s;
    s.E = fs.magnitude();
    s.theta = fs.theta();
    double shift = 0.0, slope = 0.0;
    level_.eval(s.E, shift, slope);
    Vector3d grad_E = Vector3d::Zero();
    if (s.E > 0.0) grad_E = fs.J.transpose() * fs.E / s.E;
    s.accel = -units::hbar * slope * grad_E / mass_;
    s.accel.z() -= gravity_;
    s.energy = units::hbar * shift + mass_ * gravity_ * r.z();
    return s;
}

MotionModel::Sample HarmonicMotion::evaluate(const Vector3d& r, double) const {
    Sample s;
    s.accel = -omega_.cwiseProduct(omega_).cwiseProduct(r);
    s.energy = 0.5 * mass_ * omega_.cwiseProduct(omega_).dot(r.cwiseProduct(r));
    return s;
}

std::string to_string(Status s) { return s == Status::completed ? "completed" : "lost"; }

TrajectoryState with_field(TrajectoryState s, const MotionModel& model) {
    const auto smp = model.evaluate(s.r, s.t);
    s.E = smp.E;
    s.theta = smp.theta;
    return s;
}

// ---- integrator ----------------------------------------------------------

namespace {

struct OdeContext {
    const MotionModel* model = nullptr;
    const PhaseRate* rate = nullptr;
    std::exception_ptr error;
    bool out_of_domain = false;
};

int rhs(double t, const double y[], double dydt[], void* params) {
    auto* ctx = static_cast<OdeContext*>(params);
    try {
        const Vector3d r(y[0], y[1], y[2]);
        const auto s = ctx->model->evaluate(r, t);
        dydt[0] = y[3];
        dydt[1] = y[4];
        dydt[2] = y[5];
        dydt[3] = s.accel.x();
        dydt[4] = s.accel.y();
        dydt[5] = s.accel.z();
        if (ctx->rate) dydt[6] = (*ctx->rate)(s.E, s.theta, r, t);
        return GSL_SUCCESS;
    } catch (const OutOfDomainError&) {
        ctx->out_of_domain = true;
    } catch (...) {
        ctx->error = std::current_exception();
    }
    return GSL_EBADFUNC;
}

struct GslOde {
    gsl_odeiv2_step* step = nullptr;
    gsl_odeiv2_control* control = nullptr;
    gsl_odeiv2_evolve* evolve = nullptr;
    GslOde(std::size_t dim, double rtol, const double* scale) {
        step = gsl_odeiv2_step_alloc(gsl_odeiv2_step_rk8pd, dim);
        control = gsl_odeiv2_control_scaled_new(1.0, rtol, 1.0, 0.0, scale, dim);
        evolve = gsl_odeiv2_evolve_alloc(dim);
        if (!step || !control || !evolve) throw IntegratorError("cannot allocate ODE workspace");
    }
    ~GslOde() {
        if (evolve) gsl_odeiv2_evolve_free(evolve);
        if (control) gsl_odeiv2_control_free(control);
        if (step) gsl_odeiv2_step_free(step);
    }
    GslOde(const GslOde&) = delete;
    GslOde& operator=(const GslOde&) = delete;
};

}  // namespace

Trajectory integrate_trajectory(const TrajectoryState& initial, const MotionModel& model, double duration,
                                const IntegratorOptions& opt, const PhaseRate* phase_rate) {
    if (!(duration > 0.0)) throw ConfigError("trajectory duration must be positive");
    if (!(opt.rtol > 0.0) || !(opt.loss_radius > 0.0)) throw ConfigError("invalid integrator options");
    if (opt.samples_per_period < 20 && opt.sample_dt <= 0.0 && model.drive_omega() > 0.0)
        throw ConfigError("sampling cadence must resolve the micromotion (>= 20 samples per drive period)");
    if (!initial.r.allFinite() || !initial.v.allFinite()) throw ConfigError("non-finite initial state");
    if (!model.in_domain(initial.r)) throw OutOfDomainError("initial position outside the field domain");

    double dt = opt.sample_dt;
    if (dt <= 0.0)
        dt = model.drive_omega() > 0.0 ? units::two_pi / model.drive_omega() / opt.samples_per_period
                                       : opt.static_sample_dt;
    const std::size_t dim = phase_rate ? 7 : 6;
    const double scale[7] = {opt.atol_position, opt.atol_position, opt.atol_position, opt.atol_velocity,
                             opt.atol_velocity,  opt.atol_velocity, opt.atol_phase};
    GslOde ode(dim, opt.rtol, scale);
    OdeContext ctx{&model, phase_rate, nullptr, false};
    gsl_odeiv2_system sys{rhs, nullptr, dim, &ctx};

    double y[7] = {initial.r.x(), initial.r.y(), initial.r.z(), initial.v.x(), initial.v.y(), initial.v.z(), 0.0};
    double t = initial.t;
    const double t_end = initial.t + duration;
    double h = std::min(dt, 1e-6);

    Trajectory traj;
    auto snapshot = [&](double tt) {
        TrajectoryState s;
        s.t = tt;
        s.r = {y[0], y[1], y[2]};
        s.v = {y[3], y[4], y[5]};
        try {
            const auto smp = model.evaluate(s.r, tt);
            s.E = smp.E;
            s.theta = smp.theta;
        } catch (const OutOfDomainError&) {
        }
        return s;
    };
    auto record = [&](double tt, bool force) {
        if (opt.record || force || traj.samples.empty()) {
            traj.samples.push_back(snapshot(tt));
            if (phase_rate) traj.phase.push_back(y[6]);
        } else {
            traj.samples.back() = snapshot(tt);
            if (phase_rate) traj.phase.back() = y[6];
        }
    };
    record(t, true);
    if (!opt.record) record(t, true);  // slot for the final state

    long k = 0;
    double r_prev = initial.r.norm();
    traj.max_radius = r_prev;
    while (t < t_end) {
        ++k;
        const double t_next = std::min(initial.t + k * dt, t_end);
        while (t < t_next) {
            const double t_before = t;
            const int status = gsl_odeiv2_evolve_apply(ode.evolve, ode.control, ode.step, &sys, &t, t_next, &h, y);
            if (ctx.error) std::rethrow_exception(ctx.error);
            if (ctx.out_of_domain || status == GSL_EBADFUNC) {
                traj.status = Status::lost;
                traj.end_time = t;
                record(t, true);
                return traj;
            }
            if (status != GSL_SUCCESS) {
                std::ostringstream os;
                os << "integrator failed at t = " << t << " s (GSL status " << status << ")";
                throw IntegratorError(os.str());
            }
            if (++traj.steps > opt.max_steps) throw IntegratorError("integrator exceeded the step budget");
            if (h < opt.min_step && t < t_next) {
                std::ostringstream os;
                os << "integrator step size underflow (h = " << h << " s) at t = " << t << " s";
                throw IntegratorError(os.str());
            }
            // Accumulated local errors: a conservative bound on the global one.
            traj.error_estimate += std::max({std::abs(ode.evolve->yerr[0]), std::abs(ode.evolve->yerr[1]),
                                             std::abs(ode.evolve->yerr[2])});
            const Vector3d r(y[0], y[1], y[2]);
            const double rn = r.norm();
            traj.max_radius = std::max(traj.max_radius, rn);
            if (rn > opt.loss_radius || !model.in_domain(r)) {
                traj.status = Status::lost;
                // Linear estimate of the crossing time inside the last step.
                const double frac = rn > opt.loss_radius && rn > r_prev ? (opt.loss_radius - r_prev) / (rn - r_prev) : 1.0;
                traj.end_time = t_before + std::clamp(frac, 0.0, 1.0) * (t - t_before);
                record(t, true);
                return traj;
            }
            r_prev = rn;
        }
        record(t, false);
    }
    traj.end_time = t;
    return traj;
}

std::vector<Trajectory> integrate_batch(const std::vector<TrajectoryState>& initial, const MotionModel& model,
                                        double duration, const IntegratorOptions& opt, int threads,
                                        const PhaseRate* phase_rate) {
    std::vector<Trajectory> out(initial.size());
    int n = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n = std::max(1, std::min<int>(n, static_cast<int>(initial.size())));
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < initial.size();) {
            try {
                out[i] = integrate_trajectory(initial[i], model, duration, opt, phase_rate);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!err) err = std::current_exception();
                next = initial.size();
            }
        }
    };
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (err) std::rethrow_exception(err);
    return out;
}

// ---- spectral analysis / frequencies --------------------------------------

double spectral_peak(const std::vector<double>& t, const std::vector<double>& x, double f_lo, double f_hi) {
    const std::size_t n = std::min(t.size(), x.size());
    if (n < 16) throw PhysicsError("spectral analysis needs at least 16 samples");
    if (!(f_hi > f_lo) || !(f_lo >= 0.0)) throw ConfigError("invalid spectral search band");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = (x[i] - mean) * 0.5 * (1.0 - std::cos(units::two_pi * static_cast<double>(i) / (n - 1)));
    const double t0 = t[0];
    auto amp = [&](double f) {
        // Phasor recurrence: one complex multiply per sample (uniform t).
        const double dt = (t[n - 1] - t0) / static_cast<double>(n - 1);
        const std::complex<double> step = std::polar(1.0, -units::two_pi * f * dt);
        std::complex<double> ph(1.0, 0.0), acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            acc += w[i] * ph;
            ph *= step;
            if ((i & 1023) == 1023) ph /= std::abs(ph);
        }
        return std::abs(acc);
    };
    const double T = t[n - 1] - t0;
    const double df = 1.0 / (8.0 * T);
    double best_f = f_lo, best_a = -1.0;
    for (double f = f_lo; f <= f_hi; f += df) {
        const double a = amp(f);
        if (a > best_a) {
            best_a = a;
            best_f = f;
        }
    }
    double a = std::max(f_lo, best_f - df), b = std::min(f_hi, best_f + df);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = amp(c), fd = amp(d);
    for (int it = 0; it < 80 && (b - a) > 1e-12 * std::max(1.0, best_f); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = amp(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = amp(d);
        }
    }
    return 0.5 * (a + b);
}

namespace {

std::vector<double> component(const Trajectory& tr, int axis) {
    std::vector<double> v;
    v.reserve(tr.samples.size());
    for (const auto& s : tr.samples) v.push_back(s.r(axis));
    return v;
}

std::vector<double> times(const Trajectory& tr) {
    std::vector<double> v;
    v.reserve(tr.samples.size());
    for (const auto& s : tr.samples) v.push_back(s.t);
    return v;
}

}  // namespace

Vector3d mean_position(const MotionModel& model, const Vector3d& start, double duration, const IntegratorOptions& opt) {
    TrajectoryState s0;
    s0.r = start;
    IntegratorOptions o = opt;
    o.record = true;
    const Trajectory tr = integrate_trajectory(s0, model, duration, o);
    if (tr.status == Status::lost) throw UnstableTrapError("atom released at rest was lost: no stable trap");
    // Trapezoidal time average over the uniform cadence.
    Vector3d acc = Vector3d::Zero();
    for (std::size_t i = 1; i < tr.samples.size(); ++i)
        acc += 0.5 * (tr.samples[i].r + tr.samples[i - 1].r) * (tr.samples[i].t - tr.samples[i - 1].t);
    return acc / (tr.samples.back().t - tr.samples.front().t);
}

TrapFrequencies trap_frequencies(const MotionModel& model, const FrequencyOptions& opt) {
    if (!(opt.displacement > 0.0) || !(opt.duration > 0.0)) throw ConfigError("invalid trap-frequency options");
    IntegratorOptions io = opt.integrator;
    io.record = true;
    const double f_drive = model.drive_omega() / units::two_pi;
    auto launch = [&](const Vector3d& r0) {
        TrajectoryState s0;
        s0.r = r0;
        Trajectory tr = integrate_trajectory(s0, model, opt.duration, io);
        if (tr.status == Status::lost) {
            std::ostringstream os;
            os << "test trajectory from (" << r0.transpose() << ") m was lost after " << tr.end_time
               << " s: the trap is unstable";
            throw UnstableTrapError(os.str());
        }
        return tr;
    };
    const Trajectory tz = launch({0.0, 0.0, opt.displacement});
    const Trajectory tx = launch({opt.displacement, 0.0, 0.0});
    const auto tt = times(tz);
    const double nyquist = 0.5 * (tt.size() - 1) / (tt.back() - tt.front());
    const double f_hi = std::min(f_drive > 0.0 ? opt.f_max_fraction * f_drive : opt.f_max_static, 0.9 * nyquist);
    TrapFrequencies out;
    out.f_long = spectral_peak(tt, component(tz, 2), opt.f_min, f_hi);
    out.f_trans = spectral_peak(times(tx), component(tx, 0), opt.f_min, f_hi);
    if (f_drive > 0.0) {
        const Trajectory t0 = launch(Vector3d::Zero());
        out.micromotion = spectral_peak(times(t0), component(t0, 2), 0.9 * f_drive, std::min(1.1 * f_drive, 0.95 * nyquist));
        Vector3d acc = Vector3d::Zero();
        for (std::size_t i = 1; i < t0.samples.size(); ++i)
            acc += 0.5 * (t0.samples[i].r + t0.samples[i - 1].r) * (t0.samples[i].t - t0.samples[i - 1].t);
        out.mean_position = acc / (t0.samples.back().t - t0.samples.front().t);
    }
    return out;
}

// ---- depth -------------------------------------------------------------------

RetentionPoint retention(const MotionModel& model, const std::vector<TrajectoryState>& atoms, double T0,
                         const DepthOptions& opt) {
    IntegratorOptions io = opt.integrator;
    io.record = false;
    io.loss_radius = opt.radius;
    // Atoms sampled outside the probe sphere or the domain count as lost.
    std::vector<TrajectoryState> inside;
    for (const auto& a : atoms)
        if (a.r.norm() <= opt.radius && model.in_domain(a.r)) inside.push_back(a);
    RetentionPoint p;
    p.T0 = T0;
    p.total = static_cast<int>(atoms.size());
    const auto trs = integrate_batch(inside, model, opt.probe_duration, io, opt.threads);
    for (const auto& tr : trs) p.kept += tr.status == Status::completed;
    return p;
}

namespace {

// Wilson score interval, z = 1.96.
std::pair<double, double> wilson(int k, int n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.96, p = static_cast<double>(k) / n, z2 = z * z;
    const double c = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double h = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / (1 + z2 / n);
    return {c - h, c + h};
}

}  // namespace

DepthResult trap_depth(const MotionModel& model, const EnsembleSampler& sampler, const DepthOptions& opt) {
    if (!(opt.T_lo > 0.0) || !(opt.T_hi > opt.T_lo) || opt.bisections < 0)
        throw ConfigError("invalid trap-depth search box");
    DepthResult res;
    auto probe = [&](double T) {
        const auto atoms = sampler(T);
        if (atoms.empty()) throw EmptyEnsembleError("trap-depth probe ensemble is empty");
        RetentionPoint p = retention(model, atoms, T, opt);
        res.history.push_back(p);
        log::info("depth probe T0 = " + std::to_string(T * 1e6) + " uK: retention " + std::to_string(p.kept) + "/" +
                  std::to_string(p.total));
        return p;
    };
    RetentionPoint lo = probe(opt.T_lo);
    RetentionPoint hi = probe(opt.T_hi);
    if (hi.fraction() >= 0.5) {
        res.saturated = true;
        res.T_depth = opt.T_hi;
    } else if (lo.fraction() < 0.5) {
        res.below_range = true;
        res.T_depth = opt.T_lo;
    } else {
        for (int i = 0; i < opt.bisections; ++i) {
            const double Tm = std::sqrt(lo.T0 * hi.T0);
            const RetentionPoint m = probe(Tm);
            (m.fraction() >= 0.5 ? lo : hi) = m;
        }
        // Log-linear interpolation of the half-retention point in the bracket.
        const double fl = lo.fraction(), fh = hi.fraction();
        const double w = fl > fh ? (fl - 0.5) / (fl - fh) : 0.5;
        res.T_depth = std::exp(std::log(lo.T0) + w * (std::log(hi.T0) - std::log(lo.T0)));
    }

    std::vector<RetentionPoint> sorted = res.history;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.T0 < b.T0; });
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            const auto a = wilson(sorted[i].kept, sorted[i].total);
            const auto b = wilson(sorted[j].kept, sorted[j].total);
            if (b.first > a.second) {
                std::ostringstream os;
                os << "retention rises with temperature beyond binomial noise (" << sorted[i].kept << "/"
                   << sorted[i].total << " at " << sorted[i].T0 * 1e6 << " uK vs " << sorted[j].kept << "/"
                   << sorted[j].total << " at " << sorted[j].T0 * 1e6 << " uK); increase the ensemble size";
                throw PhysicsError(os.str());
            }
        }
    res.ci_lo = opt.T_lo;
    res.ci_hi = opt.T_hi;
    for (const auto& p : sorted) {
        const auto [l, u] = wilson(p.kept, p.total);
        if (l > 0.5) res.ci_lo = std::max(res.ci_lo, p.T0);
        if (u < 0.5) res.ci_hi = std::min(res.ci_hi, p.T0);
    }
    return res;
}

// ---- theta, Stern-Gerlach ---------------------------------------------------

double ThetaStats::lifetime(const atom::StarkModel& stark, double surface_rate) const {
    const double rate = stark.gamma_sp() * mean_sin2 + surface_rate;
    return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

ThetaStats mean_theta(const std::vector<Trajectory>& trajectories) {
    ThetaStats st;
    double sum_t = 0.0, sum_s = 0.0;
    for (const auto& tr : trajectories)
        for (const auto& s : tr.samples) {
            sum_t += s.theta;
            const double sn = std::sin(s.theta);
            sum_s += sn * sn;
            ++st.samples;
        }
    if (st.samples) {
        st.mean_theta = sum_t / static_cast<double>(st.samples);
        st.mean_sin2 = sum_s / static_cast<double>(st.samples);
    }
    return st;
}

SternGerlachResult stern_gerlach(const TrajectoryState& initial, const MotionModel& model_e,
                                 const MotionModel& model_g, double duration, double threshold,
                                 const IntegratorOptions& opt) {
    IntegratorOptions io = opt;
    io.record = true;
    if (io.sample_dt <= 0.0) {
        const double w = std::max(model_e.drive_omega(), model_g.drive_omega());
        io.sample_dt = w > 0.0 ? units::two_pi / w / io.samples_per_period : io.static_sample_dt;
    }
    const Trajectory te = integrate_trajectory(initial, model_e, duration, io);
    const Trajectory tg = integrate_trajectory(initial, model_g, duration, io);
    SternGerlachResult res;
    res.partial = te.status == Status::lost || tg.status == Status::lost;
    const std::size_t n = std::min(te.samples.size(), tg.samples.size());
    for (std::size_t i = 0; i < n; ++i) {
        res.t.push_back(te.samples[i].t - initial.t);
        res.separation.push_back((te.samples[i].r - tg.samples[i].r).norm());
    }
    if (threshold <= 0.0) {
        res.crossing_time = 0.0;
    } else {
        for (std::size_t i = 1; i < n; ++i)
            if (res.separation[i] >= threshold) {
                const double s0 = res.separation[i - 1], s1 = res.separation[i];
                const double w = s1 > s0 ? (threshold - s0) / (s1 - s0) : 1.0;
                res.crossing_time = res.t[i - 1] + std::clamp(w, 0.0, 1.0) * (res.t[i] - res.t[i - 1]);
                break;
            }
    }
    return res;
}

}  // namespace rydtrap::dynamics
