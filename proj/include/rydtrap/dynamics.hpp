#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rydtrap/field_model.hpp"
#include "rydtrap/stark.hpp"

namespace rydtrap::dynamics {

using Eigen::Vector3d;

struct TrajectoryState {
    double t = 0.0;
    Vector3d r = Vector3d::Zero();
    Vector3d v = Vector3d::Zero();
    double E = 0.0;      // V/m, cached
    double theta = 0.0;  // rad, cached
};

/// Internal energy shift of one level as a function of field magnitude:
/// shift / hbar (rad/s) and its slope (rad/s per V/m).
struct LevelPotential {
    std::string name;
    std::function<void(double E, double& shift, double& slope)> eval;
};

LevelPotential stark_potential(const atom::StarkModel& stark, const atom::RydbergLevel& level);
/// shift = alpha E^2 (alpha in rad/s per (V/m)^2).
LevelPotential quadratic_potential(double alpha, std::string name = "quadratic");
/// Natural cubic spline through shifts on a uniform E grid. Outside the
/// grid the end slopes are continued linearly.
LevelPotential tabulated_potential(std::string name, double E_min, double E_max, std::vector<double> shifts);

/// Acceleration field seen by the centre of mass.
class MotionModel {
public:
    struct Sample {
        Vector3d accel = Vector3d::Zero();
        double energy = 0.0;  // J, potential incl. gravity
        double E = 0.0;
        double theta = 0.0;
    };
    virtual ~MotionModel() = default;
    /// May throw OutOfDomainError.
    virtual Sample evaluate(const Vector3d& r, double t) const = 0;
    virtual bool in_domain(const Vector3d& r) const = 0;
    /// Angular drive frequency; 0 for static models.
    virtual double drive_omega() const = 0;
    virtual double mass() const = 0;
};

/// U = hbar shift(|E(r, t)|) + m g z with the instantaneous field.
class StarkMotion : public MotionModel {
public:
    StarkMotion(std::shared_ptr<const field::FieldModel> field, LevelPotential level, double mass,
                double gravity = units::standard_gravity);

    /// Evaluate the field at a fixed time instead of t (drives frozen).
    void freeze_drives(double at_time) { frozen_ = at_time; }

    Sample evaluate(const Vector3d& r, double t) const override;
    bool in_domain(const Vector3d& r) const override { return field_->in_domain(r); }
    double drive_omega() const override { return frozen_ ? 0.0 : field_->drive_omega(); }
    double mass() const override { return mass_; }
    const LevelPotential& level() const { return level_; }
    const field::FieldModel& field() const { return *field_; }

private:
    std::shared_ptr<const field::FieldModel> field_;
    LevelPotential level_;
    double mass_;
    double gravity_;
    std::optional<double> frozen_;
};

/// Analytic anisotropic harmonic well, no field (E = theta = 0).
class HarmonicMotion : public MotionModel {
public:
    HarmonicMotion(Vector3d omega, double mass, double domain_radius = 1.0, double drive_omega = 0.0)
        : omega_(omega), mass_(mass), radius_(domain_radius), drive_(drive_omega) {}
    Sample evaluate(const Vector3d& r, double t) const override;
    bool in_domain(const Vector3d& r) const override { return r.norm() <= radius_; }
    double drive_omega() const override { return drive_; }
    double mass() const override { return mass_; }

private:
    Vector3d omega_;
    double mass_;
    double radius_;
    double drive_;
};

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol_position = 1e-13;  // m
    double atol_velocity = 1e-11;  // m/s
    double atol_phase = 1e-9;      // rad
    int samples_per_period = 20;   // of the drive, when there is one
    double sample_dt = 0.0;        // s; overrides the above when > 0
    double static_sample_dt = 1e-4;
    double loss_radius = 500e-6;   // m
    long max_steps = 100'000'000;
    double min_step = 1e-14;       // s
    bool record = true;            // keep every sample, else first and last
};

enum class Status { completed, lost };
std::string to_string(Status s);

struct Trajectory {
    std::string level;
    std::vector<TrajectoryState> samples;
    std::vector<double> phase;  // per sample, when a phase rate was given
    Status status = Status::completed;
    double end_time = 0.0;
    double max_radius = 0.0;
    long steps = 0;
    double error_estimate = 0.0;  // sum of per-step position error estimates, m
};

/// Extra quantity integrated along the path, e.g. a coherence phase:
/// rate (rad/s) from the local field magnitude and angle.
using PhaseRate = std::function<double(double E, double theta, const Vector3d& r, double t)>;

/// Embedded Runge-Kutta Prince-Dormand 8(7) with adaptive steps; output
/// times are hit exactly. Leaving the loss sphere or the field domain ends
/// the trajectory with status lost.
Trajectory integrate_trajectory(const TrajectoryState& initial, const MotionModel& model, double duration,
                                const IntegratorOptions& opt = {}, const PhaseRate* phase_rate = nullptr);

/// Runs a batch concurrently; the result order matches the input order.
std::vector<Trajectory> integrate_batch(const std::vector<TrajectoryState>& initial, const MotionModel& model,
                                        double duration, const IntegratorOptions& opt = {}, int threads = 0,
                                        const PhaseRate* phase_rate = nullptr);

/// Fills E and theta of a state from the model.
TrajectoryState with_field(TrajectoryState s, const MotionModel& model);

/// Frequency of the largest Hann-windowed Fourier amplitude of a uniformly
/// sampled series in [f_lo, f_hi]; grid search then golden-section refine.
double spectral_peak(const std::vector<double>& t, const std::vector<double>& x, double f_lo, double f_hi);

struct FrequencyOptions {
    double displacement = 10e-6;  // m
    double duration = 0.5;        // s
    double f_min = 5.0;           // Hz
    double f_max_fraction = 0.45; // of the drive frequency
    double f_max_static = 1e4;    // Hz, static models
    IntegratorOptions integrator{};
};

struct TrapFrequencies {
    double f_long = 0.0;   // Hz, along z
    double f_trans = 0.0;  // Hz, along x
    double micromotion = 0.0;  // Hz, strongest line near the drive (0 if static)
    Vector3d mean_position = Vector3d::Zero();  // time average, atom released at rest at O
};

/// Small-amplitude launches along z and x; throws UnstableTrapError if a
/// test trajectory is lost.
TrapFrequencies trap_frequencies(const MotionModel& model, const FrequencyOptions& opt = {});

/// Time-averaged position of an atom released at rest at `start`.
Vector3d mean_position(const MotionModel& model, const Vector3d& start, double duration,
                       const IntegratorOptions& opt = {});

using EnsembleSampler = std::function<std::vector<TrajectoryState>(double T0)>;

struct DepthOptions {
    double probe_duration = 0.2;   // s
    double radius = 400e-6;        // m
    double T_lo = 1e-6;            // K
    double T_hi = 2e-3;            // K
    int bisections = 8;
    int threads = 0;
    IntegratorOptions integrator{};
};

struct RetentionPoint {
    double T0 = 0.0;
    int kept = 0;
    int total = 0;
    double fraction() const { return total ? static_cast<double>(kept) / total : 0.0; }
};

struct DepthResult {
    double T_depth = 0.0;
    double ci_lo = 0.0;  // K, Wilson 95% bracket
    double ci_hi = 0.0;
    bool saturated = false;      // retention >= 1/2 at T_hi
    bool below_range = false;    // retention < 1/2 at T_lo
    std::vector<RetentionPoint> history;
};

/// Retention after the probe duration (never leaving `radius`).
RetentionPoint retention(const MotionModel& model, const std::vector<TrajectoryState>& atoms, double T0,
                         const DepthOptions& opt);

/// Log-bisection of T0 for retention 1/2. Throws PhysicsError when
/// retention rises with T0 beyond binomial noise.
DepthResult trap_depth(const MotionModel& model, const EnsembleSampler& sampler, const DepthOptions& opt = {});

struct ThetaStats {
    double mean_theta = 0.0;
    double mean_sin2 = 0.0;
    std::size_t samples = 0;
    /// 1 / (Gamma_sp <sin^2> + Gamma_s); infinity when both vanish.
    double lifetime(const atom::StarkModel& stark, double surface_rate) const;
};

ThetaStats mean_theta(const std::vector<Trajectory>& trajectories);

struct SternGerlachResult {
    std::vector<double> t;
    std::vector<double> separation;  // m
    std::optional<double> crossing_time;
    bool partial = false;  // one of the twins was lost
};

/// Twin trajectories from the same initial state in two potentials.
SternGerlachResult stern_gerlach(const TrajectoryState& initial, const MotionModel& model_e,
                                 const MotionModel& model_g, double duration, double threshold = 0.8e-6,
                                 const IntegratorOptions& opt = {});

}  // namespace rydtrap::dynamics
