#pragma once

#include <array>
#include <complex>
#include <functional>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rydtrap/dressing.hpp"
#include "rydtrap/dynamics.hpp"
#include "rydtrap/field_model.hpp"

namespace rydtrap::ensemble {

using dynamics::TrajectoryState;
using Eigen::Vector3d;

/// Classical treatment of the centre of mass needs T0 above this.
inline constexpr double classical_T_min = 100e-9;  // K

/// One 780 nm photon recoil of rubidium-85.
inline constexpr double rb85_recoil_velocity = units::planck / (780.241e-9 * units::rb85_mass);

/// Stream `stream` of the master seed; streams are independent of how work
/// is scheduled (splitmix64 of seed and counter).
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0);

struct EnsembleSpec {
    double T0 = 0.3e-6;          // K
    double cloud_rms = 0.3e-6;   // m, per axis
    Vector3d center = Vector3d::Zero();
    double recoil = rb85_recoil_velocity;  // m/s along +x
    int N = 500;
    std::uint64_t seed = 1;
    double mass = units::rb85_mass;

    void validate() const;
};

/// Gaussian positions, Maxwell-Boltzmann velocities plus the recoil kick.
/// Atom j only depends on (seed, j), so velocities scale exactly as
/// sqrt(T0) between calls that differ only in T0.
std::vector<TrajectoryState> sample_ensemble(const EnsembleSpec& spec);

// ---- pulses -----------------------------------------------------------------

struct Pulse {
    double time = 0.0;        // s
    double angle = 0.0;       // rad, nominal
    double dispersion = 0.0;  // fractional Gaussian rms of the angle
    double phase = 0.0;       // rad, rotation axis in the equatorial plane
};

enum class SequenceKind { ramsey, echo, multi_echo };
std::string to_string(SequenceKind k);
SequenceKind sequence_kind_from_string(const std::string& s);

struct PulseSequence {
    SequenceKind kind = SequenceKind::ramsey;
    std::vector<Pulse> pulses;
    double duration = 0.0;  // s, readout window [0, duration]

    void validate() const;

    /// pi/2 at t = 0; readout at any t up to duration.
    static PulseSequence ramsey(double duration, double dispersion = 0.0);
    /// pi/2 at 0, pi about x at t_pi (with the angle dispersion), readout
    /// to 2 t_pi unless a longer duration is given.
    static PulseSequence echo(double t_pi, double dispersion = 0.1, double duration = 0.0);
    /// pi pulses at period/2 + k period.
    static PulseSequence multi_echo(double period, double duration, double dispersion = 0.1);
};

// ---- phase ------------------------------------------------------------------

/// omega_eg(E, theta) in rad/s.
using TransitionFunction = std::function<double(double E, double theta)>;

TransitionFunction table_transition(std::shared_ptr<const dressing::DressedTable> table);

struct PhaseSeries {
    std::vector<double> t;
    std::vector<double> phi;    // rad
    double cadence_error = 0.0; // |phi_end(full) - phi_end(half cadence)| / 3, rad
};

/// Trapezoidal integral of omega(E, theta) - reference over the samples.
/// Throws RangeError naming (E, theta) when the table range is left.
PhaseSeries accumulate_phase(const dynamics::Trajectory& trajectory, const TransitionFunction& omega,
                             double reference);

// ---- sequences / contrast ----------------------------------------------------

struct RunOptions {
    double output_dt = 0.5e-3;  // s, contrast grid
    std::vector<double> phase_checkpoints;  // s, per-trajectory phases kept for output
    dynamics::IntegratorOptions integrator{};
    int threads = 0;
};

struct ContrastPoint {
    double t = 0.0;
    double C = 0.0;
    double survival = 0.0;
    double stderr_C = 0.0;
};

struct CoherenceResult {
    std::vector<ContrastPoint> contrast;
    std::vector<std::vector<double>> checkpoint_phases;  // [trajectory][checkpoint]; NaN after loss
    std::vector<std::array<std::complex<double>, 2>> final_state;  // (c_g, c_e) per trajectory
    std::vector<double> drift_rate;   // rad/s, linear fit of phi per trajectory
    std::vector<dynamics::Status> status;
    double cadence_error = 0.0;  // worst per-trajectory estimate, rad
    double survival = 0.0;       // at the end of the window
    double mean_sin2_theta = 0.0;
};

/// Reduces per-trajectory coherences 2 c_e conj(c_g) to C = |mean|, with
/// the standard error of the projection onto the mean direction.
ContrastPoint contrast_of(const std::vector<std::complex<double>>& z, std::size_t total);

/// Propagates one pseudo-spin through the sequence given a phase history;
/// returns the coherence 2 c_e conj(c_g) at each time in `at`.
std::vector<std::complex<double>> propagate_spin(const PulseSequence& seq, const std::vector<double>& pulse_angles,
                                                 const PhaseSeries& phase, const std::vector<double>& at,
                                                 std::array<std::complex<double>, 2>* final_state = nullptr);

/// Per-trajectory pulse angles (nominal times (1 + dispersion * normal)).
std::vector<double> pulse_angles(const PulseSequence& seq, std::uint64_t seed, std::uint64_t trajectory);

/// The transition must cover the (E, theta) range of every surviving
/// trajectory (RangeError otherwise); a lost atom that leaves it first
/// drops out at the last covered sample.
CoherenceResult run_sequence(const EnsembleSpec& spec, const PulseSequence& seq, const TransitionFunction& omega,
                             double reference, const dynamics::MotionModel& motion, const RunOptions& opt = {});

/// Same reduction for prescribed phase histories (no trajectories).
CoherenceResult run_synthetic(const std::vector<PhaseSeries>& phases, const PulseSequence& seq, std::uint64_t seed,
                              double output_dt);

struct T2Result {
    std::optional<double> crossing;   // s, first downward crossing of 1/2
    bool saturated = false;           // never crossed inside the curve
    double peak_time = 0.0;           // revival search
    double peak_contrast = 0.0;
    std::optional<double> equivalent; // -t / ln C at the peak
};

/// T2 from the first crossing; the revival peak is searched in
/// [revival_from, end] when revival_from > 0.
T2Result extract_t2(const std::vector<ContrastPoint>& curve, double revival_from = 0.0);

// ---- ensemble statistics ------------------------------------------------------

struct FrequencySpread {
    double mean = 0.0;        // rad/s
    double stddev = 0.0;      // rad/s, over all samples of all trajectories
    double broadening = 0.0;  // rad/s, 2 stddev
    std::size_t samples = 0;
};

FrequencySpread frequency_spread(const std::vector<dynamics::Trajectory>& trajectories,
                                 const TransitionFunction& omega);

// ---- patch field ----------------------------------------------------------------

struct PatchSpec {
    double mean = 8e-3;          // V/m, mean magnitude over the ball
    double dispersion = 0.4e-3;  // V/m, rms of the magnitude over the ball
    double correlation = 0.5e-3; // m
    double ball_radius = 400e-6; // m, normalization region
    int modes = 64;
    std::uint64_t seed = 7;
};

/// Static smooth random field added to a base model: a uniform vector of
/// isotropic random direction plus a random-Fourier-feature Gaussian
/// process (squared-exponential kernel). Both parts are rescaled on 4096
/// points in the ball so the magnitude statistics hit the spec.
class PatchFieldModel final : public field::FieldModel {
public:
    PatchFieldModel(std::shared_ptr<const field::FieldModel> base, const PatchSpec& spec);

    field::FieldSample sample(const Eigen::Vector3d& x, double t) const override;
    bool in_domain(const Eigen::Vector3d& x) const override { return base_->in_domain(x); }
    double drive_omega() const override { return base_->drive_omega(); }

    /// The patch contribution alone.
    field::FieldSample patch(const Eigen::Vector3d& x) const;

private:
    std::shared_ptr<const field::FieldModel> base_;
    Vector3d uniform_ = Vector3d::Zero();
    std::vector<Vector3d> k_;
    std::vector<double> phase_;
    std::vector<double> amp_;  // potential amplitude per mode, V
};

std::shared_ptr<const field::FieldModel> apply_patch_field(std::shared_ptr<const field::FieldModel> base,
                                                           const PatchSpec& spec);

/// Magnitude statistics of the patch part on `n` random points of the ball.
struct PatchStats {
    double mean = 0.0;
    double rms_dispersion = 0.0;
};
PatchStats patch_statistics(const PatchFieldModel& model, double ball_radius, int n, std::uint64_t seed);

/// Dressed energy of `level` on a uniform E grid (theta = 0) as a motion
/// potential.
dynamics::LevelPotential dressed_potential(const dressing::DressedAtom& atom, const dressing::DressingConfig& cfg,
                                           const atom::RydbergLevel& level, double E_min, double E_max, int n);

}  // namespace rydtrap::ensemble
