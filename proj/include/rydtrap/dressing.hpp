#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rydtrap/spline.hpp"
#include "rydtrap/stark.hpp"

namespace rydtrap::dressing {

using atom::RydbergLevel;

/// Truncated set of parabolic states for the dressed-atom ladder. Either
/// generated from (n range, m list, |k| cap) or given explicitly.
struct BasisSpec {
    int n_min = 47;
    int n_max = 54;
    std::vector<int> m_values{48, 49, 50, 51};  // 49, 50 plus their sigma neighbours
    int k_max = 4;
    std::vector<RydbergLevel> explicit_states;

    static BasisSpec two_level_gi(int i_k = -1);
    std::vector<RydbergLevel> enumerate() const;
    std::string describe() const;
    std::uint64_t hash() const;
};

/// State count of the default truncation.
inline constexpr int default_basis_dimension = 50;

struct DressingConfig {
    double omega0 = 0.0;        // rad/s, g-i Rabi frequency at the origin for theta = 0
    double delta0 = 0.0;        // rad/s, red detuning from omega_eg(E_a)
    double E_a = 400.0;         // V/m
    double y_node = 0.01;       // m
    /// Keep the drive component orthogonal to the local field (sigma
    /// couplings). Off only for diagnostics.
    bool perpendicular = true;

    void validate() const;
    /// omega_eg(E_a) - delta0.
    double drive_frequency(const atom::StarkModel& stark) const;
    /// Relative amplitude cos(pi y / (2 y_node)).
    double profile(double y) const;
    std::uint64_t hash() const;
};

/// Rotating-wave dressed-ladder model: state |n k m> carries n - 50
/// photons fewer than g, and the drive couples adjacent manifolds only.
class DressedAtom {
public:
    DressedAtom(const atom::StarkModel& stark, BasisSpec spec = {}, int ramp_steps = 64);

    const std::vector<RydbergLevel>& states() const { return states_; }
    const BasisSpec& spec() const { return spec_; }
    const atom::StarkModel& stark() const { return stark_; }
    int dimension() const { return static_cast<int>(states_.size()); }
    /// -1 when absent.
    int index_of(const RydbergLevel& l) const;

    /// |<i| z |g>| in atomic units; normalizes Omega0.
    double gi_coupling() const { return d_gi_; }

    /// Hamiltonian / hbar in rad/s, relative to the bare g energy.
    /// amplitude_scale multiplies Omega0 (drive profile).
    Eigen::MatrixXd hamiltonian(double E, double theta, const DressingConfig& cfg,
                                double amplitude_scale = 1.0) const;

    /// Dressed energies of e and g, tracked adiabatically from the bare
    /// states along a geometric ramp of the drive amplitude.
    struct Tracked {
        double e = 0.0;
        double g = 0.0;
        double drive_frequency = 0.0;
    };
    Tracked track(double E, double theta, const DressingConfig& cfg, double amplitude_scale = 1.0,
                  bool need_e = true) const;

    /// Dressed energy of one basis state (rotating frame, rad/s).
    double dressed_energy(const RydbergLevel& l, double E, double theta, const DressingConfig& cfg,
                          double amplitude_scale = 1.0) const;

    /// Dressed e-g transition angular frequency in the lab frame.
    double dressed_transition(double E, double theta, const DressingConfig& cfg,
                              double amplitude_scale = 1.0) const;

    /// Central differences of dressed_transition in E at E_a, step h (V/m).
    struct Derivatives {
        double d1 = 0.0;  // rad/s per V/m
        double d2 = 0.0;  // rad/s per (V/m)^2
    };
    Derivatives derivatives(const DressingConfig& cfg, double h = 0.05) const;

private:
    std::vector<double> tracked_energies(double E, double theta, const DressingConfig& cfg, double scale,
                                         const std::vector<int>& which,
                                         std::vector<Eigen::VectorXd>* vectors = nullptr) const;
    /// One diagonalization; states picked by overlap with `from`.
    std::vector<double> continued_energies(double E, double theta, const DressingConfig& cfg, double scale,
                                           const std::vector<Eigen::VectorXd>& from) const;

    atom::StarkModel stark_;
    BasisSpec spec_;
    int ramp_steps_;
    std::vector<RydbergLevel> states_;
    Eigen::MatrixXd z_;  // <a| z |b>, adjacent manifolds only
    Eigen::MatrixXd x_;
    double d_gi_ = 0.0;
    int ie_ = -1;
    int ig_ = -1;
};

struct OptimizerStep {
    int iteration = 0;
    std::string stage;
    double omega0 = 0.0;
    double delta0 = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

struct OptimizerOptions {
    int grid_points = 12;          // per axis, coarse stage
    double box_factor = 4.0;       // coarse box: guess / f .. guess * f, log-spaced
    int seeds = 4;                 // d1 = 0 curve points refined in stage 2
    int seed_iterations = 30;
    int max_iterations = 60;
    double d1_tolerance = units::two_pi * 1.0;  // rad/s per V/m
    double d2_root_tolerance = units::two_pi * 1.0;  // rad/s per (V/m)^2; "d2 nulled"
    double d1_weight = 1.0;        // merit weight of d1 (Hz/(V/m)) against d2 (Hz/(V/m)^2)
};

struct OptimizerResult {
    double omega0 = 0.0;
    double delta0 = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    std::vector<OptimizerStep> trace;
};

/// (Omega0, delta0) -> (d1, d2). Evaluation may throw PhysicsError, which
/// the optimizer treats as an infeasible point.
using FlatnessFunction = std::function<DressedAtom::Derivatives(double omega0, double delta0)>;

/// Two-stage search: log grid around the guess locating the d1 = 0 curve,
/// then damped Newton in log parameters on the weighted residual
/// (d1, d2) from the most promising curve points. Throws
/// OptimizationError if |d1| stays above the tolerance.
OptimizerResult optimize_flatness(const FlatnessFunction& f, double omega0_guess, double delta0_guess,
                                  const OptimizerOptions& opt = {});

/// optimize_flatness applied to the dressed-atom model at E_a.
OptimizerResult optimize_dressing(const DressedAtom& atom, double E_a, double omega0_guess, double delta0_guess,
                                  const OptimizerOptions& opt = {}, double fd_step = 0.05);

/// omega_eg_dressed on a regular (E, theta) grid, C2 cubic interpolation
/// (even in theta).
class DressedTable {
public:
    struct Grid {
        double E_min = 320.0;
        double E_max = 410.0;
        int n_E = 91;
        double theta_max = 0.04;
        int n_theta = 11;  // nodes uniform in theta^2
    };

    DressedTable() = default;
    DressedTable(DressingConfig cfg, Grid grid, std::string basis_description, Eigen::MatrixXd values);

    /// Throws RangeError outside the grid.
    double operator()(double E, double theta) const;
    bool contains(double E, double theta) const;

    const Grid& grid() const { return grid_; }
    const DressingConfig& config() const { return cfg_; }
    const std::string& basis_description() const { return basis_; }
    const Eigen::MatrixXd& values() const { return values_; }  // n_E x n_theta
    double E_at(int i) const;
    double theta_at(int j) const;
    /// Reference value subtracted before interpolation to keep precision.
    double offset() const { return offset_; }

private:
    DressingConfig cfg_;
    Grid grid_;
    std::string basis_;
    Eigen::MatrixXd values_;
    double offset_ = 0.0;
    field::CubicBSpline2D spline_;
};

/// Fills the grid; parallel over E rows. Tracking errors propagate with
/// their grid location.
DressedTable build_dressed_table(const DressedAtom& atom, const DressingConfig& cfg, const DressedTable::Grid& grid,
                                 int threads = 0);

/// Cache key over everything that determines the table values.
std::uint64_t table_key(const DressedAtom& atom, const DressingConfig& cfg, const DressedTable::Grid& grid);
void save_table(const DressedTable& t, std::uint64_t key, const std::string& path);
/// nullopt (with a warning) when missing, corrupt or keyed differently.
std::optional<DressedTable> load_table(const std::string& path, std::uint64_t key);

}  // namespace rydtrap::dressing
