#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rydtrap/dressing.hpp"
#include "rydtrap/dynamics.hpp"
#include "rydtrap/ensemble.hpp"
#include "rydtrap/field_model.hpp"
#include "rydtrap/stark.hpp"

namespace rydtrap::config {

// Values are kept in the units named by their keys so that a document
// round-trips exactly; the *_si() accessors convert once for the modules.
// "_Hz" keys are ordinary frequencies (the modules take 2 pi f).

struct DrivesConfig {
    double U0_V = 0.2;
    double U1_V = 0.155;
    double omega1_Hz = 430.0;
    double U2_V = -0.003;
    std::optional<double> eta;               // calibrated when absent
    std::string u1_convention = "hexapole_equivalent";  // or "electrode"
};

struct AtomConfig {
    double mass_kg = units::rb85_mass;
    double T_sp_s = 30e-3;
    double validity_cap_V_per_m = 1e4;
    int i_k = -1;
    bool exact_stark = false;
    double gravity_m_per_s2 = units::standard_gravity;
    double surface_rate_per_s = 0.0;
};

struct TableConfig {
    double E_min_V_per_m = 320.0;
    double E_max_V_per_m = 410.0;
    int n_E = 91;
    double theta_max_rad = 0.04;
    int n_theta = 11;
};

struct BasisConfig {
    int n_min = 47;
    int n_max = 54;
    std::vector<int> m_values{48, 49, 50, 51};
    int k_max = 4;
};

struct DressingSection {
    std::string mode = "optimize";  // optimize | explicit | off
    double Omega0_Hz = 200.000e6;   // explicit value or optimizer guess
    double delta0_Hz = 556.230e6;
    double E_a_V_per_m = 400.0;
    double y_node_m = 0.01;
    bool perpendicular = true;
    double fd_step_V_per_m = 0.05;
    TableConfig table;
    BasisConfig basis;
    double potential_E_min_V_per_m = 300.0;  // dressed g potential grid
    double potential_E_max_V_per_m = 500.0;
    int potential_points = 101;
};

struct EnsembleConfig {
    double T0_uK = 0.3;
    int N = 500;
    double cloud_rms_m = 0.3e-6;
    double recoil_m_per_s = ensemble::rb85_recoil_velocity;
    std::array<double, 3> center_m{0.0, 0.0, 0.0};
};

struct SequenceConfig {
    std::string kind = "ramsey";   // ramsey | echo | multi-echo
    double duration_s = 0.5;       // ramsey / multi-echo window
    double t_pi_s = 0.5;
    double echo_window_s = 1.1;    // readout window of echo runs
    double dispersion = 0.1;       // pi-pulse angle dispersion
    double period_s = 0.1;         // multi-echo
    double output_dt_s = 0.5e-3;
    std::vector<double> phase_checkpoints_s{0.01, 0.024, 0.04, 0.1, 0.5};
};

struct PatchConfig {
    bool enabled = false;
    double mean_V_per_m = 8e-3;
    double dispersion_V_per_m = 0.4e-3;
    double correlation_m = 0.5e-3;
    int modes = 64;
    std::uint64_t seed = 7;
};

struct DynamicsConfig {
    double rtol = 1e-9;
    int samples_per_period = 20;
    double loss_radius_m = 500e-6;
    double frequency_duration_s = 0.5;
    double displacement_m = 10e-6;
};

struct DepthConfig {
    int N = 200;
    double probe_s = 0.2;
    double radius_m = 400e-6;
    double T_lo_uK = 1.0;
    double T_hi_uK = 2000.0;
    int bisections = 8;
};

struct LifetimeConfig {
    double T0_uK = 90.0;
    int N = 100;
    double duration_s = 0.1;
};

struct SternGerlachConfig {
    double duration_s = 0.05;
    double threshold_m = 0.8e-6;
    bool dressed = false;
    double T0_uK = 0.3;
    int atom_index = 0;
};

struct CacheConfig {
    bool enabled = true;
    std::string dir = ".rydtrap-cache";
};

struct RunConfig {
    std::string geometry = "reference";  // "reference" or a geometry JSON path
    DrivesConfig drives;
    AtomConfig atom;
    DressingSection dressing;
    EnsembleConfig ensemble;
    SequenceConfig sequence;
    PatchConfig patch;
    DynamicsConfig dynamics;
    DepthConfig depth;
    LifetimeConfig lifetime;
    SternGerlachConfig stern_gerlach;
    CacheConfig cache;
    std::uint64_t seed = 1;
    std::string output_dir = "rydtrap-out";

    // SI views for the modules.
    field::DriveWaveforms drives_si() const;  // eta and u1_scale left at 1
    atom::StarkParams stark_params() const;
    dressing::BasisSpec basis_spec() const;
    dressing::DressingConfig dressing_si(double omega0, double delta0) const;
    dressing::DressedTable::Grid table_grid() const;
    ensemble::EnsembleSpec ensemble_spec() const;
    ensemble::PulseSequence pulse_sequence() const;
    ensemble::PatchSpec patch_spec() const;
    dynamics::IntegratorOptions integrator() const;
};

/// Path-qualified ConfigError on unknown keys, wrong types and values out
/// of physical range. Missing keys take the reference defaults.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

/// Digest of the canonical JSON dump.
std::uint64_t config_hash(const RunConfig& config);
std::string hex64(std::uint64_t v);

}  // namespace rydtrap::config
