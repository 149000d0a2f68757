#pragma once

#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "rydtrap/config.hpp"

namespace rydtrap::app {

enum class Command {
    solve_field,
    calibrate,
    frequencies,
    depth,
    lifetime,
    dress_optimize,
    ramsey,
    echo,
    stern_gerlach
};

std::string to_string(Command c);
Command command_from_string(const std::string& s);

/// Stage results shared by the commands, built lazily in dependency order
/// (basis fields, eta, dressing parameters, table). The name of the stage
/// being built is kept for failure reports.
class Pipeline {
public:
    Pipeline(config::RunConfig cfg, int threads = 0);
    ~Pipeline();

    const config::RunConfig& config() const { return cfg_; }
    int threads() const { return threads_; }
    const std::string& stage() const { return stage_; }
    void set_stage(std::string s) { stage_ = std::move(s); }

    std::shared_ptr<const field::BasisFieldSet> basis();
    bool basis_cache_hit();
    bool basis_loaded() const { return basis_ != nullptr; }
    /// Drives with eta and the U1 convention resolved.
    const field::DriveWaveforms& drives();
    /// Trap field, with the patch field when enabled.
    std::shared_ptr<const field::FieldModel> field();
    const atom::StarkModel& stark() const { return *stark_; }
    const dressing::DressedAtom& dressed_atom();

    struct DressingParameters {
        double omega0 = 0.0;  // rad/s
        double delta0 = 0.0;
        std::optional<dressing::OptimizerResult> optimizer;  // present when freshly optimized
    };
    /// According to dressing.mode; throws ConfigError when mode is "off".
    /// `fresh` skips the optimizer cache so the trace is available.
    const DressingParameters& dressing_parameters(bool fresh = false);
    dressing::DressingConfig dressing_config();
    std::shared_ptr<const dressing::DressedTable> table();

    /// omega_eg used for the phase (dressed table or bare Stark) and its
    /// reference value at (E_a, 0).
    ensemble::TransitionFunction transition();
    double reference();
    /// Motion model of the coherence runs: dressed g, or bare g when undressed.
    std::shared_ptr<const dynamics::MotionModel> coherence_motion();
    /// Bare Stark motion of a level.
    std::shared_ptr<dynamics::StarkMotion> stark_motion(const atom::RydbergLevel& level);

    std::filesystem::path cache_path(const std::string& name) const;

private:
    config::RunConfig cfg_;
    int threads_;
    std::string stage_ = "setup";
    std::unique_ptr<atom::StarkModel> stark_;
    std::shared_ptr<const field::BasisFieldSet> basis_;
    bool cache_hit_ = false;
    std::optional<field::DriveWaveforms> drives_;
    std::shared_ptr<const field::FieldModel> field_;
    std::unique_ptr<dressing::DressedAtom> atom_;
    std::optional<DressingParameters> dressing_;
    std::shared_ptr<const dressing::DressedTable> table_;
    std::shared_ptr<const dynamics::MotionModel> coherence_motion_;
};

/// Runs one command: writes its CSV outputs and summary.json (last) into
/// config.output_dir and returns the summary. On failure writes
/// failure.json with the stage and cause, then rethrows.
nlohmann::json orchestrate(Command command, const config::RunConfig& cfg, int threads = 0);

/// 2 config, 3 physics or solver, 4 I/O, 1 anything else.
int exit_code(const std::exception_ptr& error);

}  // namespace rydtrap::app
