#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rydtrap/app.hpp"
#include "rydtrap/errors.hpp"
#include "rydtrap/log.hpp"

using namespace rydtrap;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    int threads = 0;
    bool no_cache = false;
    bool verbose = false;
    bool quiet = false;
    std::optional<int> N;
    std::optional<double> T0_uK;
    std::optional<double> t_pi_s;
    std::optional<double> dispersion;
};

// Overrides go through the JSON form so they get the same validation as
// values read from a file.
config::RunConfig resolve(const Overrides& o) {
    config::RunConfig base = o.config_path.empty() ? config::parse_config(nlohmann::json::object())
                                                   : config::load_config(o.config_path);
    nlohmann::json doc = config::to_json(base);
    if (o.seed) doc["seed"] = *o.seed;
    if (o.out) doc["output_dir"] = *o.out;
    if (o.no_cache) doc["cache"]["enabled"] = false;
    if (o.N) doc["ensemble"]["N"] = *o.N;
    if (o.T0_uK) doc["ensemble"]["T0_uK"] = *o.T0_uK;
    if (o.t_pi_s) doc["sequence"]["t_pi_s"] = *o.t_pi_s;
    if (o.dispersion) doc["sequence"]["dispersion"] = *o.dispersion;
    // A longer t_pi needs a readout window that still covers 2 t_pi.
    if (o.t_pi_s && doc["sequence"]["echo_window_s"].get<double>() < 2.0 * *o.t_pi_s)
        doc["sequence"]["echo_window_s"] = 2.2 * *o.t_pi_s;
    return config::parse_config(doc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Trajectory and coherence simulations of Rydberg atoms in an electrostatic-dynamic trap"};
    cli.require_subcommand(1);
    Overrides o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON run configuration (defaults: reference setup)");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--threads", o.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--no-cache", o.no_cache, "ignore cached basis fields, dressing and tables");
        sub->add_flag("-v,--verbose", o.verbose, "debug logging");
        sub->add_flag("-q,--quiet", o.quiet, "warnings and errors only");
    };

    struct Entry {
        app::Command command;
        const char* help;
    };
    const Entry entries[] = {
        {app::Command::solve_field, "solve (or load) the basis fields of the geometry"},
        {app::Command::calibrate, "find the outer-ring ratio eta nulling the oscillating field at O"},
        {app::Command::frequencies, "trap frequencies and micromotion of the e level"},
        {app::Command::depth, "trap depth by bisection on the ensemble temperature"},
        {app::Command::lifetime, "mean field angle and residual spontaneous-emission lifetime"},
        {app::Command::dress_optimize, "optimize the dressing (Omega0, delta0) for a flat transition"},
        {app::Command::ramsey, "Ramsey contrast of the ensemble"},
        {app::Command::echo, "spin-echo contrast of the ensemble"},
        {app::Command::stern_gerlach, "separation of e and g twin trajectories"},
    };
    std::optional<app::Command> chosen;
    for (const auto& e : entries) {
        auto* sub = cli.add_subcommand(app::to_string(e.command), e.help);
        common(sub);
        if (e.command == app::Command::ramsey || e.command == app::Command::echo) {
            sub->add_option("-N,--atoms", o.N, "number of trajectories");
            sub->add_option("--T0-uK", o.T0_uK, "ensemble temperature in microkelvin");
        }
        if (e.command == app::Command::echo) {
            sub->add_option("--t-pi", o.t_pi_s, "pi-pulse time in seconds");
            sub->add_option("--dispersion", o.dispersion, "fractional rms of the pi-pulse angle");
        }
        sub->callback([&chosen, c = e.command] { chosen = c; });
    }

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (o.verbose) log::set_level(log::Level::debug);
    if (o.quiet) log::set_level(log::Level::warn);

    try {
        auto cfg = resolve(o);
        auto summary = app::orchestrate(*chosen, cfg, o.threads);
        std::cout << summary["results"].dump(2) << '\n';
        return 0;
    } catch (const std::exception& e) {
        auto err = std::current_exception();
        log::error(e.what());
        return app::exit_code(err);
    }
}
