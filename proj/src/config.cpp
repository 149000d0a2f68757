#include "rydtrap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rydtrap/errors.hpp"
#include "rydtrap/hash.hpp"

namespace rydtrap::config {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so the rest
// can be rejected with their full path.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(at(key) + ": must be finite");
        }
    }
    void integer(const std::string& key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
            out = v->get<int>();
        }
    }
    void unsigned64(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            // Literals built in code arrive as signed integers.
            const bool ok = v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0);
            if (!ok) throw ConfigError(at(key) + ": expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(at(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
                out.push_back(x.get<double>());
            }
        }
    }
    void integers(const std::string& key, std::vector<int>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(at(key) + ": expected an array of integers");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number_integer()) throw ConfigError(at(key) + ": expected an array of integers");
                out.push_back(x.get<int>());
            }
        }
    }
    void vec3(const std::string& key, std::array<double, 3>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array() || v->size() != 3) throw ConfigError(at(key) + ": expected [x, y, z]");
            for (int i = 0; i < 3; ++i) {
                if (!(*v)[i].is_number()) throw ConfigError(at(key) + ": expected [x, y, z]");
                out[i] = (*v)[i].get<double>();
            }
        }
    }

    /// Nested object; absent means all defaults.
    template <class F>
    void object(const std::string& key, F&& parse) {
        if (const json* v = find(key)) {
            Section s(*v, at(key));
            parse(s);
            s.finish();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path + ": " + what);
}

void validate(const RunConfig& c) {
    const auto& d = c.drives;
    require(d.U0_V > 0.0, "drives.U0_V", "must be positive");
    require(d.U1_V >= 0.0, "drives.U1_V", "must be >= 0");
    require(d.omega1_Hz > 0.0, "drives.omega1_Hz", "must be positive");
    require(!d.eta || *d.eta > 0.0, "drives.eta", "must be positive or \"auto\"");
    require(d.u1_convention == "hexapole_equivalent" || d.u1_convention == "electrode", "drives.u1_convention",
            "expected \"hexapole_equivalent\" or \"electrode\"");

    const auto& a = c.atom;
    require(a.mass_kg > 0.0, "atom.mass_kg", "must be positive");
    require(a.T_sp_s > 0.0, "atom.T_sp_s", "must be positive");
    require(a.validity_cap_V_per_m > 0.0, "atom.validity_cap_V_per_m", "must be positive");
    require(a.i_k == -1 || a.i_k == 1, "atom.i_k", "must be -1 or 1");
    require(a.gravity_m_per_s2 >= 0.0, "atom.gravity_m_per_s2", "must be >= 0");
    require(a.surface_rate_per_s >= 0.0, "atom.surface_rate_per_s", "must be >= 0");

    const auto& s = c.dressing;
    require(s.mode == "optimize" || s.mode == "explicit" || s.mode == "off", "dressing.mode",
            "expected \"optimize\", \"explicit\" or \"off\"");
    require(s.Omega0_Hz > 0.0, "dressing.Omega0_Hz", "must be positive");
    require(s.delta0_Hz > 0.0, "dressing.delta0_Hz", "must be positive (red detuning)");
    require(s.E_a_V_per_m > 0.0, "dressing.E_a_V_per_m", "must be positive");
    require(s.y_node_m > 0.0, "dressing.y_node_m", "must be positive");
    require(s.fd_step_V_per_m > 0.0, "dressing.fd_step_V_per_m", "must be positive");
    require(s.table.E_max_V_per_m > s.table.E_min_V_per_m && s.table.E_min_V_per_m > 0.0,
            "dressing.table", "needs 0 < E_min_V_per_m < E_max_V_per_m");
    require(s.table.n_E >= 4, "dressing.table.n_E", "must be >= 4");
    require(s.table.n_theta >= 4, "dressing.table.n_theta", "must be >= 4");
    require(s.table.theta_max_rad > 0.0 && s.table.theta_max_rad < units::pi, "dressing.table.theta_max_rad",
            "must lie in (0, pi)");
    require(s.basis.n_min >= 2 && s.basis.n_max >= s.basis.n_min, "dressing.basis", "invalid manifold range");
    require(!s.basis.m_values.empty(), "dressing.basis.m_values", "must not be empty");
    require(s.basis.k_max >= 0, "dressing.basis.k_max", "must be >= 0");
    require(s.potential_E_max_V_per_m > s.potential_E_min_V_per_m && s.potential_E_min_V_per_m > 0.0,
            "dressing", "needs 0 < potential_E_min_V_per_m < potential_E_max_V_per_m");
    require(s.potential_points >= 3, "dressing.potential_points", "must be >= 3");

    const auto& e = c.ensemble;
    if (!(e.T0_uK * 1e-6 > ensemble::classical_T_min))
        throw ConfigError("ensemble.T0_uK: " + std::to_string(e.T0_uK) +
                          " uK is below the 100 nK bound of the classical centre-of-mass treatment");
    require(e.N >= 1, "ensemble.N", "must be >= 1");
    require(e.cloud_rms_m >= 0.0, "ensemble.cloud_rms_m", "must be >= 0");

    const auto& q = c.sequence;
    try {
        ensemble::sequence_kind_from_string(q.kind);
    } catch (const ConfigError& err) {
        throw ConfigError(std::string("sequence.kind: ") + err.what());
    }
    require(q.duration_s > 0.0, "sequence.duration_s", "must be positive");
    require(q.t_pi_s > 0.0, "sequence.t_pi_s", "must be positive");
    require(q.echo_window_s >= 2.0 * q.t_pi_s, "sequence.echo_window_s", "must cover 2 t_pi_s");
    require(q.dispersion >= 0.0, "sequence.dispersion", "must be >= 0");
    require(q.period_s > 0.0, "sequence.period_s", "must be positive");
    require(q.output_dt_s > 0.0, "sequence.output_dt_s", "must be positive");
    for (double t : q.phase_checkpoints_s) require(t >= 0.0, "sequence.phase_checkpoints_s", "must be >= 0");

    const auto& p = c.patch;
    require(p.mean_V_per_m >= 0.0, "patch.mean_V_per_m", "must be >= 0");
    require(p.dispersion_V_per_m >= 0.0, "patch.dispersion_V_per_m", "must be >= 0");
    require(p.correlation_m > 0.0, "patch.correlation_m", "must be positive");
    require(p.modes >= 1, "patch.modes", "must be >= 1");

    const auto& y = c.dynamics;
    require(y.rtol > 0.0 && y.rtol < 1e-2, "dynamics.rtol", "must lie in (0, 1e-2)");
    require(y.samples_per_period >= 4, "dynamics.samples_per_period", "must be >= 4");
    require(y.loss_radius_m > 0.0, "dynamics.loss_radius_m", "must be positive");
    require(y.frequency_duration_s > 0.0, "dynamics.frequency_duration_s", "must be positive");
    require(y.displacement_m > 0.0, "dynamics.displacement_m", "must be positive");

    const auto& dp = c.depth;
    require(dp.N >= 1, "depth.N", "must be >= 1");
    require(dp.probe_s > 0.0, "depth.probe_s", "must be positive");
    require(dp.radius_m > 0.0, "depth.radius_m", "must be positive");
    require(dp.T_lo_uK * 1e-6 > ensemble::classical_T_min, "depth.T_lo_uK",
            "below the 100 nK bound of the classical centre-of-mass treatment");
    require(dp.T_hi_uK > dp.T_lo_uK, "depth.T_hi_uK", "must exceed T_lo_uK");
    require(dp.bisections >= 1, "depth.bisections", "must be >= 1");

    const auto& l = c.lifetime;
    require(l.T0_uK * 1e-6 > ensemble::classical_T_min, "lifetime.T0_uK",
            "below the 100 nK bound of the classical centre-of-mass treatment");
    require(l.N >= 1, "lifetime.N", "must be >= 1");
    require(l.duration_s > 0.0, "lifetime.duration_s", "must be positive");

    const auto& sg = c.stern_gerlach;
    require(sg.duration_s > 0.0, "stern_gerlach.duration_s", "must be positive");
    require(sg.threshold_m >= 0.0, "stern_gerlach.threshold_m", "must be >= 0");
    require(sg.T0_uK * 1e-6 > ensemble::classical_T_min, "stern_gerlach.T0_uK",
            "below the 100 nK bound of the classical centre-of-mass treatment");
    require(sg.atom_index >= 0, "stern_gerlach.atom_index", "must be >= 0");

    require(!c.geometry.empty(), "geometry", "must name \"reference\" or a geometry file");
    require(!c.output_dir.empty(), "output_dir", "must not be empty");
    require(!c.cache.dir.empty(), "cache.dir", "must not be empty");
}

}  // namespace

RunConfig parse_config(const json& doc) {
    RunConfig c;
    Section root(doc, "");
    root.string("geometry", c.geometry);
    root.unsigned64("seed", c.seed);
    root.string("output_dir", c.output_dir);

    root.object("drives", [&](Section& s) {
        auto& d = c.drives;
        s.number("U0_V", d.U0_V);
        s.number("U1_V", d.U1_V);
        s.number("omega1_Hz", d.omega1_Hz);
        s.number("U2_V", d.U2_V);
        if (const json* v = s.find("eta")) {
            if (v->is_string() && v->get<std::string>() == "auto") d.eta.reset();
            else if (v->is_number()) d.eta = v->get<double>();
            else throw ConfigError(s.at("eta") + ": expected a number or \"auto\"");
        }
        s.string("u1_convention", d.u1_convention);
    });
    root.object("atom", [&](Section& s) {
        auto& a = c.atom;
        s.number("mass_kg", a.mass_kg);
        s.number("T_sp_s", a.T_sp_s);
        s.number("validity_cap_V_per_m", a.validity_cap_V_per_m);
        s.integer("i_k", a.i_k);
        s.boolean("exact_stark", a.exact_stark);
        s.number("gravity_m_per_s2", a.gravity_m_per_s2);
        s.number("surface_rate_per_s", a.surface_rate_per_s);
    });
    root.object("dressing", [&](Section& s) {
        auto& d = c.dressing;
        s.string("mode", d.mode);
        s.number("Omega0_Hz", d.Omega0_Hz);
        s.number("delta0_Hz", d.delta0_Hz);
        s.number("E_a_V_per_m", d.E_a_V_per_m);
        s.number("y_node_m", d.y_node_m);
        s.boolean("perpendicular", d.perpendicular);
        s.number("fd_step_V_per_m", d.fd_step_V_per_m);
        s.number("potential_E_min_V_per_m", d.potential_E_min_V_per_m);
        s.number("potential_E_max_V_per_m", d.potential_E_max_V_per_m);
        s.integer("potential_points", d.potential_points);
        s.object("table", [&](Section& t) {
            t.number("E_min_V_per_m", d.table.E_min_V_per_m);
            t.number("E_max_V_per_m", d.table.E_max_V_per_m);
            t.integer("n_E", d.table.n_E);
            t.number("theta_max_rad", d.table.theta_max_rad);
            t.integer("n_theta", d.table.n_theta);
        });
        s.object("basis", [&](Section& b) {
            b.integer("n_min", d.basis.n_min);
            b.integer("n_max", d.basis.n_max);
            b.integers("m_values", d.basis.m_values);
            b.integer("k_max", d.basis.k_max);
        });
    });
    root.object("ensemble", [&](Section& s) {
        auto& e = c.ensemble;
        s.number("T0_uK", e.T0_uK);
        s.integer("N", e.N);
        s.number("cloud_rms_m", e.cloud_rms_m);
        s.number("recoil_m_per_s", e.recoil_m_per_s);
        s.vec3("center_m", e.center_m);
    });
    root.object("sequence", [&](Section& s) {
        auto& q = c.sequence;
        s.string("kind", q.kind);
        s.number("duration_s", q.duration_s);
        s.number("t_pi_s", q.t_pi_s);
        s.number("echo_window_s", q.echo_window_s);
        s.number("dispersion", q.dispersion);
        s.number("period_s", q.period_s);
        s.number("output_dt_s", q.output_dt_s);
        s.numbers("phase_checkpoints_s", q.phase_checkpoints_s);
    });
    root.object("patch", [&](Section& s) {
        auto& p = c.patch;
        s.boolean("enabled", p.enabled);
        s.number("mean_V_per_m", p.mean_V_per_m);
        s.number("dispersion_V_per_m", p.dispersion_V_per_m);
        s.number("correlation_m", p.correlation_m);
        s.integer("modes", p.modes);
        s.unsigned64("seed", p.seed);
    });
    root.object("dynamics", [&](Section& s) {
        auto& y = c.dynamics;
        s.number("rtol", y.rtol);
        s.integer("samples_per_period", y.samples_per_period);
        s.number("loss_radius_m", y.loss_radius_m);
        s.number("frequency_duration_s", y.frequency_duration_s);
        s.number("displacement_m", y.displacement_m);
    });
    root.object("depth", [&](Section& s) {
        auto& d = c.depth;
        s.integer("N", d.N);
        s.number("probe_s", d.probe_s);
        s.number("radius_m", d.radius_m);
        s.number("T_lo_uK", d.T_lo_uK);
        s.number("T_hi_uK", d.T_hi_uK);
        s.integer("bisections", d.bisections);
    });
    root.object("lifetime", [&](Section& s) {
        auto& l = c.lifetime;
        s.number("T0_uK", l.T0_uK);
        s.integer("N", l.N);
        s.number("duration_s", l.duration_s);
    });
    root.object("stern_gerlach", [&](Section& s) {
        auto& g = c.stern_gerlach;
        s.number("duration_s", g.duration_s);
        s.number("threshold_m", g.threshold_m);
        s.boolean("dressed", g.dressed);
        s.number("T0_uK", g.T0_uK);
        s.integer("atom_index", g.atom_index);
    });
    root.object("cache", [&](Section& s) {
        s.boolean("enabled", c.cache.enabled);
        s.string("dir", c.cache.dir);
    });
    root.finish();
    validate(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": malformed JSON: " + e.what());
    }
    return parse_config(doc);
}

json to_json(const RunConfig& c) {
    const auto& d = c.dressing;
    json j;
    j["geometry"] = c.geometry;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["drives"] = {{"U0_V", c.drives.U0_V},
                   {"U1_V", c.drives.U1_V},
                   {"omega1_Hz", c.drives.omega1_Hz},
                   {"U2_V", c.drives.U2_V},
                   {"eta", c.drives.eta ? json(*c.drives.eta) : json("auto")},
                   {"u1_convention", c.drives.u1_convention}};
    j["atom"] = {{"mass_kg", c.atom.mass_kg},
                 {"T_sp_s", c.atom.T_sp_s},
                 {"validity_cap_V_per_m", c.atom.validity_cap_V_per_m},
                 {"i_k", c.atom.i_k},
                 {"exact_stark", c.atom.exact_stark},
                 {"gravity_m_per_s2", c.atom.gravity_m_per_s2},
                 {"surface_rate_per_s", c.atom.surface_rate_per_s}};
    j["dressing"] = {{"mode", d.mode},
                     {"Omega0_Hz", d.Omega0_Hz},
                     {"delta0_Hz", d.delta0_Hz},
                     {"E_a_V_per_m", d.E_a_V_per_m},
                     {"y_node_m", d.y_node_m},
                     {"perpendicular", d.perpendicular},
                     {"fd_step_V_per_m", d.fd_step_V_per_m},
                     {"potential_E_min_V_per_m", d.potential_E_min_V_per_m},
                     {"potential_E_max_V_per_m", d.potential_E_max_V_per_m},
                     {"potential_points", d.potential_points},
                     {"table",
                      {{"E_min_V_per_m", d.table.E_min_V_per_m},
                       {"E_max_V_per_m", d.table.E_max_V_per_m},
                       {"n_E", d.table.n_E},
                       {"theta_max_rad", d.table.theta_max_rad},
                       {"n_theta", d.table.n_theta}}},
                     {"basis",
                      {{"n_min", d.basis.n_min},
                       {"n_max", d.basis.n_max},
                       {"m_values", d.basis.m_values},
                       {"k_max", d.basis.k_max}}}};
    j["ensemble"] = {{"T0_uK", c.ensemble.T0_uK},
                     {"N", c.ensemble.N},
                     {"cloud_rms_m", c.ensemble.cloud_rms_m},
                     {"recoil_m_per_s", c.ensemble.recoil_m_per_s},
                     {"center_m", c.ensemble.center_m}};
    j["sequence"] = {{"kind", c.sequence.kind},
                     {"duration_s", c.sequence.duration_s},
                     {"t_pi_s", c.sequence.t_pi_s},
                     {"echo_window_s", c.sequence.echo_window_s},
                     {"dispersion", c.sequence.dispersion},
                     {"period_s", c.sequence.period_s},
                     {"output_dt_s", c.sequence.output_dt_s},
                     {"phase_checkpoints_s", c.sequence.phase_checkpoints_s}};
    j["patch"] = {{"enabled", c.patch.enabled},
                  {"mean_V_per_m", c.patch.mean_V_per_m},
                  {"dispersion_V_per_m", c.patch.dispersion_V_per_m},
                  {"correlation_m", c.patch.correlation_m},
                  {"modes", c.patch.modes},
                  {"seed", c.patch.seed}};
    j["dynamics"] = {{"rtol", c.dynamics.rtol},
                     {"samples_per_period", c.dynamics.samples_per_period},
                     {"loss_radius_m", c.dynamics.loss_radius_m},
                     {"frequency_duration_s", c.dynamics.frequency_duration_s},
                     {"displacement_m", c.dynamics.displacement_m}};
    j["depth"] = {{"N", c.depth.N},
                  {"probe_s", c.depth.probe_s},
                  {"radius_m", c.depth.radius_m},
                  {"T_lo_uK", c.depth.T_lo_uK},
                  {"T_hi_uK", c.depth.T_hi_uK},
                  {"bisections", c.depth.bisections}};
    j["lifetime"] = {{"T0_uK", c.lifetime.T0_uK}, {"N", c.lifetime.N}, {"duration_s", c.lifetime.duration_s}};
    j["stern_gerlach"] = {{"duration_s", c.stern_gerlach.duration_s},
                          {"threshold_m", c.stern_gerlach.threshold_m},
                          {"dressed", c.stern_gerlach.dressed},
                          {"T0_uK", c.stern_gerlach.T0_uK},
                          {"atom_index", c.stern_gerlach.atom_index}};
    j["cache"] = {{"enabled", c.cache.enabled}, {"dir", c.cache.dir}};
    return j;
}

std::uint64_t config_hash(const RunConfig& c) { return fnv1a64(to_json(c).dump()); }

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

// ---- SI views -------------------------------------------------------------------

field::DriveWaveforms RunConfig::drives_si() const {
    field::DriveWaveforms d;
    d.U0 = drives.U0_V;
    d.U1 = drives.U1_V;
    d.omega1 = units::two_pi * drives.omega1_Hz;
    d.U2 = drives.U2_V;
    d.eta = drives.eta.value_or(1.0);
    d.u1_scale = 1.0;
    return d;
}

atom::StarkParams RunConfig::stark_params() const {
    atom::StarkParams p;
    p.validity_cap = atom.validity_cap_V_per_m;
    p.t_sp = atom.T_sp_s;
    p.i_k = atom.i_k;
    p.exact = atom.exact_stark;
    p.mass = atom.mass_kg;
    return p;
}

dressing::BasisSpec RunConfig::basis_spec() const {
    dressing::BasisSpec b;
    b.n_min = dressing.basis.n_min;
    b.n_max = dressing.basis.n_max;
    b.m_values = dressing.basis.m_values;
    b.k_max = dressing.basis.k_max;
    return b;
}

dressing::DressingConfig RunConfig::dressing_si(double omega0, double delta0) const {
    dressing::DressingConfig d;
    d.omega0 = omega0;
    d.delta0 = delta0;
    d.E_a = dressing.E_a_V_per_m;
    d.y_node = dressing.y_node_m;
    d.perpendicular = dressing.perpendicular;
    return d;
}

dressing::DressedTable::Grid RunConfig::table_grid() const {
    dressing::DressedTable::Grid g;
    g.E_min = dressing.table.E_min_V_per_m;
    g.E_max = dressing.table.E_max_V_per_m;
    g.n_E = dressing.table.n_E;
    g.theta_max = dressing.table.theta_max_rad;
    g.n_theta = dressing.table.n_theta;
    return g;
}

ensemble::EnsembleSpec RunConfig::ensemble_spec() const {
    ensemble::EnsembleSpec e;
    e.T0 = ensemble.T0_uK * 1e-6;
    e.cloud_rms = ensemble.cloud_rms_m;
    e.center = Eigen::Vector3d(ensemble.center_m[0], ensemble.center_m[1], ensemble.center_m[2]);
    e.recoil = ensemble.recoil_m_per_s;
    e.N = ensemble.N;
    e.seed = seed;
    e.mass = atom.mass_kg;
    return e;
}

ensemble::PulseSequence RunConfig::pulse_sequence() const {
    switch (ensemble::sequence_kind_from_string(sequence.kind)) {
        case ensemble::SequenceKind::ramsey: return ensemble::PulseSequence::ramsey(sequence.duration_s);
        case ensemble::SequenceKind::echo:
            return ensemble::PulseSequence::echo(sequence.t_pi_s, sequence.dispersion, sequence.echo_window_s);
        case ensemble::SequenceKind::multi_echo:
            return ensemble::PulseSequence::multi_echo(sequence.period_s, sequence.duration_s, sequence.dispersion);
    }
    throw ConfigError("sequence.kind: unsupported");
}

ensemble::PatchSpec RunConfig::patch_spec() const {
    ensemble::PatchSpec p;
    p.mean = patch.mean_V_per_m;
    p.dispersion = patch.dispersion_V_per_m;
    p.correlation = patch.correlation_m;
    p.modes = patch.modes;
    p.seed = patch.seed;
    return p;
}

dynamics::IntegratorOptions RunConfig::integrator() const {
    dynamics::IntegratorOptions o;
    o.rtol = dynamics.rtol;
    o.samples_per_period = dynamics.samples_per_period;
    o.loss_radius = dynamics.loss_radius_m;
    return o;
}

}  // namespace rydtrap::config
