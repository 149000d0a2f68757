#include "rydtrap/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "rydtrap/errors.hpp"
#include "rydtrap/geometry.hpp"
#include "rydtrap/hash.hpp"
#include "rydtrap/log.hpp"

namespace rydtrap::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double two_pi = units::two_pi;

struct CommandName {
    Command c;
    const char* name;
};
constexpr CommandName kCommands[] = {
    {Command::solve_field, "solve-field"},   {Command::calibrate, "calibrate"},
    {Command::frequencies, "frequencies"},   {Command::depth, "depth"},
    {Command::lifetime, "lifetime"},         {Command::dress_optimize, "dress-optimize"},
    {Command::ramsey, "ramsey"},             {Command::echo, "echo"},
    {Command::stern_gerlach, "stern-gerlach"},
};

std::uint64_t mix(std::uint64_t h, double v) { return fnv1a64(&v, sizeof v, h); }

// Written at full precision so reruns compare byte for byte.
class Csv {
public:
    Csv(const fs::path& path, const std::string& header) : path_(path), out_(path) {
        if (!out_) throw IoError("cannot write " + path.string());
        out_ << std::setprecision(17) << header << '\n';
    }
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((out_ << (first ? "" : ",") << v, first = false), ...);
        out_ << '\n';
    }
    std::ostream& stream() { return out_; }
    ~Csv() noexcept(false) {
        out_.flush();
        if (!out_ && std::uncaught_exceptions() == 0) throw IoError("write failed: " + path_.string());
    }

private:
    fs::path path_;
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

const char* error_kind(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return "config";
    } catch (const PhysicsError&) {
        return "physics";
    } catch (const IoError&) {
        return "io";
    } catch (...) {
        return "internal";
    }
}

}  // namespace

std::string to_string(Command c) {
    for (const auto& e : kCommands)
        if (e.c == c) return e.name;
    return "?";
}

Command command_from_string(const std::string& s) {
    for (const auto& e : kCommands)
        if (s == e.name) return e.c;
    throw ConfigError("unknown command '" + s + "'");
}

int exit_code(const std::exception_ptr& e) {
    std::string kind = error_kind(e);
    if (kind == "config") return 2;
    if (kind == "physics") return 3;
    if (kind == "io") return 4;
    return 1;
}

// ---- pipeline --------------------------------------------------------------------

Pipeline::Pipeline(config::RunConfig cfg, int threads)
    : cfg_(std::move(cfg)), threads_(threads), stark_(std::make_unique<atom::StarkModel>(cfg_.stark_params())) {}

Pipeline::~Pipeline() = default;

fs::path Pipeline::cache_path(const std::string& name) const { return fs::path(cfg_.cache.dir) / name; }

std::shared_ptr<const field::BasisFieldSet> Pipeline::basis() {
    if (basis_) return basis_;
    stage_ = "geometry";
    field::ElectrodeGeometry g;
    if (cfg_.geometry == "reference") {
        g = field::reference_geometry();
    } else {
        std::ifstream in(cfg_.geometry);
        if (!in) throw IoError("cannot open geometry file " + cfg_.geometry);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(cfg_.geometry + ": malformed JSON: " + e.what());
        }
        g = field::geometry_from_json(doc);
    }
    g.validate();
    stage_ = "solve-field";
    std::error_code ec;
    fs::create_directories(cfg_.cache.dir, ec);
    auto path = cache_path("basis-" + config::hex64(field::geometry_checksum(g)) + ".bin");
    basis_ = std::make_shared<const field::BasisFieldSet>(
        field::load_or_solve_basis(g, path, cfg_.cache.enabled, &cache_hit_));
    return basis_;
}

bool Pipeline::basis_cache_hit() {
    basis();
    return cache_hit_;
}

const field::DriveWaveforms& Pipeline::drives() {
    if (drives_) return *drives_;
    auto b = basis();
    stage_ = "calibrate";
    field::DriveWaveforms d = cfg_.drives_si();
    d.eta = cfg_.drives.eta ? *cfg_.drives.eta : field::calibrate_eta(*b);
    d.u1_scale = cfg_.drives.u1_convention == "hexapole_equivalent" ? field::hexapole_u1_scale(*b, d.eta) : 1.0;
    drives_ = d;
    return *drives_;
}

std::shared_ptr<const field::FieldModel> Pipeline::field() {
    if (field_) return field_;
    const auto& d = drives();
    stage_ = "field-model";
    std::shared_ptr<const field::FieldModel> f = field::make_trap_field(basis(), d);
    if (cfg_.patch.enabled) f = ensemble::apply_patch_field(f, cfg_.patch_spec());
    field_ = f;
    return field_;
}

const dressing::DressedAtom& Pipeline::dressed_atom() {
    if (!atom_) {
        stage_ = "dressing-basis";
        atom_ = std::make_unique<dressing::DressedAtom>(*stark_, cfg_.basis_spec());
    }
    return *atom_;
}

const Pipeline::DressingParameters& Pipeline::dressing_parameters(bool fresh) {
    if (dressing_) return *dressing_;
    const auto& ds = cfg_.dressing;
    if (ds.mode == "off") throw ConfigError("dressing.mode: \"off\" has no dressing parameters");
    DressingParameters p;
    p.omega0 = two_pi * ds.Omega0_Hz;
    p.delta0 = two_pi * ds.delta0_Hz;
    if (ds.mode == "optimize") {
        const auto& atom = dressed_atom();
        stage_ = "dress-optimize";
        std::uint64_t key = mix(mix(atom.spec().hash(), ds.E_a_V_per_m), ds.fd_step_V_per_m);
        key = mix(mix(key, p.omega0), p.delta0);
        key = mix(mix(mix(key, cfg_.atom.i_k), cfg_.atom.exact_stark ? 1.0 : 0.0), cfg_.atom.validity_cap_V_per_m);
        auto path = cache_path("dressing-" + config::hex64(key) + ".json");
        bool loaded = false;
        if (cfg_.cache.enabled && !fresh && fs::exists(path)) {
            try {
                std::ifstream in(path);
                json j = json::parse(in);
                if (j.at("key").get<std::string>() != config::hex64(key)) throw std::runtime_error("key mismatch");
                p.omega0 = j.at("omega0_rad_per_s").get<double>();
                p.delta0 = j.at("delta0_rad_per_s").get<double>();
                loaded = true;
                log::info("dressing cache hit: " + path.string() + ", optimization skipped");
            } catch (const std::exception& e) {
                log::warn("dressing cache " + path.string() + " ignored (" + e.what() + "); re-optimizing");
            }
        }
        if (!loaded) {
            auto r = dressing::optimize_dressing(atom, ds.E_a_V_per_m, p.omega0, p.delta0, {}, ds.fd_step_V_per_m);
            p.omega0 = r.omega0;
            p.delta0 = r.delta0;
            p.optimizer = std::move(r);
            std::error_code ec;
            fs::create_directories(cfg_.cache.dir, ec);
            try {
                write_json(path, {{"key", config::hex64(key)},
                                  {"omega0_rad_per_s", p.omega0},
                                  {"delta0_rad_per_s", p.delta0}});
            } catch (const std::exception& e) {
                log::warn(std::string("could not write dressing cache: ") + e.what());
            }
        }
    }
    dressing_ = std::move(p);
    return *dressing_;
}

dressing::DressingConfig Pipeline::dressing_config() {
    const auto& p = dressing_parameters();
    auto c = cfg_.dressing_si(p.omega0, p.delta0);
    c.validate();
    return c;
}

std::shared_ptr<const dressing::DressedTable> Pipeline::table() {
    if (table_) return table_;
    auto dcfg = dressing_config();
    const auto& atom = dressed_atom();
    stage_ = "dressed-table";
    auto grid = cfg_.table_grid();
    std::uint64_t key = dressing::table_key(atom, dcfg, grid);
    auto path = cache_path("table-" + config::hex64(key) + ".bin").string();
    if (cfg_.cache.enabled) {
        if (auto t = dressing::load_table(path, key)) {
            log::info("dressed table cache hit: " + path);
            table_ = std::make_shared<const dressing::DressedTable>(std::move(*t));
            return table_;
        }
    }
    log::info("building dressed table (" + std::to_string(grid.n_E) + " x " + std::to_string(grid.n_theta) + ")");
    auto t = std::make_shared<const dressing::DressedTable>(dressing::build_dressed_table(atom, dcfg, grid, threads_));
    std::error_code ec;
    fs::create_directories(cfg_.cache.dir, ec);
    try {
        dressing::save_table(*t, key, path);
    } catch (const std::exception& e) {
        log::warn(std::string("could not write table cache: ") + e.what());
    }
    table_ = t;
    return table_;
}

ensemble::TransitionFunction Pipeline::transition() {
    if (cfg_.dressing.mode == "off") {
        const atom::StarkModel* s = stark_.get();
        return [s](double E, double) { return s->omega_eg(E); };
    }
    return ensemble::table_transition(table());
}

double Pipeline::reference() {
    double Ea = cfg_.dressing.E_a_V_per_m;
    if (cfg_.dressing.mode == "off") return stark_->omega_eg(Ea);
    return (*table())(Ea, 0.0);
}

std::shared_ptr<dynamics::StarkMotion> Pipeline::stark_motion(const atom::RydbergLevel& level) {
    return std::make_shared<dynamics::StarkMotion>(field(), dynamics::stark_potential(*stark_, level),
                                                   cfg_.atom.mass_kg, cfg_.atom.gravity_m_per_s2);
}

std::shared_ptr<const dynamics::MotionModel> Pipeline::coherence_motion() {
    if (coherence_motion_) return coherence_motion_;
    if (cfg_.dressing.mode == "off") {
        coherence_motion_ = stark_motion(atom::RydbergLevel::g());
        return coherence_motion_;
    }
    auto dcfg = dressing_config();
    const auto& ds = cfg_.dressing;
    stage_ = "dressed-potential";
    auto pot = ensemble::dressed_potential(dressed_atom(), dcfg, atom::RydbergLevel::g(), ds.potential_E_min_V_per_m,
                                           ds.potential_E_max_V_per_m, ds.potential_points);
    coherence_motion_ =
        std::make_shared<dynamics::StarkMotion>(field(), std::move(pot), cfg_.atom.mass_kg, cfg_.atom.gravity_m_per_s2);
    return coherence_motion_;
}

// ---- commands ----------------------------------------------------------------------

namespace {

json basis_summary(const field::BasisFieldSet& b) {
    json groups = json::array();
    for (const auto& f : b.fields)
        groups.push_back({{"group", f.group}, {"role", std::string(field::to_string(f.role))}, {"residual", f.residual}});
    return {{"geometry", b.geometry.name},
            {"geometry_checksum", config::hex64(b.geometry_checksum)},
            {"mesh", {{"nr", b.grid.nr}, {"nz", b.grid.nz}, {"h_r_m", b.grid.h_r}, {"h_z_m", b.grid.h_z}}},
            {"groups", groups}};
}

json run_solve_field(Pipeline& p, const fs::path&) { return basis_summary(*p.basis()); }

json run_calibrate(Pipeline& p, const fs::path&) {
    const auto& d = p.drives();
    auto f = p.field();
    p.set_stage("calibrate");
    const Eigen::Vector3d O = Eigen::Vector3d::Zero();
    double T = two_pi / d.omega1;
    auto E0 = f->field(O, 0.0);
    auto E1 = f->field(O, 0.5 * T);
    return {{"eta", d.eta},
            {"u1_scale", d.u1_scale},
            {"E_O_V_per_m", 0.5 * (E0 + E1).norm()},
            {"E_O_oscillating_V_per_m", 0.5 * (E0 - E1).norm()},
            {"E_O_vector_V_per_m", vec_json(0.5 * (E0 + E1))}};
}

json run_frequencies(Pipeline& p, const fs::path&) {
    const auto& c = p.config();
    auto model = p.stark_motion(atom::RydbergLevel::e());
    p.set_stage("frequencies");
    dynamics::FrequencyOptions fo;
    fo.displacement = c.dynamics.displacement_m;
    fo.duration = c.dynamics.frequency_duration_s;
    fo.integrator = c.integrator();
    auto r = dynamics::trap_frequencies(*model, fo);
    return {{"level", "e"},
            {"f_long_Hz", r.f_long},
            {"f_trans_Hz", r.f_trans},
            {"micromotion_Hz", r.micromotion},
            {"mean_position_m", vec_json(r.mean_position)}};
}

json run_depth(Pipeline& p, const fs::path& out) {
    const auto& c = p.config();
    auto model = p.stark_motion(atom::RydbergLevel::e());
    p.set_stage("depth");
    dynamics::DepthOptions o;
    o.probe_duration = c.depth.probe_s;
    o.radius = c.depth.radius_m;
    o.T_lo = c.depth.T_lo_uK * 1e-6;
    o.T_hi = c.depth.T_hi_uK * 1e-6;
    o.bisections = c.depth.bisections;
    o.threads = p.threads();
    o.integrator = c.integrator();
    auto spec = c.ensemble_spec();
    spec.N = c.depth.N;
    auto r = dynamics::trap_depth(*model, [&](double T0) {
        auto s = spec;
        s.T0 = T0;
        return ensemble::sample_ensemble(s);
    }, o);
    {
        Csv csv(out / "depth.csv", "T0_K,kept,total,retention");
        for (const auto& h : r.history) csv.row(h.T0, h.kept, h.total, h.fraction());
    }
    return {{"level", "e"},
            {"N", spec.N},
            {"T_depth_K", r.T_depth},
            {"ci_lo_K", r.ci_lo},
            {"ci_hi_K", r.ci_hi},
            {"saturated", r.saturated},
            {"below_range", r.below_range}};
}

json run_lifetime(Pipeline& p, const fs::path&) {
    const auto& c = p.config();
    auto model = p.stark_motion(atom::RydbergLevel::e());
    p.set_stage("lifetime");
    auto spec = c.ensemble_spec();
    spec.N = c.lifetime.N;
    spec.T0 = c.lifetime.T0_uK * 1e-6;
    auto opt = c.integrator();
    auto trs = dynamics::integrate_batch(ensemble::sample_ensemble(spec), *model, c.lifetime.duration_s, opt,
                                         p.threads());
    auto st = dynamics::mean_theta(trs);
    int kept = 0;
    for (const auto& t : trs) kept += t.status == dynamics::Status::completed;
    double Gs = c.atom.surface_rate_per_s;
    double life = st.lifetime(p.stark(), Gs);
    return {{"T0_K", spec.T0},
            {"N", spec.N},
            {"survival", static_cast<double>(kept) / spec.N},
            {"mean_theta_rad", st.mean_theta},
            {"mean_sin2_theta", st.mean_sin2},
            {"lifetime_s", std::isfinite(life) ? json(life) : json(nullptr)},
            {"lifetime_at_10mrad_s", 1.0 / p.stark().residual_se_rate(0.01, Gs)}};
}

json run_dress_optimize(Pipeline& p, const fs::path& out) {
    const auto& c = p.config();
    if (c.dressing.mode == "off") throw ConfigError("dressing.mode: dress-optimize needs \"optimize\" or \"explicit\"");
    auto params = p.dressing_parameters(true);
    auto dcfg = p.dressing_config();
    const auto& atom = p.dressed_atom();
    p.set_stage("dress-optimize");
    if (params.optimizer) {
        Csv csv(out / "optimizer_trace.csv", "iteration,stage,Omega0_Hz,delta0_Hz,d1_Hz_per_V_per_m,d2_Hz_per_V2_per_m2");
        for (const auto& s : params.optimizer->trace)
            csv.row(s.iteration, s.stage, s.omega0 / two_pi, s.delta0 / two_pi, s.d1 / two_pi, s.d2 / two_pi);
    }
    auto der = atom.derivatives(dcfg, c.dressing.fd_step_V_per_m);
    double Ea = c.dressing.E_a_V_per_m;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    {
        Csv csv(out / "flatness.csv", "E_V_per_m,omega_eg_minus_ref_Hz");
        double ref = atom.dressed_transition(Ea, 0.0, dcfg);
        for (int k = -20; k <= 20; ++k) {
            double E = Ea + k * 0.05;
            double w = (atom.dressed_transition(E, 0.0, dcfg) - ref) / two_pi;
            lo = std::min(lo, w);
            hi = std::max(hi, w);
            csv.row(E, w);
        }
    }
    return {{"mode", c.dressing.mode},
            {"Omega0_Hz", params.omega0 / two_pi},
            {"delta0_Hz", params.delta0 / two_pi},
            {"d1_Hz_per_V_per_m", der.d1 / two_pi},
            {"d2_Hz_per_V2_per_m2", der.d2 / two_pi},
            {"variation_1V_per_m_Hz", hi - lo},
            {"drive_frequency_Hz", dcfg.drive_frequency(p.stark()) / two_pi},
            {"basis", atom.spec().describe()},
            {"basis_dimension", atom.dimension()}};
}

json run_coherence(Pipeline& p, const fs::path& out, bool echo) {
    const auto& c = p.config();
    ensemble::PulseSequence seq;
    if (!echo) {
        seq = ensemble::PulseSequence::ramsey(c.sequence.duration_s);
    } else if (c.sequence.kind == "multi-echo") {
        seq = ensemble::PulseSequence::multi_echo(c.sequence.period_s, c.sequence.duration_s, c.sequence.dispersion);
    } else {
        seq = ensemble::PulseSequence::echo(c.sequence.t_pi_s, c.sequence.dispersion, c.sequence.echo_window_s);
    }
    auto omega = p.transition();
    double ref = p.reference();
    auto motion = p.coherence_motion();
    p.set_stage(echo ? "echo" : "ramsey");

    ensemble::RunOptions ro;
    ro.output_dt = c.sequence.output_dt_s;
    ro.phase_checkpoints = c.sequence.phase_checkpoints_s;
    ro.integrator = c.integrator();
    ro.threads = p.threads();
    auto spec = c.ensemble_spec();
    auto r = ensemble::run_sequence(spec, seq, omega, ref, *motion, ro);

    {
        Csv csv(out / "contrast.csv", "t_s,C,survival,stderr_C");
        for (const auto& q : r.contrast) csv.row(q.t, q.C, q.survival, q.stderr_C);
    }
    {
        std::string header = "trajectory,status,drift_rate_rad_per_s";
        for (double t : ro.phase_checkpoints) {
            std::ostringstream os;
            os << ",phi_rad_at_" << t << "_s";
            header += os.str();
        }
        Csv csv(out / "phases.csv", header);
        for (std::size_t j = 0; j < r.status.size(); ++j) {
            auto& s = csv.stream();
            s << j << ',' << dynamics::to_string(r.status[j]) << ',' << r.drift_rate[j];
            for (double v : r.checkpoint_phases[j]) s << ',' << v;
            s << '\n';
        }
    }

    double revival_from = 0.0;
    if (echo && seq.kind == ensemble::SequenceKind::echo) revival_from = 1.5 * c.sequence.t_pi_s;
    auto t2 = ensemble::extract_t2(r.contrast, revival_from);
    double drift = 0.0;
    std::size_t nd = 0;
    for (std::size_t j = 0; j < r.drift_rate.size(); ++j)
        if (std::isfinite(r.drift_rate[j])) drift += std::abs(r.drift_rate[j]), ++nd;

    json res = {{"sequence", ensemble::to_string(seq.kind)},
                {"N", spec.N},
                {"T0_K", spec.T0},
                {"seed", spec.seed},
                {"T2_crossing_s", number_or_null(t2.crossing)},
                {"saturated", t2.saturated},
                {"C_end", r.contrast.empty() ? 0.0 : r.contrast.back().C},
                {"survival", r.survival},
                {"mean_abs_drift_rate_rad_per_s", nd ? drift / nd : 0.0},
                {"cadence_error_rad", r.cadence_error},
                {"mean_sin2_theta", r.mean_sin2_theta},
                {"reference_Hz", ref / two_pi},
                {"dressing_mode", c.dressing.mode}};
    if (revival_from > 0.0) {
        res["revival_peak_time_s"] = t2.peak_time;
        res["revival_peak_C"] = t2.peak_contrast;
        res["equivalent_T2_s"] = number_or_null(t2.equivalent);
    }
    if (c.dressing.mode != "off") {
        const auto& dp = p.dressing_parameters();
        res["Omega0_Hz"] = dp.omega0 / two_pi;
        res["delta0_Hz"] = dp.delta0 / two_pi;
    } else {
        // Bare transition: report the ensemble frequency spread as well.
        p.set_stage("frequency-spread");
        double window = std::min(0.05, seq.duration);
        auto trs = dynamics::integrate_batch(ensemble::sample_ensemble(spec), *motion, window, ro.integrator,
                                             p.threads());
        auto fsp = ensemble::frequency_spread(trs, omega);
        res["broadening_Hz"] = fsp.broadening / two_pi;
        res["frequency_stddev_Hz"] = fsp.stddev / two_pi;
    }
    return res;
}

json write_trajectory(const fs::path& path, const dynamics::Trajectory& t) {
    Csv csv(path, "t_s,x_m,y_m,z_m,vx_m_per_s,vy_m_per_s,vz_m_per_s,E_V_per_m,theta_rad");
    for (const auto& s : t.samples) csv.row(s.t, s.r.x(), s.r.y(), s.r.z(), s.v.x(), s.v.y(), s.v.z(), s.E, s.theta);
    return {{"status", dynamics::to_string(t.status)}, {"end_time_s", t.end_time}, {"max_radius_m", t.max_radius}};
}

json run_stern_gerlach(Pipeline& p, const fs::path& out) {
    const auto& c = p.config();
    const auto& sg = c.stern_gerlach;
    std::shared_ptr<const dynamics::MotionModel> me, mg;
    if (sg.dressed) {
        if (c.dressing.mode == "off") throw ConfigError("stern_gerlach.dressed needs dressing.mode other than \"off\"");
        auto dcfg = p.dressing_config();
        const auto& ds = c.dressing;
        p.set_stage("dressed-potential");
        auto pe = ensemble::dressed_potential(p.dressed_atom(), dcfg, atom::RydbergLevel::e(),
                                              ds.potential_E_min_V_per_m, ds.potential_E_max_V_per_m,
                                              ds.potential_points);
        me = std::make_shared<dynamics::StarkMotion>(p.field(), std::move(pe), c.atom.mass_kg,
                                                     c.atom.gravity_m_per_s2);
        mg = p.coherence_motion();
    } else {
        me = p.stark_motion(atom::RydbergLevel::e());
        mg = p.stark_motion(atom::RydbergLevel::g());
    }
    p.set_stage("stern-gerlach");
    auto spec = c.ensemble_spec();
    spec.T0 = sg.T0_uK * 1e-6;
    spec.N = sg.atom_index + 1;
    auto atoms = ensemble::sample_ensemble(spec);
    const auto& init = atoms[sg.atom_index];
    auto opt = c.integrator();
    opt.sample_dt = 1e-4;
    auto r = dynamics::stern_gerlach(init, *me, *mg, sg.duration_s, sg.threshold_m, opt);
    double max_sep = 0.0;
    {
        Csv csv(out / "separation.csv", "t_s,separation_m");
        for (std::size_t k = 0; k < r.t.size(); ++k) {
            csv.row(r.t[k], r.separation[k]);
            max_sep = std::max(max_sep, r.separation[k]);
        }
    }
    auto te = dynamics::integrate_trajectory(init, *me, sg.duration_s, opt);
    auto tg = dynamics::integrate_trajectory(init, *mg, sg.duration_s, opt);
    return {{"dressed", sg.dressed},
            {"atom_index", sg.atom_index},
            {"T0_K", spec.T0},
            {"threshold_m", sg.threshold_m},
            {"crossing_time_s", number_or_null(r.crossing_time)},
            {"max_separation_m", max_sep},
            {"partial", r.partial},
            {"trajectory_e", write_trajectory(out / "trajectory_e.csv", te)},
            {"trajectory_g", write_trajectory(out / "trajectory_g.csv", tg)}};
}

}  // namespace

json orchestrate(Command command, const config::RunConfig& cfg, int threads) {
    fs::path out(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
    // summary.json marks completion, so a stale one must not survive a new run.
    fs::remove(out / "summary.json", ec);
    fs::remove(out / "failure.json", ec);

    Pipeline p(cfg, threads);
    auto started = std::chrono::steady_clock::now();
    json results;
    try {
        switch (command) {
            case Command::solve_field: results = run_solve_field(p, out); break;
            case Command::calibrate: results = run_calibrate(p, out); break;
            case Command::frequencies: results = run_frequencies(p, out); break;
            case Command::depth: results = run_depth(p, out); break;
            case Command::lifetime: results = run_lifetime(p, out); break;
            case Command::dress_optimize: results = run_dress_optimize(p, out); break;
            case Command::ramsey: results = run_coherence(p, out, false); break;
            case Command::echo: results = run_coherence(p, out, true); break;
            case Command::stern_gerlach: results = run_stern_gerlach(p, out); break;
        }
    } catch (const std::exception& e) {
        auto err = std::current_exception();
        try {
            write_json(out / "failure.json", {{"command", to_string(command)},
                                              {"stage", p.stage()},
                                              {"error", error_kind(err)},
                                              {"message", e.what()},
                                              {"config_hash", config::hex64(config::config_hash(cfg))}});
        } catch (const std::exception& w) {
            log::error(std::string("could not write failure.json: ") + w.what());
        }
        throw;
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    {
        // Wall-clock data lives outside the summary so that stays reproducible.
        std::ofstream log_out(out / "run.log", std::ios::app);
        log_out << to_string(command) << " finished in " << elapsed << " s, basis cache "
                << (p.basis_loaded() ? (p.basis_cache_hit() ? "hit" : "miss") : "unused") << '\n';
    }
    json summary = {{"command", to_string(command)},
                    {"config_hash", config::hex64(config::config_hash(cfg))},
                    {"seed", cfg.seed},
                    {"results", results},
                    {"config", config::to_json(cfg)}};
    write_json(out / "summary.json", summary);
    return summary;
}

}  // namespace rydtrap::app
