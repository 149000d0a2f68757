#include "rydtrap/dressing.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "rydtrap/binio.hpp"
#include "rydtrap/errors.hpp"
#include "rydtrap/hash.hpp"
#include "rydtrap/hydrogen.hpp"
#include "rydtrap/log.hpp"

namespace rydtrap::dressing {

namespace hy = atom::hydrogen;

namespace {

constexpr int reference_n = 50;  // g manifold, zero photons removed
constexpr char kTableMagic[8] = {'R', 'Y', 'D', 'T', 'A', 'B', 'L', 'E'};
constexpr std::uint32_t kTableVersion = 2;

template <class T>
std::uint64_t mix(std::uint64_t h, const T& v) {
    return fnv1a64(&v, sizeof(T), h);
}

}  // namespace

BasisSpec BasisSpec::two_level_gi(int i_k) {
    BasisSpec s;
    s.explicit_states = {RydbergLevel::g(), RydbergLevel::i(i_k)};
    return s;
}

std::vector<RydbergLevel> BasisSpec::enumerate() const {
    if (!explicit_states.empty()) {
        for (const auto& l : explicit_states) l.validate();
        return explicit_states;
    }
    if (n_min < 2 || n_max < n_min) throw ConfigError("dressing basis: invalid manifold range");
    if (k_max < 0) throw ConfigError("dressing basis: k_max must be >= 0");
    std::vector<RydbergLevel> out;
    for (int n = n_min; n <= n_max; ++n)
        for (int m : m_values) {
            const int am = std::abs(m);
            if (am > n - 1) continue;
            const int kk = n - 1 - am;
            for (int k = -kk; k <= kk; k += 2)
                if (std::abs(k) <= k_max) out.push_back({n, m, k, "basis"});
        }
    for (auto& l : out) {
        if (l.same_state(RydbergLevel::e())) l.label = "e";
        if (l.same_state(RydbergLevel::g())) l.label = "g";
    }
    return out;
}

std::string BasisSpec::describe() const {
    std::ostringstream os;
    if (!explicit_states.empty()) {
        os << "explicit:";
        for (const auto& l : explicit_states) os << " (" << l.n << "," << l.m << "," << l.k << ")";
        return os.str();
    }
    os << "n=" << n_min << ".." << n_max << " m={";
    for (std::size_t i = 0; i < m_values.size(); ++i) os << (i ? "," : "") << m_values[i];
    os << "} |k|<=" << k_max << " dim=" << enumerate().size();
    return os.str();
}

std::uint64_t BasisSpec::hash() const { return fnv1a64(describe()); }

void DressingConfig::validate() const {
    if (!(omega0 >= 0.0)) throw ConfigError("dressing Omega0 must be >= 0");
    if (!(delta0 > 0.0)) throw ConfigError("dressing delta0 must be > 0 (red detuning)");
    if (!(E_a > 0.0)) throw ConfigError("dressing E_a must be > 0");
    if (!(y_node > 0.0)) throw ConfigError("dressing y_node must be > 0");
}

double DressingConfig::drive_frequency(const atom::StarkModel& stark) const { return stark.omega_eg(E_a) - delta0; }

double DressingConfig::profile(double y) const { return std::cos(units::pi * y / (2.0 * y_node)); }

std::uint64_t DressingConfig::hash() const {
    std::uint64_t h = fnv1a64("DressingConfig");
    h = mix(h, omega0);
    h = mix(h, delta0);
    h = mix(h, E_a);
    h = mix(h, y_node);
    return mix(h, static_cast<int>(perpendicular));
}

DressedAtom::DressedAtom(const atom::StarkModel& stark, BasisSpec spec, int ramp_steps)
    : stark_(stark), spec_(std::move(spec)), ramp_steps_(ramp_steps) {
    if (ramp_steps_ < 2) throw ConfigError("dressing level-tracking ramp needs at least 2 steps");
    states_ = spec_.enumerate();
    const int N = dimension();
    const int ii = index_of(stark_.level_i());
    ig_ = index_of(RydbergLevel::g());
    ie_ = index_of(RydbergLevel::e());
    if (ig_ < 0 || ii < 0) throw BasisError("dressing basis must contain g and i (" + spec_.describe() + ")");

    z_ = Eigen::MatrixXd::Zero(N, N);
    x_ = Eigen::MatrixXd::Zero(N, N);
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
            const auto& A = states_[a];
            const auto& B = states_[b];
            if (A.n - B.n != 1) continue;
            const auto& pa = hy::parabolic_state(A.n, A.k, A.m);
            const auto& pb = hy::parabolic_state(B.n, B.k, B.m);
            double z = 0.0, x = 0.0;
            if (A.m == B.m) z = hy::parabolic_dipole(pa, pb, 0);
            // x = (r_{-1} - r_{+1}) / sqrt 2
            if (A.m == B.m - 1) x = hy::parabolic_dipole(pa, pb, -1) / std::sqrt(2.0);
            if (A.m == B.m + 1) x = -hy::parabolic_dipole(pa, pb, 1) / std::sqrt(2.0);
            z_(a, b) = z_(b, a) = z;
            x_(a, b) = x_(b, a) = x;
        }
    const auto& pg = hy::parabolic_state(50, 0, 49);
    const auto& pi = hy::parabolic_state(stark_.level_i().n, stark_.level_i().k, stark_.level_i().m);
    d_gi_ = std::abs(hy::parabolic_dipole(pi, pg, 0));
    if (!(d_gi_ > 0.0)) throw BasisError("g-i coupling vanishes; Omega0 cannot be normalized");
}

int DressedAtom::index_of(const RydbergLevel& l) const {
    for (int a = 0; a < dimension(); ++a)
        if (states_[a].same_state(l)) return a;
    return -1;
}

Eigen::MatrixXd DressedAtom::hamiltonian(double E, double theta, const DressingConfig& cfg,
                                         double amplitude_scale) const {
    cfg.validate();
    const int N = dimension();
    const double w0 = cfg.drive_frequency(stark_);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    const RydbergLevel g = RydbergLevel::g();
    for (int a = 0; a < N; ++a) {
        const auto& s = states_[a];
        H(a, a) = stark_.bare_frequency(s, g) + stark_.stark_shift(s, E) - (s.n - reference_n) * w0;
    }
    const double amp = cfg.omega0 * amplitude_scale / d_gi_;
    if (amp != 0.0) H += 0.5 * amp * (std::cos(theta) * z_ + (cfg.perpendicular ? std::sin(theta) : 0.0) * x_);
    return H;
}

std::vector<double> DressedAtom::tracked_energies(double E, double theta, const DressingConfig& cfg, double scale,
                                                  const std::vector<int>& which,
                                                  std::vector<Eigen::VectorXd>* vectors) const {
    const int N = dimension();
    std::vector<double> out(which.size());
    if (cfg.omega0 * scale == 0.0) {
        const Eigen::MatrixXd H = hamiltonian(E, theta, cfg, 0.0);
        for (std::size_t w = 0; w < which.size(); ++w) out[w] = H(which[w], which[w]);
        if (vectors) {
            vectors->clear();
            for (int idx : which) vectors->push_back(Eigen::VectorXd::Unit(N, idx));
        }
        return out;
    }
    // Geometric ramp from 1e-4 of the final amplitude; each step keeps the
    // eigenvector with the largest overlap with the previous one.
    const Eigen::MatrixXd H0 = hamiltonian(E, theta, cfg, 0.0);
    const double amp = cfg.omega0 * scale / d_gi_;
    const Eigen::MatrixXd V = 0.5 * amp * (std::cos(theta) * z_ + (cfg.perpendicular ? std::sin(theta) : 0.0) * x_);
    std::vector<Eigen::VectorXd> prev(which.size());
    for (std::size_t w = 0; w < which.size(); ++w) prev[w] = Eigen::VectorXd::Unit(N, which[w]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    for (int step = 0; step < ramp_steps_; ++step) {
        const double f = std::pow(1e-4, static_cast<double>(ramp_steps_ - 1 - step) / (ramp_steps_ - 1));
        es.compute(H0 + f * V);
        if (es.info() != Eigen::Success) throw TrackingError("dressed Hamiltonian diagonalization failed", E, theta);
        for (std::size_t w = 0; w < which.size(); ++w) {
            const Eigen::VectorXd ov = (es.eigenvectors().transpose() * prev[w]).cwiseAbs();
            Eigen::Index best = 0;
            const double o = ov.maxCoeff(&best);
            if (o * o < 0.5) {
                std::ostringstream os;
                os << "level tracking of " << states_[which[w]].label << " ambiguous (overlap " << o * o
                   << ") at E = " << E << " V/m, theta = " << theta << " rad, drive fraction " << f;
                throw TrackingError(os.str(), E, theta);
            }
            prev[w] = es.eigenvectors().col(best);
            out[w] = es.eigenvalues()(best);
        }
    }
    if (vectors) *vectors = std::move(prev);
    return out;
}

std::vector<double> DressedAtom::continued_energies(double E, double theta, const DressingConfig& cfg, double scale,
                                                    const std::vector<Eigen::VectorXd>& from) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hamiltonian(E, theta, cfg, scale));
    if (es.info() != Eigen::Success) throw TrackingError("dressed Hamiltonian diagonalization failed", E, theta);
    std::vector<double> out(from.size());
    for (std::size_t w = 0; w < from.size(); ++w) {
        Eigen::Index best = 0;
        const double o = (es.eigenvectors().transpose() * from[w]).cwiseAbs().maxCoeff(&best);
        if (o * o < 0.5) {
            std::ostringstream os;
            os << "level continuation ambiguous (overlap " << o * o << ") at E = " << E << " V/m, theta = " << theta
               << " rad";
            throw TrackingError(os.str(), E, theta);
        }
        out[w] = es.eigenvalues()(best);
    }
    return out;
}

DressedAtom::Tracked DressedAtom::track(double E, double theta, const DressingConfig& cfg, double amplitude_scale,
                                        bool need_e) const {
    Tracked t;
    t.drive_frequency = cfg.drive_frequency(stark_);
    if (need_e && ie_ < 0) throw BasisError("dressing basis must contain e (" + spec_.describe() + ")");
    std::vector<int> which{ig_};
    if (need_e) which.push_back(ie_);
    const auto en = tracked_energies(E, theta, cfg, amplitude_scale, which);
    t.g = en[0];
    if (need_e) t.e = en[1];
    return t;
}

double DressedAtom::dressed_energy(const RydbergLevel& l, double E, double theta, const DressingConfig& cfg,
                                   double amplitude_scale) const {
    const int idx = index_of(l);
    if (idx < 0) throw BasisError("level not in dressing basis");
    return tracked_energies(E, theta, cfg, amplitude_scale, {idx})[0];
}

double DressedAtom::dressed_transition(double E, double theta, const DressingConfig& cfg,
                                       double amplitude_scale) const {
    const Tracked t = track(E, theta, cfg, amplitude_scale, true);
    // e sits one photon lower in the ladder than g.
    return t.e + t.drive_frequency - t.g;
}

DressedAtom::Derivatives DressedAtom::derivatives(const DressingConfig& cfg, double h) const {
    // Ramp-tracked at E_a; the neighbours continue from those eigenvectors.
    if (ie_ < 0) throw BasisError("dressing basis must contain e (" + spec_.describe() + ")");
    std::vector<Eigen::VectorXd> vec;
    const auto e0 = tracked_energies(cfg.E_a, 0.0, cfg, 1.0, {ie_, ig_}, &vec);
    const auto em = continued_energies(cfg.E_a - h, 0.0, cfg, 1.0, vec);
    const auto ep = continued_energies(cfg.E_a + h, 0.0, cfg, 1.0, vec);
    // The drive frequency is common to all three and cancels.
    const double f0 = e0[0] - e0[1], fm = em[0] - em[1], fp = ep[0] - ep[1];
    return {(fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)};
}

OptimizerResult optimize_flatness(const FlatnessFunction& f, double omega0_guess, double delta0_guess,
                                  const OptimizerOptions& opt) {
    if (!(omega0_guess > 0.0) || !(delta0_guess > 0.0))
        throw ConfigError("dressing optimizer needs positive initial Omega0 and delta0");
    if (opt.grid_points < 1 || !(opt.box_factor >= 1.0)) throw ConfigError("invalid optimizer grid settings");
    const double s = units::two_pi;  // residuals measured in Hz
    OptimizerResult res;
    int iter = 0;

    struct Eval {
        bool ok = false;
        double d1 = 0, d2 = 0;
        Eigen::Vector2d r = Eigen::Vector2d::Zero();
        double cost = std::numeric_limits<double>::infinity();
    };
    auto evaluate = [&](const Eigen::Vector2d& p, const char* stage, bool record) {
        Eval e;
        const double om = std::exp(p(0)), dl = std::exp(p(1));
        try {
            const auto d = f(om, dl);
            e.ok = std::isfinite(d.d1) && std::isfinite(d.d2);
            e.d1 = d.d1;
            e.d2 = d.d2;
        } catch (const PhysicsError& ex) {
            log::debug(std::string("dressing optimizer: infeasible point (") + ex.what() + ")");
        }
        if (e.ok) {
            e.r = {opt.d1_weight * e.d1 / s, e.d2 / s};
            e.cost = e.r.squaredNorm();
        }
        if (record) res.trace.push_back({iter++, stage, om, dl, e.d1, e.d2});
        return e;
    };

    // Levenberg-Marquardt in log parameters, forward-difference Jacobian.
    auto refine = [&](Eigen::Vector2d p, Eval cur, int max_it) {
        double lambda = 1e-3;
        const double fd = 1e-4;
        for (int it = 0; it < max_it && cur.cost > 0.0; ++it) {
            Eigen::Matrix2d J;
            for (int c = 0; c < 2; ++c) {
                Eigen::Vector2d q = p;
                q(c) += fd;
                const Eval e = evaluate(q, "jacobian", false);
                if (!e.ok) return std::pair{p, cur};
                J.col(c) = (e.r - cur.r) / fd;
            }
            // Newton step (invariant to residual weighting) with
            // backtracking; damped Gauss-Newton when J is near singular.
            Eigen::Vector2d step;
            const Eigen::FullPivLU<Eigen::Matrix2d> lu(J);
            if (lu.rank() == 2 && std::abs(J.determinant()) > 1e-12 * J.squaredNorm()) {
                step = -lu.solve(cur.r);
            } else {
                Eigen::Matrix2d A = J.transpose() * J;
                A.diagonal() += lambda * A.diagonal().cwiseMax(1e-30);
                step = -A.fullPivLu().solve(J.transpose() * cur.r);
                lambda *= 4.0;
            }
            if (!step.allFinite()) break;
            // Trust region of a factor e^0.5 per step in either parameter.
            const double big = step.cwiseAbs().maxCoeff();
            if (big > 0.5) step *= 0.5 / big;
            bool improved = false;
            for (int tries = 0; tries < 12 && !improved; ++tries, step *= 0.5) {
                const Eigen::Vector2d q = p + step;
                const Eval e = evaluate(q, "refine", true);
                if (e.cost < cur.cost) {
                    const double moved = (q - p).norm();
                    p = q;
                    cur = e;
                    improved = true;
                    if (moved < 1e-13) it = max_it;
                }
            }
            if (!improved) break;
        }
        return std::pair{p, cur};
    };

    // Stage 1: log grid around the guess. Sign changes of d1 along each
    // delta row give points on the d1 = 0 curve; the curve points with the
    // smallest |d2| (and the cheapest grid point) become seeds.
    const Eigen::Vector2d guess(std::log(omega0_guess), std::log(delta0_guess));
    struct Seed {
        Eigen::Vector2d p;
        double score;
    };
    std::vector<Seed> seeds;
    Eval g0 = evaluate(guess, "guess", true);
    if (g0.ok) seeds.push_back({guess, g0.cost});
    const double span = std::log(opt.box_factor);
    const int G = opt.grid_points;
    if (G > 1 && span > 0.0) {
        auto axis = [&](int i, int c) { return guess(c) - span + 2 * span * i / (G - 1); };
        std::vector<std::vector<Eval>> grid(G, std::vector<Eval>(G));  // [delta][omega]
        Eigen::Vector2d cheapest = guess;
        double cheapest_cost = std::numeric_limits<double>::infinity();
        for (int b = 0; b < G; ++b)
            for (int a = 0; a < G; ++a) {
                const Eigen::Vector2d q(axis(a, 0), axis(b, 1));
                grid[b][a] = evaluate(q, "grid", true);
                if (grid[b][a].cost < cheapest_cost) {
                    cheapest_cost = grid[b][a].cost;
                    cheapest = q;
                }
            }
        std::vector<Seed> curve;
        for (int b = 0; b < G; ++b)
            for (int a = 0; a + 1 < G; ++a) {
                const Eval &l = grid[b][a], &h = grid[b][a + 1];
                if (!l.ok || !h.ok || (l.d1 > 0) == (h.d1 > 0)) continue;
                const double t = l.d1 / (l.d1 - h.d1);
                const double d2 = l.d2 + t * (h.d2 - l.d2);
                curve.push_back({{axis(a, 0) + t * (axis(a + 1, 0) - axis(a, 0)), axis(b, 1)}, (d2 / s) * (d2 / s)});
            }
        std::sort(curve.begin(), curve.end(), [](const Seed& x, const Seed& y) { return x.score < y.score; });
        for (std::size_t c = 0; c < curve.size() && c < static_cast<std::size_t>(opt.seeds); ++c) seeds.push_back(curve[c]);
        if (std::isfinite(cheapest_cost)) seeds.push_back({cheapest, cheapest_cost});
    }
    if (seeds.empty()) throw OptimizationError("dressing optimizer: no feasible point in the search box",
                                               std::numeric_limits<double>::infinity());

    // Stage 2: refinement from the seeds in order (guess, curve points by
    // |d2|, cheapest grid point). The first run that nulls both
    // derivatives wins; otherwise the run with d1 cancelled and the
    // smallest |d2|.
    Eigen::Vector2d p = seeds.front().p;
    Eval cur;
    bool have = false;
    for (const auto& sd : seeds) {
        const Eval e0 = evaluate(sd.p, "seed", true);
        if (!e0.ok) continue;
        auto [q, e] = refine(sd.p, e0, opt.seed_iterations);
        {
            std::ostringstream os;
            os << "dressing optimizer seed (" << std::exp(sd.p(0)) / s / 1e6 << ", " << std::exp(sd.p(1)) / s / 1e6
               << ") MHz -> (" << std::exp(q(0)) / s / 1e6 << ", " << std::exp(q(1)) / s / 1e6 << ") MHz, d1 "
               << e.d1 / s << " Hz/(V/m), d2 " << e.d2 / s << " Hz/(V/m)^2";
            log::debug(os.str());
        }
        const bool d1_ok = std::abs(e.d1) < opt.d1_tolerance;
        const bool better = !have || (d1_ok && (!(std::abs(cur.d1) < opt.d1_tolerance) || std::abs(e.d2) < std::abs(cur.d2))) ||
                            (!d1_ok && !(std::abs(cur.d1) < opt.d1_tolerance) && e.cost < cur.cost);
        if (better) {
            p = q;
            cur = e;
            have = true;
        }
        if (d1_ok && std::abs(e.d2) < opt.d2_root_tolerance) break;
    }
    std::tie(p, cur) = refine(p, cur, opt.max_iterations);
    res.omega0 = std::exp(p(0));
    res.delta0 = std::exp(p(1));
    res.d1 = cur.d1;
    res.d2 = cur.d2;
    if (!(std::abs(cur.d1) < opt.d1_tolerance)) {
        std::ostringstream os;
        os << "dressing optimizer could not cancel the first derivative: best |d1| = " << std::abs(cur.d1) / s
           << " Hz/(V/m) at Omega0 = 2pi x " << res.omega0 / s / 1e6 << " MHz, delta0 = 2pi x "
           << res.delta0 / s / 1e6 << " MHz";
        throw OptimizationError(os.str(), std::abs(cur.d1));
    }
    return res;
}

OptimizerResult optimize_dressing(const DressedAtom& atom, double E_a, double omega0_guess, double delta0_guess,
                                  const OptimizerOptions& opt, double fd_step) {
    if (!(fd_step > 0.0)) throw ConfigError("finite-difference step must be positive");
    auto f = [&](double om, double dl) {
        DressingConfig cfg;
        cfg.omega0 = om;
        cfg.delta0 = dl;
        cfg.E_a = E_a;
        return atom.derivatives(cfg, fd_step);
    };
    return optimize_flatness(f, omega0_guess, delta0_guess, opt);
}

// ---- table ---------------------------------------------------------------

namespace {

double axis_step(double lo, double hi, int n) { return n > 1 ? (hi - lo) / (n - 1) : 1.0; }

}  // namespace

DressedTable::DressedTable(DressingConfig cfg, Grid grid, std::string basis_description, Eigen::MatrixXd values)
    : cfg_(cfg), grid_(grid), basis_(std::move(basis_description)), values_(std::move(values)) {
    if (grid_.n_E < 1 || grid_.n_theta < 1 || values_.rows() != grid_.n_E || values_.cols() != grid_.n_theta)
        throw ConfigError("dressed table: value array does not match the grid");
    offset_ = values_(grid_.n_E / 2, 0);
    // Single-point axes are widened to two identical nodes (constant).
    const int rows = std::max(grid_.n_E, 2), cols = std::max(grid_.n_theta, 2);
    Eigen::ArrayXXd a(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            a(i, j) = values_(std::min(i, grid_.n_E - 1), std::min(j, grid_.n_theta - 1)) - offset_;
    // The theta axis is uniform in theta^2: the transition is even and
    // nearly linear in theta^2, which natural end conditions reproduce.
    spline_ = field::CubicBSpline2D(a, axis_step(0.0, grid_.theta_max * grid_.theta_max, grid_.n_theta), grid_.E_min,
                                    axis_step(grid_.E_min, grid_.E_max, grid_.n_E), false);
}

double DressedTable::E_at(int i) const {
    return grid_.n_E > 1 ? grid_.E_min + i * (grid_.E_max - grid_.E_min) / (grid_.n_E - 1) : grid_.E_min;
}

double DressedTable::theta_at(int j) const {
    return grid_.n_theta > 1 ? grid_.theta_max * std::sqrt(static_cast<double>(j) / (grid_.n_theta - 1)) : 0.0;
}

bool DressedTable::contains(double E, double theta) const {
    const double tol = 1e-12;
    const double th = std::abs(theta);
    const bool e_ok = grid_.n_E > 1 ? (E >= grid_.E_min - tol && E <= grid_.E_max + tol)
                                    : std::abs(E - grid_.E_min) <= tol * std::max(1.0, std::abs(E));
    const bool t_ok = grid_.n_theta > 1 ? th <= grid_.theta_max + tol : th <= tol;
    return e_ok && t_ok && values_.size() > 0;
}

double DressedTable::operator()(double E, double theta) const {
    if (!contains(E, theta)) {
        std::ostringstream os;
        os << "dressed table queried outside its grid: E = " << E << " V/m, theta = " << theta << " rad";
        throw RangeError(os.str());
    }
    return offset_ + spline_(theta * theta, E).v;
}

DressedTable build_dressed_table(const DressedAtom& atom, const DressingConfig& cfg, const DressedTable::Grid& grid,
                                 int threads) {
    cfg.validate();
    if (grid.n_E < 1 || grid.n_theta < 1) throw ConfigError("dressed table grid needs at least one point per axis");
    if (grid.n_E > 1 && !(grid.E_max > grid.E_min)) throw ConfigError("dressed table needs E_max > E_min");
    if (grid.n_theta > 1 && !(grid.theta_max > 0.0)) throw ConfigError("dressed table needs theta_max > 0");
    Eigen::MatrixXd values(grid.n_E, grid.n_theta);
    DressedTable probe(cfg, grid, "", Eigen::MatrixXd::Zero(grid.n_E, grid.n_theta));

    int nthreads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nthreads = std::min(nthreads, grid.n_E);
    std::mutex err_mutex;
    std::exception_ptr err;
    auto work = [&](int t) {
        for (int i = t; i < grid.n_E; i += nthreads) {
            for (int j = 0; j < grid.n_theta; ++j) {
                {
                    std::lock_guard lock(err_mutex);
                    if (err) return;
                }
                try {
                    values(i, j) = atom.dressed_transition(probe.E_at(i), probe.theta_at(j), cfg);
                } catch (const TrackingError& e) {
                    std::ostringstream os;
                    os << e.what() << " [table node E index " << i << ", theta index " << j << "]";
                    std::lock_guard lock(err_mutex);
                    if (!err) err = std::make_exception_ptr(TrackingError(os.str(), e.field(), e.theta()));
                    return;
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        }
    };
    if (nthreads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    if (err) std::rethrow_exception(err);
    return DressedTable(cfg, grid, atom.spec().describe(), values);
}

std::uint64_t table_key(const DressedAtom& atom, const DressingConfig& cfg, const DressedTable::Grid& grid) {
    std::uint64_t h = mix(cfg.hash(), atom.spec().hash());
    const auto& sp = atom.stark().params();
    h = mix(h, sp.i_k);
    h = mix(h, static_cast<int>(sp.exact));
    h = mix(h, sp.exact_extra_manifolds);
    h = mix(h, sp.validity_cap);
    h = mix(h, grid.E_min);
    h = mix(h, grid.E_max);
    h = mix(h, grid.n_E);
    h = mix(h, grid.theta_max);
    return mix(h, grid.n_theta);
}

void save_table(const DressedTable& t, std::uint64_t key, const std::string& path) {
    using binio::put;
    std::string buf(kTableMagic, sizeof(kTableMagic));
    put(buf, kTableVersion);
    put(buf, key);
    const auto& g = t.grid();
    put(buf, g.E_min);
    put(buf, g.E_max);
    put(buf, static_cast<std::int32_t>(g.n_E));
    put(buf, g.theta_max);
    put(buf, static_cast<std::int32_t>(g.n_theta));
    const auto& c = t.config();
    put(buf, c.omega0);
    put(buf, c.delta0);
    put(buf, c.E_a);
    put(buf, c.y_node);
    put(buf, static_cast<std::uint8_t>(c.perpendicular));
    binio::put_string(buf, t.basis_description());
    buf.append(reinterpret_cast<const char*>(t.values().data()), sizeof(double) * t.values().size());
    if (!binio::write_checked(path, std::move(buf))) throw IoError("cannot write dressed table cache " + path);
}

std::optional<DressedTable> load_table(const std::string& path, std::uint64_t key) {
    std::string why;
    auto body = binio::read_checked(path, why);
    auto reject = [&](const std::string& reason) -> std::optional<DressedTable> {
        log::warn("dressed table cache " + path + " ignored (" + reason + "); rebuilding");
        return std::nullopt;
    };
    if (!body) {
        if (why == "missing") return std::nullopt;
        return reject(why);
    }
    const std::string& b = *body;
    if (b.size() < sizeof(kTableMagic) || std::memcmp(b.data(), kTableMagic, sizeof(kTableMagic)) != 0)
        return reject("not a dressed table");
    std::size_t pos = sizeof(kTableMagic);
    std::uint32_t version = 0;
    std::uint64_t stored_key = 0;
    if (!binio::take(b, pos, version) || version != kTableVersion) return reject("schema version");
    if (!binio::take(b, pos, stored_key) || stored_key != key) return reject("configuration changed");
    DressedTable::Grid g;
    DressingConfig c;
    std::int32_t nE = 0, nT = 0;
    std::string basis;
    std::uint8_t perp = 1;
    if (!binio::take(b, pos, g.E_min) || !binio::take(b, pos, g.E_max) || !binio::take(b, pos, nE) ||
        !binio::take(b, pos, g.theta_max) || !binio::take(b, pos, nT) || !binio::take(b, pos, c.omega0) ||
        !binio::take(b, pos, c.delta0) || !binio::take(b, pos, c.E_a) || !binio::take(b, pos, c.y_node) ||
        !binio::take(b, pos, perp) || !binio::take_string(b, pos, basis))
        return reject("truncated header");
    if (nE < 1 || nT < 1) return reject("bad dimensions");
    g.n_E = nE;
    g.n_theta = nT;
    c.perpendicular = perp != 0;
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(nE) * static_cast<std::size_t>(nT);
    if (pos + bytes != b.size()) return reject("size mismatch");
    Eigen::MatrixXd values(nE, nT);
    std::memcpy(values.data(), b.data() + pos, bytes);
    try {
        return DressedTable(c, g, basis, values);
    } catch (const Error& e) {
        return reject(e.what());
    }
}

}  // namespace rydtrap::dressing
