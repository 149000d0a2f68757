#include "rydtrap/basis_field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "rydtrap/binio.hpp"
#include "rydtrap/errors.hpp"
#include "rydtrap/hash.hpp"
#include "rydtrap/log.hpp"

namespace rydtrap::field {

namespace {

constexpr char kMagic[8] = {'R', 'Y', 'D', 'B', 'A', 'S', 'I', 'S'};
constexpr std::uint32_t kCacheVersion = 1;
constexpr double kResidualLimit = 1e-8;

MeshGrid make_grid(const ElectrodeGeometry& g, const MeshSpec& mesh) {
    const long nr_cells = std::lround(g.domain.r_max / mesh.h_r);
    const long nz_cells = std::lround((g.domain.z_max - g.domain.z_min) / mesh.h_z);
    if (nr_cells < 4 || nz_cells < 4) throw GeometryError("mesh too coarse for the domain");
    if (static_cast<double>(nr_cells + 1) * static_cast<double>(nz_cells + 1) > 2e7)
        throw GeometryError("mesh too fine: more than 2e7 nodes");
    MeshGrid grid;
    grid.nr = static_cast<int>(nr_cells) + 1;
    grid.nz = static_cast<int>(nz_cells) + 1;
    grid.h_r = g.domain.r_max / nr_cells;
    grid.h_z = (g.domain.z_max - g.domain.z_min) / nz_cells;
    grid.z_min = g.domain.z_min;
    return grid;
}

// Conductor index per node, -1 for free space. Box nodes outside any
// conductor are reported as -2 (grounded).
Eigen::ArrayXXi rasterize(const ElectrodeGeometry& g, const MeshGrid& grid) {
    Eigen::ArrayXXi mask(grid.nz, grid.nr);
    for (int i = 0; i < grid.nz; ++i)
        for (int j = 0; j < grid.nr; ++j) {
            int owner = -1;
            for (std::size_t e = 0; e < g.electrodes.size(); ++e)
                if (g.electrodes[e].contains(grid.r(j), grid.z(i))) {
                    owner = static_cast<int>(e);
                    break;
                }
            const bool box = i == 0 || i == grid.nz - 1 || j == grid.nr - 1;
            mask(i, j) = owner >= 0 ? owner : (box ? -2 : -1);
        }
    return mask;
}

// Finite-volume couplings of node (i, j) to its neighbours, from the
// integral form of div grad phi = 0 over the annular cell around the node.
struct Stencil5 {
    double east, west, north, south;
};

Stencil5 couplings(const MeshGrid& grid, int j) {
    const double hr = grid.h_r, hz = grid.h_z;
    const double r_face_e = (j + 0.5) * hr;
    const double r_face_w = j == 0 ? 0.0 : (j - 0.5) * hr;
    const double area = j == 0 ? hr * hr / 8.0 : j * hr * hr;  // integral of r dr over the cell
    return {r_face_e * hz / hr, r_face_w * hz / hr, area / hz, area / hz};
}

// Fraction of the way from free node (r0, z0) to conductor node (r1, z1)
// at which the conductor surface is crossed.
double surface_fraction(const Electrode& e, double r0, double z0, double r1, double z1) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (e.contains(r0 + mid * (r1 - r0), z0 + mid * (z1 - z0)) ? hi : lo) = mid;
    }
    return std::max(hi, 0.02);
}

// Linear system over the free nodes. Links to Dirichlet nodes use the
// symmetric cut-cell form (coupling / fraction) so curved conductor
// surfaces between nodes are seen at their true position; the matrix stays
// symmetric positive definite.
struct LaplaceSystem {
    Eigen::ArrayXXi index;  // unknown number per node, -1 for Dirichlet nodes
    int n_unknown = 0;
    Eigen::SparseMatrix<double> A;
    struct BoundaryLink {
        int row;
        int i, j;
        double coeff;
    };
    std::vector<BoundaryLink> boundary;

    Eigen::VectorXd rhs(const Eigen::ArrayXXd& dirichlet) const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n_unknown);
        for (const auto& l : boundary) b(l.row) += l.coeff * dirichlet(l.i, l.j);
        return b;
    }
};

LaplaceSystem assemble(const ElectrodeGeometry& g, const MeshGrid& grid, const Eigen::ArrayXXi& mask) {
    LaplaceSystem sys;
    sys.index = Eigen::ArrayXXi::Constant(grid.nz, grid.nr, -1);
    for (int i = 0; i < grid.nz; ++i)
        for (int j = 0; j < grid.nr; ++j)
            if (mask(i, j) == -1) sys.index(i, j) = sys.n_unknown++;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(sys.n_unknown) * 5);
    for (int i = 0; i < grid.nz; ++i)
        for (int j = 0; j < grid.nr; ++j) {
            const int row = sys.index(i, j);
            if (row < 0) continue;
            const Stencil5 s = couplings(grid, j);
            double diag = 0.0;
            auto link = [&](int ii, int jj, double a) {
                if (a == 0.0) return;
                const int col = sys.index(ii, jj);
                if (col >= 0) {
                    diag += a;
                    triplets.emplace_back(row, col, -a);
                    return;
                }
                if (mask(ii, jj) >= 0) {
                    a /= surface_fraction(g.electrodes[mask(ii, jj)], grid.r(j), grid.z(i), grid.r(jj), grid.z(ii));
                }
                diag += a;
                sys.boundary.push_back({row, ii, jj, a});
            };
            link(i, j + 1, s.east);
            if (j > 0) link(i, j - 1, s.west);
            link(i + 1, j, s.north);
            link(i - 1, j, s.south);
            triplets.emplace_back(row, row, diag);
        }
    sys.A.resize(sys.n_unknown, sys.n_unknown);
    sys.A.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

// Max over free nodes of |A x - b| / A_ii, relative to max |phi|.
double residual_impl(const LaplaceSystem& sys, const Eigen::ArrayXXd& phi) {
    Eigen::VectorXd x(sys.n_unknown);
    for (int i = 0; i < phi.rows(); ++i)
        for (int j = 0; j < phi.cols(); ++j)
            if (sys.index(i, j) >= 0) x(sys.index(i, j)) = phi(i, j);
    const Eigen::VectorXd r = sys.A * x - sys.rhs(phi);
    const double scale = std::max(phi.abs().maxCoeff(), 1e-300);
    double worst = 0.0;
    for (int k = 0; k < sys.n_unknown; ++k) worst = std::max(worst, std::abs(r(k)) / sys.A.coeff(k, k));
    return worst / scale;
}

using binio::put;
using binio::take;

}  // namespace

const BasisField* BasisFieldSet::find(GroupRole role) const {
    for (const auto& f : fields)
        if (f.role == role) return &f;
    return nullptr;
}

const BasisField* BasisFieldSet::find(const std::string& group) const {
    for (const auto& f : fields)
        if (f.group == group) return &f;
    return nullptr;
}

const BasisField& BasisFieldSet::by_role(GroupRole role) const {
    if (const auto* f = find(role)) return *f;
    throw ConfigError("geometry '" + geometry.name + "' has no electrode group with role " +
                      std::string(to_string(role)));
}

bool BasisFieldSet::in_domain(double r, double z) const {
    if (!(r >= 0.0) || r > grid.r_max() - grid.h_r) return false;
    if (z < grid.z_min + grid.h_z || z > grid.z_max() - grid.h_z) return false;
    return geometry.conductor_at(r, z) == nullptr;
}

void BasisFieldSet::rebuild_splines() {
    for (auto& f : fields) f.spline = CubicBSpline2D(f.potential, grid.h_r, grid.z_min, grid.h_z);
}

double laplace_residual(const ElectrodeGeometry& geometry, const MeshGrid& grid, const Eigen::ArrayXXd& potential) {
    return residual_impl(assemble(geometry, grid, rasterize(geometry, grid)), potential);
}

BasisFieldSet solve_basis_fields(const ElectrodeGeometry& geometry_in, const MeshSpec& mesh) {
    ElectrodeGeometry geometry = geometry_in;
    geometry.mesh = mesh;
    geometry.validate();
    if (geometry.groups.empty()) throw GeometryError("geometry '" + geometry.name + "' defines no electrode groups");
    const double inner_radius = geometry.inner_electrode_diameter / 2;
    if (inner_radius / mesh.h_r < 20.0 - 1e-9)
        throw GeometryError("mesh resolves the inner electrode radius with fewer than 20 cells (h_r = " +
                            std::to_string(mesh.h_r) + " m)");

    BasisFieldSet set;
    set.grid = make_grid(geometry, mesh);
    const MeshGrid& grid = set.grid;
    const Eigen::ArrayXXi mask = rasterize(geometry, grid);

    const LaplaceSystem sys = assemble(geometry, grid, mask);
    if (sys.n_unknown == 0) throw GeometryError("no free nodes between the electrodes");
    std::vector<Eigen::ArrayXXd> dirichlet(geometry.groups.size(), Eigen::ArrayXXd::Zero(grid.nz, grid.nr));
    for (std::size_t g = 0; g < geometry.groups.size(); ++g)
        for (int i = 0; i < grid.nz; ++i)
            for (int j = 0; j < grid.nr; ++j)
                if (mask(i, j) >= 0) {
                    const auto& w = geometry.groups[g].weights;
                    auto it = w.find(geometry.electrodes[mask(i, j)].label);
                    dirichlet[g](i, j) = it == w.end() ? 0.0 : it->second;
                }

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setMaxIterations(mesh.max_iterations);
    cg.setTolerance(mesh.tolerance);
    cg.compute(sys.A);
    if (cg.info() != Eigen::Success) throw SolverError("preconditioner factorization failed", 1.0);

    set.geometry = geometry;
    set.geometry_checksum = geometry_checksum(geometry);
    for (std::size_t g = 0; g < geometry.groups.size(); ++g) {
        BasisField field;
        field.group = geometry.groups[g].name;
        field.role = geometry.groups[g].role;
        field.potential = dirichlet[g];
        const Eigen::VectorXd b = sys.rhs(dirichlet[g]);
        if (b.squaredNorm() > 0.0) {
            const Eigen::VectorXd x = cg.solve(b);
            for (int i = 0; i < grid.nz; ++i)
                for (int j = 0; j < grid.nr; ++j)
                    if (sys.index(i, j) >= 0) field.potential(i, j) = x(sys.index(i, j));
            field.residual = residual_impl(sys, field.potential);
            log::debug("basis '" + field.group + "': " + std::to_string(cg.iterations()) +
                       " CG iterations, residual " + std::to_string(field.residual));
            if (!(field.residual < kResidualLimit))
                throw SolverError("Laplace solve for group '" + field.group + "' did not converge within " +
                                      std::to_string(mesh.max_iterations) + " iterations",
                                  field.residual);
        }
        field.spline = CubicBSpline2D(field.potential, grid.h_r, grid.z_min, grid.h_z);
        set.fields.push_back(std::move(field));
    }
    return set;
}

void save_basis_cache(const BasisFieldSet& set, const std::filesystem::path& path) {
    std::string buf(kMagic, sizeof(kMagic));
    put(buf, kCacheVersion);
    put(buf, set.geometry_checksum);
    put(buf, static_cast<std::int32_t>(set.grid.nr));
    put(buf, static_cast<std::int32_t>(set.grid.nz));
    put(buf, set.grid.h_r);
    put(buf, set.grid.h_z);
    put(buf, set.grid.z_min);
    put(buf, static_cast<std::uint32_t>(set.fields.size()));
    for (const auto& f : set.fields) {
        put(buf, static_cast<std::uint32_t>(f.group.size()));
        buf += f.group;
        put(buf, static_cast<std::int32_t>(f.role));
        put(buf, f.residual);
        buf.append(reinterpret_cast<const char*>(f.potential.data()),
                   sizeof(double) * static_cast<std::size_t>(f.potential.size()));
    }
    if (!binio::write_checked(path, std::move(buf))) throw IoError("cannot write basis cache " + path.string());
}

std::optional<BasisFieldSet> load_basis_cache(const std::filesystem::path& path, const ElectrodeGeometry& geometry) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto reject = [&](const std::string& why) -> std::optional<BasisFieldSet> {
        log::warn("basis cache " + path.string() + " ignored (" + why + "); rebuilding");
        return std::nullopt;
    };
    if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        return reject("not a basis cache");
    std::uint64_t stored_sum = 0;
    std::memcpy(&stored_sum, buf.data() + buf.size() - sizeof(stored_sum), sizeof(stored_sum));
    const std::string body = buf.substr(0, buf.size() - sizeof(stored_sum));
    if (fnv1a64(body) != stored_sum) return reject("checksum mismatch");

    std::size_t pos = sizeof(kMagic);
    std::uint32_t version = 0;
    std::uint64_t geo_sum = 0;
    std::int32_t nr = 0, nz = 0;
    BasisFieldSet set;
    std::uint32_t n_fields = 0;
    if (!take(body, pos, version) || version != kCacheVersion) return reject("schema version");
    if (!take(body, pos, geo_sum)) return reject("truncated header");
    if (geo_sum != geometry_checksum(geometry)) return reject("geometry changed");
    if (!take(body, pos, nr) || !take(body, pos, nz) || !take(body, pos, set.grid.h_r) ||
        !take(body, pos, set.grid.h_z) || !take(body, pos, set.grid.z_min) || !take(body, pos, n_fields))
        return reject("truncated header");
    set.grid.nr = nr;
    set.grid.nz = nz;
    if (nr < 2 || nz < 2) return reject("bad dimensions");
    for (std::uint32_t k = 0; k < n_fields; ++k) {
        BasisField f;
        std::uint32_t len = 0;
        std::int32_t role = 0;
        if (!take(body, pos, len) || pos + len > body.size()) return reject("truncated field");
        f.group = body.substr(pos, len);
        pos += len;
        if (!take(body, pos, role) || !take(body, pos, f.residual)) return reject("truncated field");
        f.role = static_cast<GroupRole>(role);
        const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(nr) * static_cast<std::size_t>(nz);
        if (pos + bytes > body.size()) return reject("truncated field data");
        f.potential.resize(nz, nr);
        std::memcpy(f.potential.data(), body.data() + pos, bytes);
        pos += bytes;
        set.fields.push_back(std::move(f));
    }
    if (pos != body.size()) return reject("trailing bytes");
    set.geometry = geometry;
    set.geometry_checksum = geo_sum;
    set.rebuild_splines();
    return set;
}

BasisFieldSet load_or_solve_basis(const ElectrodeGeometry& geometry, const std::filesystem::path& cache_path,
                                  bool use_cache, bool* cache_hit) {
    if (cache_hit) *cache_hit = false;
    if (use_cache) {
        if (auto cached = load_basis_cache(cache_path, geometry)) {
            log::info("basis cache hit: " + cache_path.string() + ", field solve skipped");
            if (cache_hit) *cache_hit = true;
            return std::move(*cached);
        }
    }
    log::info("solving basis fields for geometry '" + geometry.name + "'");
    BasisFieldSet set = solve_basis_fields(geometry);
    try {
        save_basis_cache(set, cache_path);
    } catch (const std::exception& e) {
        log::warn(std::string("could not write basis cache: ") + e.what());
    }
    return set;
}

}  // namespace rydtrap::field
