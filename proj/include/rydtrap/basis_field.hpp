#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rydtrap/geometry.hpp"
#include "rydtrap/spline.hpp"

namespace rydtrap::field {

/// Uniform node grid: r_j = j h_r (j < nr), z_i = z_min + i h_z (i < nz).
struct MeshGrid {
    int nr = 0;
    int nz = 0;
    double h_r = 0.0;
    double h_z = 0.0;
    double z_min = 0.0;

    double r(int j) const { return j * h_r; }
    double z(int i) const { return z_min + i * h_z; }
    double r_max() const { return (nr - 1) * h_r; }
    double z_max() const { return z_min + (nz - 1) * h_z; }
};

struct BasisField {
    std::string group;
    GroupRole role = GroupRole::custom;
    Eigen::ArrayXXd potential;  // nz x nr, volts per applied volt
    double residual = 0.0;      // relative max-norm Laplace residual
    CubicBSpline2D spline;
};

/// Solved unit-potential fields of every electrode group of a geometry.
/// Immutable after construction; safe to share between threads.
struct BasisFieldSet {
    ElectrodeGeometry geometry;
    std::uint64_t geometry_checksum = 0;
    MeshGrid grid;
    std::vector<BasisField> fields;

    const BasisField* find(GroupRole role) const;
    const BasisField* find(const std::string& group) const;
    /// Throws ConfigError when the role is absent.
    const BasisField& by_role(GroupRole role) const;

    /// Inside the grid (one cell away from the outer box) and not inside a
    /// conductor.
    bool in_domain(double r, double z) const;

    /// Rebuilds the splines from the potentials (after loading a cache).
    void rebuild_splines();
};

/// Finite-volume Laplace solve of every group of the geometry on the mesh.
/// Throws GeometryError (invalid geometry, mesh too coarse) or SolverError.
BasisFieldSet solve_basis_fields(const ElectrodeGeometry& geometry, const MeshSpec& mesh);
inline BasisFieldSet solve_basis_fields(const ElectrodeGeometry& geometry) {
    return solve_basis_fields(geometry, geometry.mesh);
}

/// Relative max-norm residual of the discrete Laplace operator for a node
/// potential on the given grid and conductor layout.
double laplace_residual(const ElectrodeGeometry& geometry, const MeshGrid& grid,
                        const Eigen::ArrayXXd& potential);

void save_basis_cache(const BasisFieldSet& set, const std::filesystem::path& path);

/// Returns nullopt (and logs a warning) when the file is missing, corrupt or
/// built for a different geometry.
std::optional<BasisFieldSet> load_basis_cache(const std::filesystem::path& path,
                                              const ElectrodeGeometry& geometry);

/// Cache-aware solve. `cache_hit` reports whether the solve was skipped.
BasisFieldSet load_or_solve_basis(const ElectrodeGeometry& geometry, const std::filesystem::path& cache_path,
                                  bool use_cache, bool* cache_hit = nullptr);

}  // namespace rydtrap::field
