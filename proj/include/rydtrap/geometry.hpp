#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rydtrap::field {

/// Axis-aligned rectangle in the meridian (r, z) half plane, meters.
struct Rect {
    double r_min = 0.0;
    double r_max = 0.0;
    double z_min = 0.0;
    double z_max = 0.0;

    /// Closed rectangle, widened by 1 pm so mesh nodes lying on an edge are
    /// classified the same way on both sides of the z = 0 mirror.
    bool contains(double r, double z) const noexcept {
        constexpr double tol = 1e-12;
        return r >= r_min - tol && r <= r_max + tol && z >= z_min - tol && z <= z_max + tol;
    }
};

struct MeridianPoint {
    double r = 0.0;
    double z = 0.0;
};

/// One conductor. Its cross-section is the union of rectangles and closed
/// polygons in the meridian plane; the body of revolution around Oz is the
/// physical electrode.
struct Electrode {
    std::string label;
    std::vector<Rect> rects;
    std::vector<std::vector<MeridianPoint>> polygons;

    bool contains(double r, double z) const noexcept;
};

enum class GroupRole {
    static_directing,
    inner_oscillating,
    outer_oscillating,
    quadrupole,
    custom,
};

std::string_view to_string(GroupRole role);
GroupRole group_role_from_string(std::string_view name);

/// A drive channel: the voltage pattern (weight per electrode label) that one
/// unit of the channel's drive places on the conductors. Electrodes absent
/// from the map sit at 0 V for this channel.
struct ElectrodeGroup {
    std::string name;
    GroupRole role = GroupRole::custom;
    std::map<std::string, double> weights;
};

struct Domain {
    double r_max = 0.0;
    double z_min = 0.0;
    double z_max = 0.0;
};

struct MeshSpec {
    double h_r = 10e-6;
    double h_z = 10e-6;
    int max_iterations = 20000;
    double tolerance = 1e-13;  // relative 2-norm target of the linear solve
};

struct ElectrodeGeometry {
    std::string name;
    double plate_gap = 0.0;
    double inner_electrode_diameter = 0.0;
    Domain domain;
    MeshSpec mesh;
    std::vector<Electrode> electrodes;
    std::vector<ElectrodeGroup> groups;

    /// Throws GeometryError on electrodes outside the domain, overlapping
    /// electrodes, unknown labels in a group, or broken z -> -z symmetry.
    void validate() const;

    const Electrode* find_electrode(std::string_view label) const;
    const ElectrodeGroup* find_group(GroupRole role) const;

    /// Label of the conductor covering (r, z), or nullptr.
    const Electrode* conductor_at(double r, double z) const;
};

/// The stack of two mirrored planar electrode planes used by default: inner
/// disk, oscillating outer ring and a grounded-by-default guard, 1 mm gap,
/// 1 mm inner diameter.
ElectrodeGeometry reference_geometry();

/// Two plates at +1 / -1 V (single custom group) spanning `plate_radius`.
ElectrodeGeometry parallel_plate_geometry(double gap, double plate_radius);

/// Electrodes shaped on the equipotentials of the l = 3 harmonic
/// z^3 - 3/2 z r^2 = +-r0^3: axial caps at +-1, saddle rings at -+1.
ElectrodeGeometry hexapole_geometry(double r0);

nlohmann::json to_json(const ElectrodeGeometry& geometry);
ElectrodeGeometry geometry_from_json(const nlohmann::json& document);

/// Stable 64-bit digest of the geometry (canonical JSON dump).
std::uint64_t geometry_checksum(const ElectrodeGeometry& geometry);

}  // namespace rydtrap::field
