#include "rydtrap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rydtrap/errors.hpp"
#include "rydtrap/hash.hpp"

namespace rydtrap::field {

namespace {

bool point_in_polygon(const std::vector<MeridianPoint>& poly, double r, double z) {
    // Crossing number; boundary points count as inside only by accident of
    // rounding, which is fine for rasterization at cell resolution.
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.z > z) != (b.z > z)) {
            const double r_cross = a.r + (z - a.z) * (b.r - a.r) / (b.z - a.z);
            if (r < r_cross) inside = !inside;
        }
    }
    return inside;
}

bool rects_overlap(const Rect& a, const Rect& b) {
    return a.r_min < b.r_max && b.r_min < a.r_max && a.z_min < b.z_max && b.z_min < a.z_max;
}

Rect plate(double r0, double r1, double z_face, double thickness, bool top) {
    if (top) return {r0, r1, z_face, z_face + thickness};
    return {r0, r1, -z_face - thickness, -z_face};
}

double json_number(const nlohmann::json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw GeometryError(path + "." + key + ": missing");
    if (!it->is_number()) throw GeometryError(path + "." + key + ": expected a number");
    return it->get<double>();
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                    const std::string& path) {
    if (!obj.is_object()) throw GeometryError(path + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw GeometryError(path + "." + it.key() + ": unknown key");
    }
}

}  // namespace

bool Electrode::contains(double r, double z) const noexcept {
    for (const auto& rc : rects)
        if (rc.contains(r, z)) return true;
    for (const auto& poly : polygons)
        if (point_in_polygon(poly, r, z)) return true;
    return false;
}

std::string_view to_string(GroupRole role) {
    switch (role) {
        case GroupRole::static_directing: return "static_directing";
        case GroupRole::inner_oscillating: return "inner_oscillating";
        case GroupRole::outer_oscillating: return "outer_oscillating";
        case GroupRole::quadrupole: return "quadrupole";
        case GroupRole::custom: return "custom";
    }
    return "custom";
}

GroupRole group_role_from_string(std::string_view name) {
    for (auto role : {GroupRole::static_directing, GroupRole::inner_oscillating,
                      GroupRole::outer_oscillating, GroupRole::quadrupole, GroupRole::custom})
        if (to_string(role) == name) return role;
    throw GeometryError("unknown electrode group role '" + std::string(name) + "'");
}

const Electrode* ElectrodeGeometry::find_electrode(std::string_view label) const {
    for (const auto& e : electrodes)
        if (e.label == label) return &e;
    return nullptr;
}

const ElectrodeGroup* ElectrodeGeometry::find_group(GroupRole role) const {
    for (const auto& g : groups)
        if (g.role == role) return &g;
    return nullptr;
}

const Electrode* ElectrodeGeometry::conductor_at(double r, double z) const {
    for (const auto& e : electrodes)
        if (e.contains(r, z)) return &e;
    return nullptr;
}

void ElectrodeGeometry::validate() const {
    const Domain& d = domain;
    if (!(d.r_max > 0.0) || !(d.z_max > d.z_min))
        throw GeometryError("geometry '" + name + "': empty solution domain");
    if (std::abs(d.z_min + d.z_max) > 1e-12 * (d.z_max - d.z_min))
        throw GeometryError("geometry '" + name + "': domain must be symmetric about z = 0");
    if (!(mesh.h_r > 0.0) || !(mesh.h_z > 0.0) || mesh.max_iterations <= 0 || !(mesh.tolerance > 0.0))
        throw GeometryError("geometry '" + name + "': invalid mesh spec");
    if (electrodes.empty()) throw GeometryError("geometry '" + name + "': no electrodes");

    std::set<std::string> labels;
    const double slack = 1e-12;
    auto inside_box = [&](double r, double z) {
        return r >= -slack && r <= d.r_max + slack && z >= d.z_min - slack && z <= d.z_max + slack;
    };
    for (const auto& e : electrodes) {
        if (e.label.empty()) throw GeometryError("electrode with empty label");
        if (!labels.insert(e.label).second)
            throw GeometryError("duplicate electrode label '" + e.label + "'");
        if (e.rects.empty() && e.polygons.empty())
            throw GeometryError("electrode '" + e.label + "' has no shape");
        for (const auto& rc : e.rects) {
            if (!(rc.r_max > rc.r_min) || !(rc.z_max > rc.z_min))
                throw GeometryError("electrode '" + e.label + "': degenerate rectangle");
            if (!inside_box(rc.r_min, rc.z_min) || !inside_box(rc.r_max, rc.z_max))
                throw GeometryError("electrode '" + e.label + "' extends outside the domain");
        }
        for (const auto& poly : e.polygons) {
            if (poly.size() < 3)
                throw GeometryError("electrode '" + e.label + "': polygon needs >= 3 points");
            for (const auto& p : poly)
                if (!inside_box(p.r, p.z))
                    throw GeometryError("electrode '" + e.label + "' extends outside the domain");
        }
    }

    for (std::size_t a = 0; a < electrodes.size(); ++a)
        for (std::size_t b = a + 1; b < electrodes.size(); ++b)
            for (const auto& ra : electrodes[a].rects)
                for (const auto& rb : electrodes[b].rects)
                    if (rects_overlap(ra, rb))
                        throw GeometryError("electrodes '" + electrodes[a].label + "' and '" +
                                            electrodes[b].label + "' overlap");

    // Lattice probe: polygon overlaps and z -> -z symmetry. The offsets keep
    // probe points off the grid lines where shapes usually have edges.
    const int nr = std::max(8, static_cast<int>(d.r_max / mesh.h_r));
    const int nz = std::max(8, static_cast<int>((d.z_max - d.z_min) / mesh.h_z));
    const double dr = d.r_max / nr;
    const double dz = (d.z_max - d.z_min) / nz;
    for (int i = 0; i < nz; ++i) {
        const double z = d.z_min + (i + 0.5137) * dz;
        for (int j = 0; j < nr; ++j) {
            const double r = (j + 0.4871) * dr;
            int count = 0;
            for (const auto& e : electrodes) count += e.contains(r, z) ? 1 : 0;
            if (count > 1)
                throw GeometryError("overlapping electrodes near r = " + std::to_string(r) +
                                    " m, z = " + std::to_string(z) + " m");
            const bool mirrored = conductor_at(r, -z) != nullptr;
            if ((count == 1) != mirrored)
                throw GeometryError("geometry '" + name + "' is not symmetric under z -> -z near r = " +
                                    std::to_string(r) + " m, z = " + std::to_string(z) + " m");
        }
    }

    std::set<std::string> group_names;
    for (const auto& g : groups) {
        if (!group_names.insert(g.name).second)
            throw GeometryError("duplicate electrode group '" + g.name + "'");
        for (const auto& [label, w] : g.weights) {
            if (!find_electrode(label))
                throw GeometryError("group '" + g.name + "' references unknown electrode '" + label + "'");
            if (!std::isfinite(w)) throw GeometryError("group '" + g.name + "': non-finite weight");
        }
    }
}

ElectrodeGeometry reference_geometry() {
    // Two mirrored planes, faces at z = +-d/2. Ring radii beyond the inner
    // disk are read off the figure proportions; the hexapole strength per
    // volt is insensitive to them (within 10% for outer edges 0.7-2.5 mm).
    constexpr double gap = 1.0e-3;
    constexpr double face = gap / 2;
    constexpr double thickness = 40e-6;
    constexpr double inner_r = 0.5e-3;
    constexpr double slit = 50e-6;
    constexpr double outer_r = 1.5e-3;
    constexpr double guard_r = 3.5e-3;

    ElectrodeGeometry g;
    g.name = "reference";
    g.plate_gap = gap;
    g.inner_electrode_diameter = 2 * inner_r;
    g.domain = {4.0e-3, -0.7e-3, 0.7e-3};
    g.mesh = {10e-6, 10e-6, 20000, 1e-13};

    for (bool top : {true, false}) {
        const std::string side = top ? "top" : "bottom";
        g.electrodes.push_back({side + "_inner", {plate(0.0, inner_r, face, thickness, top)}, {}});
        g.electrodes.push_back(
            {side + "_outer", {plate(inner_r + slit, outer_r, face, thickness, top)}, {}});
        g.electrodes.push_back(
            {side + "_guard", {plate(outer_r + slit, guard_r, face, thickness, top)}, {}});
    }

    // Bottom plane positive so the directing field at O points along +z.
    ElectrodeGroup directing{"directing", GroupRole::static_directing, {}};
    for (const char* part : {"inner", "outer", "guard"}) {
        directing.weights[std::string("top_") + part] = -1.0;
        directing.weights[std::string("bottom_") + part] = 1.0;
    }
    g.groups.push_back(directing);
    g.groups.push_back({"inner_ac", GroupRole::inner_oscillating, {{"top_inner", 1.0}, {"bottom_inner", -1.0}}});
    g.groups.push_back({"outer_ac", GroupRole::outer_oscillating, {{"top_outer", -1.0}, {"bottom_outer", 1.0}}});
    g.groups.push_back({"gravity", GroupRole::quadrupole, {{"top_inner", 1.0}, {"bottom_inner", 1.0}}});
    return g;
}

ElectrodeGeometry parallel_plate_geometry(double gap, double plate_radius) {
    const double thickness = gap / 20;
    ElectrodeGeometry g;
    g.name = "parallel_plates";
    g.plate_gap = gap;
    g.inner_electrode_diameter = 2 * plate_radius;
    g.domain = {plate_radius * 1.25, -(gap / 2 + 4 * thickness), gap / 2 + 4 * thickness};
    g.mesh = {gap / 50, gap / 50, 20000, 1e-13};
    g.electrodes.push_back({"top", {plate(0.0, plate_radius, gap / 2, thickness, true)}, {}});
    g.electrodes.push_back({"bottom", {plate(0.0, plate_radius, gap / 2, thickness, false)}, {}});
    g.groups.push_back({"plates", GroupRole::static_directing, {{"top", 1.0}, {"bottom", -1.0}}});
    return g;
}

ElectrodeGeometry hexapole_geometry(double r0) {
    const double r_max = 3 * r0;
    const double z_max = 3 * r0;
    const int samples = 240;

    // Cap: largest root of z^3 - 1.5 r^2 z - r0^3 = 0, walked out to z_max.
    auto cap_z = [&](double r) {
        double z = std::max(r0, r * std::sqrt(1.5)) + r0;
        for (int it = 0; it < 60; ++it) {
            const double f = z * z * z - 1.5 * r * r * z - r0 * r0 * r0;
            const double fp = 3 * z * z - 1.5 * r * r;
            z -= f / fp;
        }
        return z;
    };
    const double r_cap_end = std::sqrt((z_max * z_max * z_max - r0 * r0 * r0) / (1.5 * z_max));
    std::vector<MeridianPoint> cap;
    for (int k = 0; k <= samples; ++k) {
        const double r = r_cap_end * k / samples;
        cap.push_back({r, std::min(cap_z(r), z_max)});
    }
    cap.back().z = z_max;
    cap.push_back({0.0, z_max});

    // Saddle ring: r(z) = sqrt((z^3 + r0^3) / (1.5 z)) from the box edge up.
    auto ring_r = [&](double z) { return std::sqrt((z * z * z + r0 * r0 * r0) / (1.5 * z)); };
    double lo = 1e-6 * r0, hi = r0;  // ring_r decreasing on (0, 0.79 r0)
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ring_r(mid) > r_max ? lo : hi) = mid;
    }
    const double z_a = hi;
    std::vector<MeridianPoint> ring;
    for (int k = 0; k <= samples; ++k) {
        // Denser sampling near the tip where curvature is largest.
        const double s = static_cast<double>(k) / samples;
        const double z = z_a * std::pow(z_max / z_a, s);
        ring.push_back({std::min(ring_r(z), r_max), z});
    }
    ring.front().r = r_max;
    ring.push_back({r_max, z_max});

    auto mirror = [](std::vector<MeridianPoint> pts) {
        for (auto& p : pts) p.z = -p.z;
        return pts;
    };

    ElectrodeGeometry g;
    g.name = "hexapole";
    g.plate_gap = 2 * r0;
    g.inner_electrode_diameter = 2 * r0;
    g.domain = {r_max, -z_max, z_max};
    g.mesh = {r0 / 40, r0 / 40, 40000, 1e-13};
    g.electrodes.push_back({"cap_top", {}, {cap}});
    g.electrodes.push_back({"ring_top", {}, {ring}});
    g.electrodes.push_back({"cap_bottom", {}, {mirror(cap)}});
    g.electrodes.push_back({"ring_bottom", {}, {mirror(ring)}});
    g.groups.push_back({"hexapole",
                        GroupRole::custom,
                        {{"cap_top", 1.0}, {"ring_top", -1.0}, {"cap_bottom", -1.0}, {"ring_bottom", 1.0}}});
    return g;
}

nlohmann::json to_json(const ElectrodeGeometry& geometry) {
    nlohmann::json electrodes = nlohmann::json::array();
    for (const auto& e : geometry.electrodes) {
        nlohmann::json rects = nlohmann::json::array();
        for (const auto& r : e.rects) rects.push_back({r.r_min, r.r_max, r.z_min, r.z_max});
        nlohmann::json polys = nlohmann::json::array();
        for (const auto& poly : e.polygons) {
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& p : poly) pts.push_back({p.r, p.z});
            polys.push_back(pts);
        }
        electrodes.push_back({{"label", e.label}, {"rects_m", rects}, {"polylines_m", polys}});
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : geometry.groups)
        groups.push_back({{"name", g.name}, {"role", std::string(to_string(g.role))}, {"weights", g.weights}});
    return {
        {"name", geometry.name},
        {"plate_gap_m", geometry.plate_gap},
        {"inner_electrode_diameter_m", geometry.inner_electrode_diameter},
        {"domain", {{"r_max_m", geometry.domain.r_max}, {"z_min_m", geometry.domain.z_min},
                    {"z_max_m", geometry.domain.z_max}}},
        {"mesh", {{"h_r_m", geometry.mesh.h_r}, {"h_z_m", geometry.mesh.h_z},
                  {"max_iterations", geometry.mesh.max_iterations},
                  {"tolerance", geometry.mesh.tolerance}}},
        {"electrodes", electrodes},
        {"groups", groups},
    };
}

ElectrodeGeometry geometry_from_json(const nlohmann::json& doc) {
    reject_unknown(doc, {"name", "plate_gap_m", "inner_electrode_diameter_m", "domain", "mesh", "electrodes", "groups"},
                   "geometry");
    ElectrodeGeometry g;
    g.name = doc.value("name", std::string("custom"));
    g.plate_gap = json_number(doc, "plate_gap_m", "geometry");
    g.inner_electrode_diameter = json_number(doc, "inner_electrode_diameter_m", "geometry");

    if (!doc.contains("domain")) throw GeometryError("geometry.domain: missing");
    const auto& dom = doc.at("domain");
    reject_unknown(dom, {"r_max_m", "z_min_m", "z_max_m"}, "geometry.domain");
    g.domain = {json_number(dom, "r_max_m", "geometry.domain"), json_number(dom, "z_min_m", "geometry.domain"),
                json_number(dom, "z_max_m", "geometry.domain")};

    if (doc.contains("mesh")) {
        const auto& m = doc.at("mesh");
        reject_unknown(m, {"h_r_m", "h_z_m", "max_iterations", "tolerance"}, "geometry.mesh");
        g.mesh.h_r = m.value("h_r_m", g.mesh.h_r);
        g.mesh.h_z = m.value("h_z_m", g.mesh.h_z);
        g.mesh.max_iterations = m.value("max_iterations", g.mesh.max_iterations);
        g.mesh.tolerance = m.value("tolerance", g.mesh.tolerance);
    }

    if (!doc.contains("electrodes") || !doc.at("electrodes").is_array())
        throw GeometryError("geometry.electrodes: expected an array");
    std::size_t idx = 0;
    for (const auto& je : doc.at("electrodes")) {
        const std::string path = "geometry.electrodes[" + std::to_string(idx++) + "]";
        reject_unknown(je, {"label", "rects_m", "polylines_m"}, path);
        Electrode e;
        if (!je.contains("label") || !je.at("label").is_string()) throw GeometryError(path + ".label: missing");
        e.label = je.at("label").get<std::string>();
        for (const auto& r : je.value("rects_m", nlohmann::json::array())) {
            if (!r.is_array() || r.size() != 4)
                throw GeometryError(path + ".rects_m: expected [r_min, r_max, z_min, z_max]");
            e.rects.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()});
        }
        for (const auto& poly : je.value("polylines_m", nlohmann::json::array())) {
            std::vector<MeridianPoint> pts;
            for (const auto& p : poly) {
                if (!p.is_array() || p.size() != 2) throw GeometryError(path + ".polylines_m: expected [r, z] points");
                pts.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            e.polygons.push_back(std::move(pts));
        }
        g.electrodes.push_back(std::move(e));
    }

    idx = 0;
    for (const auto& jg : doc.value("groups", nlohmann::json::array())) {
        const std::string path = "geometry.groups[" + std::to_string(idx++) + "]";
        reject_unknown(jg, {"name", "role", "weights"}, path);
        ElectrodeGroup grp;
        grp.name = jg.value("name", std::string("group") + std::to_string(idx - 1));
        grp.role = group_role_from_string(jg.value("role", std::string("custom")));
        if (!jg.contains("weights") || !jg.at("weights").is_object())
            throw GeometryError(path + ".weights: expected an object of label -> weight");
        for (auto it = jg.at("weights").begin(); it != jg.at("weights").end(); ++it)
            grp.weights[it.key()] = it.value().get<double>();
        g.groups.push_back(std::move(grp));
    }
    g.validate();
    return g;
}

std::uint64_t geometry_checksum(const ElectrodeGeometry& geometry) {
    return fnv1a64(to_json(geometry).dump());
}

}  // namespace rydtrap::field
