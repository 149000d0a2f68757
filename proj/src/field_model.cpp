#include "rydtrap/field_model.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "rydtrap/errors.hpp"

namespace rydtrap::field {

namespace {

// Cartesian field and Jacobian from the meridian-plane jet of phi.
FieldSample from_jet(const Jet2& p, const Eigen::Vector3d& x) {
    FieldSample s;
    const double rho = std::hypot(x.x(), x.y());
    double ux = 1.0, uy = 0.0;
    double q = p.rr;  // phi_r / r, limit on the axis
    if (rho > 1e-15) {
        ux = x.x() / rho;
        uy = x.y() / rho;
        q = p.r / rho;
    }
    s.E = {-p.r * ux, -p.r * uy, -p.z};
    // Hessian of phi in Cartesian coordinates.
    const double hxx = p.rr * ux * ux + q * uy * uy;
    const double hyy = p.rr * uy * uy + q * ux * ux;
    const double hxy = (p.rr - q) * ux * uy;
    const double hxz = p.rz * ux;
    const double hyz = p.rz * uy;
    s.J << -hxx, -hxy, -hxz,
           -hxy, -hyy, -hyz,
           -hxz, -hyz, -p.zz;
    return s;
}

}  // namespace

double FieldSample::theta() const {
    return std::atan2(std::hypot(E.x(), E.y()), E.z());
}

MeshFieldModel::MeshFieldModel(std::shared_ptr<const BasisFieldSet> basis, const std::vector<Channel>& channels,
                               double omega)
    : basis_(std::move(basis)), omega_(omega) {
    const MeshGrid& g = basis_->grid;
    Eigen::ArrayXXd stat = Eigen::ArrayXXd::Zero(g.nz, g.nr);
    Eigen::ArrayXXd ac = Eigen::ArrayXXd::Zero(g.nz, g.nr);
    for (const auto& ch : channels) {
        const BasisField* f = basis_->find(ch.group);
        if (!f) throw ConfigError("no basis field for electrode group '" + ch.group + "'");
        if (ch.static_volts != 0.0) stat += ch.static_volts * f->potential;
        if (ch.ac_volts != 0.0) ac += ch.ac_volts * f->potential;
    }
    // Splines are linear in the node values, so combining first is exact.
    static_ = CubicBSpline2D(stat, g.h_r, g.z_min, g.h_z);
    ac_ = CubicBSpline2D(ac, g.h_r, g.z_min, g.h_z);
}

bool MeshFieldModel::in_domain(const Eigen::Vector3d& x) const {
    return basis_->in_domain(std::hypot(x.x(), x.y()), x.z());
}

FieldSample MeshFieldModel::sample(const Eigen::Vector3d& x, double t) const {
    const double rho = std::hypot(x.x(), x.y());
    if (!basis_->in_domain(rho, x.z())) {
        std::ostringstream os;
        os << "position (" << x.x() << ", " << x.y() << ", " << x.z() << ") m is outside the field domain";
        throw OutOfDomainError(os.str());
    }
    const auto st = static_.stencil(rho, x.z());
    Jet2 p = static_.apply(st);
    const double c = std::cos(omega_ * t);
    if (c != 0.0) p += ac_.apply(st) * c;
    return from_jet(p, x);
}

std::vector<Channel> trap_channels(const BasisFieldSet& basis, const DriveWaveforms& d) {
    std::vector<Channel> ch;
    ch.push_back({basis.by_role(GroupRole::static_directing).group, d.U0, 0.0});
    ch.push_back({basis.by_role(GroupRole::inner_oscillating).group, 0.0, d.u1_scale * d.U1});
    ch.push_back({basis.by_role(GroupRole::outer_oscillating).group, 0.0, d.u1_scale * d.eta * d.U1});
    if (const auto* q = basis.find(GroupRole::quadrupole)) ch.push_back({q->group, d.U2, 0.0});
    else if (d.U2 != 0.0) throw ConfigError("geometry has no quadrupole group but U2 != 0");
    return ch;
}

std::shared_ptr<MeshFieldModel> make_trap_field(std::shared_ptr<const BasisFieldSet> basis,
                                                const DriveWaveforms& drives) {
    if (!(drives.omega1 > 0.0)) throw ConfigError("drive angular frequency must be positive");
    auto ch = trap_channels(*basis, drives);
    return std::make_shared<MeshFieldModel>(std::move(basis), ch, drives.omega1);
}

double calibrate_eta(const BasisFieldSet& basis) {
    const BasisField* inner = basis.find(GroupRole::inner_oscillating);
    const BasisField* outer = basis.find(GroupRole::outer_oscillating);
    if (!inner || !outer || inner == outer)
        throw CalibrationError("calibration needs distinct inner and outer oscillating groups");
    // On the axis only E_z survives.
    const double e_in = -inner->spline(0.0, 0.0).z;
    const double e_out = -outer->spline(0.0, 0.0).z;
    const double off_in = std::abs(inner->spline(100e-6, 0.0).r);
    const double scale = std::max({std::abs(e_in), off_in, 1e-300});
    if (!(std::abs(e_out) > 1e-9 * scale))
        throw CalibrationError("outer oscillating group produces no field at the origin");
    const double eta = -e_in / e_out;

    // Post-condition against the combined pattern 100 um off-axis.
    const Jet2 off = inner->spline(100e-6, 0.0) + outer->spline(100e-6, 0.0) * eta;
    const Jet2 at_o = inner->spline(0.0, 0.0) + outer->spline(0.0, 0.0) * eta;
    const double ref = std::hypot(off.r, off.z);
    if (!(std::abs(at_o.z) <= 1e-4 * ref))
        throw CalibrationError("residual oscillating field at the origin exceeds 1e-4 of the off-axis field");
    return eta;
}

double hexapole_u1_scale(const BasisFieldSet& basis, double eta, double fit_radius) {
    const BasisField* inner = basis.find(GroupRole::inner_oscillating);
    const BasisField* outer = basis.find(GroupRole::outer_oscillating);
    if (!inner || !outer) throw CalibrationError("U1 normalization needs inner and outer oscillating groups");
    const double d = basis.geometry.plate_gap;
    if (!(d > 0.0)) throw CalibrationError("U1 normalization needs a positive plate gap");
    const double a3 = fit_harmonics(*inner, basis.grid, fit_radius).a[3] +
                      eta * fit_harmonics(*outer, basis.grid, fit_radius).a[3];
    if (!(std::abs(a3) > 0.0)) throw CalibrationError("oscillating groups carry no hexapole component");
    return 4.0 / (d * d * d) / a3;
}

HarmonicFit fit_harmonics(const BasisField& field, const MeshGrid& grid, double R) {
    std::vector<std::array<double, 3>> pts;  // r, z, phi
    for (int i = 0; i < grid.nz; ++i)
        for (int j = 0; j < grid.nr; ++j) {
            const double r = grid.r(j), z = grid.z(i);
            if (r * r + z * z <= R * R) pts.push_back({r, z, field.potential(i, j)});
        }
    if (pts.size() < 12) throw ConfigError("harmonic fit ball contains too few mesh nodes");
    Eigen::MatrixXd A(pts.size(), 6);
    Eigen::VectorXd b(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        // Scaled by R^l so the columns are O(1).
        const double r = pts[k][0] / R, z = pts[k][1] / R, r2 = r * r, z2 = z * z;
        A(k, 0) = 1.0;
        A(k, 1) = z;
        A(k, 2) = z2 - 0.5 * r2;
        A(k, 3) = z * (z2 - 1.5 * r2);
        A(k, 4) = z2 * z2 - 3.0 * z2 * r2 + 0.375 * r2 * r2;
        A(k, 5) = z * (z2 * z2 - 5.0 * z2 * r2 + 1.875 * r2 * r2);
        b(k) = pts[k][2];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    HarmonicFit fit;
    for (int l = 0; l < 6; ++l) fit.a[l] = c(l) / std::pow(R, l);
    fit.rms_residual = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(pts.size()));
    return fit;
}

AnalyticFieldModel::AnalyticFieldModel(Coefficients static_part, Coefficients ac_part, double omega,
                                       double domain_radius)
    : static_(static_part), ac_(ac_part), omega_(omega), domain_radius_(domain_radius) {}

std::shared_ptr<AnalyticFieldModel> AnalyticFieldModel::from_basis(const BasisFieldSet& basis,
                                                                   const DriveWaveforms& d, double fit_radius) {
    Coefficients st, ac;
    auto add = [&](Coefficients& c, GroupRole role, double volts) {
        const BasisField* f = basis.find(role);
        if (!f || volts == 0.0) return;
        const HarmonicFit h = fit_harmonics(*f, basis.grid, fit_radius);
        c.a1 += volts * h.a[1];
        c.a2 += volts * h.a[2];
        c.a3 += volts * h.a[3];
    };
    add(st, GroupRole::static_directing, d.U0);
    add(st, GroupRole::quadrupole, d.U2);
    add(ac, GroupRole::inner_oscillating, d.u1_scale * d.U1);
    add(ac, GroupRole::outer_oscillating, d.u1_scale * d.eta * d.U1);
    const double radius = std::min(basis.geometry.plate_gap / 2, basis.grid.r_max());
    return std::make_shared<AnalyticFieldModel>(st, ac, d.omega1, radius);
}

FieldSample AnalyticFieldModel::sample(const Eigen::Vector3d& x, double t) const {
    if (!in_domain(x)) {
        std::ostringstream os;
        os << "position (" << x.x() << ", " << x.y() << ", " << x.z() << ") m is outside the analytic field ball";
        throw OutOfDomainError(os.str());
    }
    const double c = std::cos(omega_ * t);
    const double a1 = static_.a1 + c * ac_.a1;
    const double a2 = static_.a2 + c * ac_.a2;
    const double a3 = static_.a3 + c * ac_.a3;
    const double X = x.x(), Y = x.y(), Z = x.z();
    const double rho2 = X * X + Y * Y;
    FieldSample s;
    s.E = {a2 * X + 3 * a3 * Z * X, a2 * Y + 3 * a3 * Z * Y, -(a1 + 2 * a2 * Z + a3 * (3 * Z * Z - 1.5 * rho2))};
    const double hxx = -a2 - 3 * a3 * Z;
    s.J << -hxx, 0.0, 3 * a3 * X,
           0.0, -hxx, 3 * a3 * Y,
           3 * a3 * X, 3 * a3 * Y, -(2 * a2 + 6 * a3 * Z);
    return s;
}

}  // namespace rydtrap::field
