#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rydtrap/basis_field.hpp"

namespace rydtrap::field {

/// Electrode drive voltages. The oscillating channel is s U1 cos(omega1 t)
/// on the inner group and s eta U1 cos(omega1 t) on the outer group, where
/// s = u1_scale is 1 when U1 is the literal electrode amplitude (see
/// hexapole_u1_scale for the other convention).
struct DriveWaveforms {
    double U0 = 0.2;                      // V
    double U1 = 0.155;                    // V
    double omega1 = 2 * 3.14159265358979323846 * 430.0;  // rad/s
    double U2 = -0.003;                   // V
    double eta = 1.0;
    double u1_scale = 1.0;

    DriveWaveforms scaled(double a) const {
        DriveWaveforms d = *this;
        d.U0 *= a;
        d.U1 *= a;
        d.U2 *= a;
        return d;
    }
};

/// Field and its spatial Jacobian J(i, k) = dE_i / dx_k at one point.
struct FieldSample {
    Eigen::Vector3d E = Eigen::Vector3d::Zero();
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();

    double magnitude() const { return E.norm(); }
    /// Angle between E and +z, in [0, pi].
    double theta() const;
};

class FieldModel {
public:
    virtual ~FieldModel() = default;

    /// Throws OutOfDomainError when x is outside the model's domain.
    virtual FieldSample sample(const Eigen::Vector3d& x, double t) const = 0;
    virtual bool in_domain(const Eigen::Vector3d& x) const = 0;
    /// Angular frequency of the fastest drive, 0 for static models.
    virtual double drive_omega() const = 0;

    Eigen::Vector3d field(const Eigen::Vector3d& x, double t) const { return sample(x, t).E; }
};

/// One voltage channel on a basis group: V(t) = static_volts +
/// ac_volts cos(omega t).
struct Channel {
    std::string group;
    double static_volts = 0.0;
    double ac_volts = 0.0;
};

/// Superposition of solved basis fields, interpolated by C2 splines.
class MeshFieldModel final : public FieldModel {
public:
    MeshFieldModel(std::shared_ptr<const BasisFieldSet> basis, const std::vector<Channel>& channels, double omega);

    FieldSample sample(const Eigen::Vector3d& x, double t) const override;
    bool in_domain(const Eigen::Vector3d& x) const override;
    double drive_omega() const override { return omega_; }

    const BasisFieldSet& basis() const { return *basis_; }

private:
    std::shared_ptr<const BasisFieldSet> basis_;
    CubicBSpline2D static_;
    CubicBSpline2D ac_;
    double omega_;
};

/// Channels of the trap drive for a geometry with the four standard roles.
std::vector<Channel> trap_channels(const BasisFieldSet& basis, const DriveWaveforms& drives);
std::shared_ptr<MeshFieldModel> make_trap_field(std::shared_ptr<const BasisFieldSet> basis,
                                                const DriveWaveforms& drives);

/// eta cancelling the oscillating field at the origin. Throws
/// CalibrationError on a missing or field-free outer group.
double calibrate_eta(const BasisFieldSet& basis);

/// Electrode volts per volt of U1 such that the oscillating potential has
/// the hexapole coefficient of the ideal hexapole whose two axial caps, at
/// z = +-d/2, differ in potential by U1: a3 = 4 U1 / d^3.
double hexapole_u1_scale(const BasisFieldSet& basis, double eta, double fit_radius = 200e-6);

/// Axisymmetric solid-harmonic coefficients a_l of a basis potential,
/// phi = sum_l a_l r^l P_l(cos), fitted by least squares over a ball.
struct HarmonicFit {
    std::array<double, 6> a{};  // l = 0..5, units V / m^l per applied volt
    double rms_residual = 0.0;  // V per applied volt
};

HarmonicFit fit_harmonics(const BasisField& field, const MeshGrid& grid, double ball_radius);

/// Homogeneous + quadrupole + hexapole field with coefficients
/// phi = a1 z + a2 (z^2 - r^2/2) + a3 (z^3 - 3/2 z r^2), separately for the
/// static and oscillating parts.
class AnalyticFieldModel final : public FieldModel {
public:
    struct Coefficients {
        double a1 = 0.0;
        double a2 = 0.0;
        double a3 = 0.0;
    };

    AnalyticFieldModel(Coefficients static_part, Coefficients ac_part, double omega, double domain_radius);

    /// Fits the basis fields over a ball of `fit_radius` around O.
    static std::shared_ptr<AnalyticFieldModel> from_basis(const BasisFieldSet& basis, const DriveWaveforms& drives,
                                                          double fit_radius = 200e-6);

    FieldSample sample(const Eigen::Vector3d& x, double t) const override;
    bool in_domain(const Eigen::Vector3d& x) const override { return x.norm() <= domain_radius_; }
    double drive_omega() const override { return omega_; }

    const Coefficients& static_part() const { return static_; }
    const Coefficients& ac_part() const { return ac_; }

private:
    Coefficients static_;
    Coefficients ac_;
    double omega_;
    double domain_radius_;
};

/// A model plus a static perturbation; the term adds its field and
/// Jacobian to the base sample.
class OffsetFieldModel final : public FieldModel {
public:
    using Term = std::function<void(const Eigen::Vector3d&, Eigen::Vector3d&, Eigen::Matrix3d&)>;

    OffsetFieldModel(std::shared_ptr<const FieldModel> base, Term term)
        : base_(std::move(base)), term_(std::move(term)) {}

    FieldSample sample(const Eigen::Vector3d& x, double t) const override {
        FieldSample s = base_->sample(x, t);
        term_(x, s.E, s.J);
        return s;
    }
    bool in_domain(const Eigen::Vector3d& x) const override { return base_->in_domain(x); }
    double drive_omega() const override { return base_->drive_omega(); }

private:
    std::shared_ptr<const FieldModel> base_;
    Term term_;
};

}  // namespace rydtrap::field
