#pragma once

#include <Eigen/Core>

namespace rydtrap::field {

/// Value and derivatives of a scalar at one point of the (r, z) plane.
struct Jet2 {
    double v = 0.0;
    double r = 0.0;
    double z = 0.0;
    double rr = 0.0;
    double rz = 0.0;
    double zz = 0.0;

    Jet2& operator+=(const Jet2& o) {
        v += o.v; r += o.r; z += o.z; rr += o.rr; rz += o.rz; zz += o.zz;
        return *this;
    }
    Jet2 operator*(double s) const { return {v * s, r * s, z * s, rr * s, rz * s, zz * s}; }
    Jet2 operator+(const Jet2& o) const { Jet2 t = *this; return t += o; }
};

/// Interpolating uniform cubic B-spline on a node grid values(i, j) with
/// z_i = z0 + i h_z and r_j = j h_r. The r = 0 edge is mirrored (even
/// extension, so d/dr vanishes on the axis) unless mirror_r is false.
/// Other edges take their curvature from the end nodes, which makes
/// quadratic data exact.
/// C2 everywhere inside the grid.
class CubicBSpline2D {
public:
    /// Tensor weights for one evaluation point; reusable across splines
    /// built on the same grid.
    struct Stencil {
        int i0 = 0;  // first coefficient row (z)
        int j0 = 0;  // first coefficient column (r)
        double wz[3][4] = {};
        double wr[3][4] = {};
    };

    CubicBSpline2D() = default;
    CubicBSpline2D(const Eigen::ArrayXXd& values, double h_r, double z0, double h_z, bool mirror_r = true);

    Stencil stencil(double r, double z) const;
    Jet2 apply(const Stencil& s) const;
    Jet2 operator()(double r, double z) const { return apply(stencil(r, z)); }

    bool empty() const { return coeff_.size() == 0; }
    int rows() const { return nz_; }
    int cols() const { return nr_; }

private:
    Eigen::ArrayXXd coeff_;  // (nz + 2) x (nr + 2), one ghost layer per side
    int nz_ = 0;
    int nr_ = 0;
    double h_r_ = 1.0;
    double z0_ = 0.0;
    double h_z_ = 1.0;
};

}  // namespace rydtrap::field
