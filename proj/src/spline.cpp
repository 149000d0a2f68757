#include "rydtrap/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rydtrap::field {

namespace {

// Coefficients c[-1..N+1] (returned shifted by one) of the cubic B-spline
// interpolating f[0..N]. even_start mirrors the left end. Other ends take
// the second derivative of the cubic through the four end nodes (natural
// when fewer than four nodes), so quadratics are reproduced exactly.
void interpolate_1d(const double* f, int stride, int n, bool even_start, double* out, int out_stride) {
    const int N = n - 1;
    std::vector<double> c(n);
    // h^2 f'' at the ends, second-order one-sided differences.
    auto end_curvature = [&](int j0, int dir) {
        if (n < 4) return 0.0;
        auto F = [&](int k) { return f[(j0 + dir * k) * stride]; };
        return 2.0 * F(0) - 5.0 * F(1) + 4.0 * F(2) - F(3);
    };
    const double s_lo = even_start ? 0.0 : end_curvature(0, 1);
    const double s_hi = n > 1 ? end_curvature(N, -1) : 0.0;
    if (n == 1) {
        c[0] = f[0];
    } else {
        // Tridiagonal rows a c[j-1] + b c[j] + d c[j+1] = rhs.
        std::vector<double> a(n, 1.0), b(n, 4.0), d(n, 1.0), rhs(n);
        for (int j = 0; j < n; ++j) rhs[j] = 6.0 * f[j * stride];
        if (even_start) {
            a[0] = 0.0;
            d[0] = 2.0;
        } else {
            a[0] = 0.0;
            b[0] = 6.0;
            d[0] = 0.0;
            rhs[0] -= s_lo;
        }
        a[N] = 0.0;
        b[N] = 6.0;
        d[N] = 0.0;
        rhs[N] -= s_hi;
        for (int j = 1; j < n; ++j) {
            const double m = a[j] / b[j - 1];
            b[j] -= m * d[j - 1];
            rhs[j] -= m * rhs[j - 1];
        }
        c[N] = rhs[N] / b[N];
        for (int j = N - 1; j >= 0; --j) c[j] = (rhs[j] - d[j] * c[j + 1]) / b[j];
    }
    for (int j = 0; j < n; ++j) out[(j + 1) * out_stride] = c[j];
    if (n == 1) {
        out[0] = c[0];
        out[2 * out_stride] = c[0];
        return;
    }
    out[0] = even_start ? c[1] : 2.0 * c[0] - c[1] + s_lo;
    out[(N + 2) * out_stride] = 2.0 * c[N] - c[N - 1] + s_hi;
}

void basis_weights(double t, double h, double w[3][4]) {
    const double t2 = t * t, t3 = t2 * t, u = 1.0 - t;
    w[0][0] = u * u * u / 6.0;
    w[0][1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
    w[0][2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
    w[0][3] = t3 / 6.0;
    const double ih = 1.0 / h;
    w[1][0] = -0.5 * u * u * ih;
    w[1][1] = (1.5 * t2 - 2.0 * t) * ih;
    w[1][2] = (-1.5 * t2 + t + 0.5) * ih;
    w[1][3] = 0.5 * t2 * ih;
    const double ih2 = ih * ih;
    w[2][0] = u * ih2;
    w[2][1] = (3.0 * t - 2.0) * ih2;
    w[2][2] = (-3.0 * t + 1.0) * ih2;
    w[2][3] = t * ih2;
}

}  // namespace

CubicBSpline2D::CubicBSpline2D(const Eigen::ArrayXXd& values, double h_r, double z0, double h_z, bool mirror_r)
    : nz_(static_cast<int>(values.rows())),
      nr_(static_cast<int>(values.cols())),
      h_r_(h_r),
      z0_(z0),
      h_z_(h_z) {
    if (nz_ < 2 || nr_ < 2) throw std::invalid_argument("spline grid needs at least 2x2 nodes");
    // Pass 1 along r into a temporary with r ghosts; pass 2 along z.
    Eigen::ArrayXXd tmp(nz_, nr_ + 2);
    for (int i = 0; i < nz_; ++i) {
        Eigen::ArrayXd row = values.row(i).transpose();
        Eigen::ArrayXd out(nr_ + 2);
        interpolate_1d(row.data(), 1, nr_, mirror_r, out.data(), 1);
        tmp.row(i) = out.transpose();
    }
    coeff_.resize(nz_ + 2, nr_ + 2);
    for (int j = 0; j < nr_ + 2; ++j) {
        Eigen::ArrayXd col = tmp.col(j);
        Eigen::ArrayXd out(nz_ + 2);
        interpolate_1d(col.data(), 1, nz_, false, out.data(), 1);
        coeff_.col(j) = out;
    }
}

CubicBSpline2D::Stencil CubicBSpline2D::stencil(double r, double z) const {
    Stencil s;
    const double xr = std::abs(r) / h_r_;
    const double xz = (z - z0_) / h_z_;
    const int jr = std::clamp(static_cast<int>(std::floor(xr)), 0, nr_ - 2);
    const int iz = std::clamp(static_cast<int>(std::floor(xz)), 0, nz_ - 2);
    basis_weights(xr - jr, h_r_, s.wr);
    basis_weights(xz - iz, h_z_, s.wz);
    // Coefficient index of c[j-1] in the ghosted array is j.
    s.j0 = jr;
    s.i0 = iz;
    return s;
}

Jet2 CubicBSpline2D::apply(const Stencil& s) const {
    // Row sums first: for each of the 4 z rows collect value/d1/d2 along r.
    double g0[4], g1[4], g2[4];
    for (int a = 0; a < 4; ++a) {
        double v0 = 0, v1 = 0, v2 = 0;
        for (int b = 0; b < 4; ++b) {
            const double c = coeff_(s.i0 + a, s.j0 + b);
            v0 += s.wr[0][b] * c;
            v1 += s.wr[1][b] * c;
            v2 += s.wr[2][b] * c;
        }
        g0[a] = v0;
        g1[a] = v1;
        g2[a] = v2;
    }
    Jet2 out;
    for (int a = 0; a < 4; ++a) {
        out.v += s.wz[0][a] * g0[a];
        out.z += s.wz[1][a] * g0[a];
        out.zz += s.wz[2][a] * g0[a];
        out.r += s.wz[0][a] * g1[a];
        out.rz += s.wz[1][a] * g1[a];
        out.rr += s.wz[0][a] * g2[a];
    }
    return out;
}

}  // namespace rydtrap::field
