#include <doctest.h>

#include <cmath>
#include <fstream>

#include "rydtrap/basis_field.hpp"
#include "rydtrap/errors.hpp"
#include "rydtrap/field_model.hpp"
#include "rydtrap/geometry.hpp"
#include "rydtrap/units.hpp"
#include "support.hpp"

using namespace rydtrap;
using namespace rydtrap::field;
using Eigen::Vector3d;

TEST_SUITE("geometry_field") {

TEST_CASE("reference geometry is valid and survives a JSON round trip") {
    auto g = reference_geometry();
    CHECK_NOTHROW(g.validate());
    auto back = geometry_from_json(to_json(g));
    CHECK(geometry_checksum(back) == geometry_checksum(g));
    CHECK(to_json(back) == to_json(g));
}

TEST_CASE("invalid geometries are rejected") {
    auto g = reference_geometry();
    SUBCASE("overlapping conductors") {
        g.electrodes[1].rects[0].r_min = 0.0;
        CHECK_THROWS_AS(g.validate(), GeometryError);
    }
    SUBCASE("unknown label in a group") {
        g.groups[0].weights["nowhere"] = 1.0;
        CHECK_THROWS_AS(g.validate(), GeometryError);
    }
    SUBCASE("broken mirror symmetry") {
        g.electrodes[0].rects[0].z_max += 20e-6;
        CHECK_THROWS_AS(g.validate(), GeometryError);
    }
    SUBCASE("unknown JSON key") {
        auto j = to_json(g);
        j["colour"] = "blue";
        CHECK_THROWS_AS(geometry_from_json(j), GeometryError);
    }
}

TEST_CASE("parallel plates give the uniform field V / gap") {
    // Oracle: ideal capacitor, plates at +1 V and -1 V, 1 mm apart.
    const double gap = 1e-3;
    auto b = std::make_shared<const BasisFieldSet>(solve_basis_fields(parallel_plate_geometry(gap, 5e-3)));
    DriveWaveforms d;
    d.U0 = 1.0;
    d.U1 = d.U2 = 0.0;
    std::vector<Channel> ch{{"plates", 1.0, 0.0}};
    MeshFieldModel m(b, ch, 0.0);
    for (double z : {-200e-6, 0.0, 150e-6}) {
        auto s = m.sample(Vector3d(100e-6, 0, z), 0.0);
        CHECK(s.E.z() == doctest::Approx(-2.0 / gap).epsilon(2e-3));
        CHECK(std::abs(s.E.x()) < 1e-3 * 2.0 / gap);
    }
    CHECK(b->fields[0].residual < 1e-8);
}

TEST_CASE("exact hexapole electrodes reproduce the hexapole harmonic") {
    // phi = (z^3 - 3/2 z r^2) / r0^3 between caps at +-1 V.
    const double r0 = 0.5e-3;
    auto b = solve_basis_fields(hexapole_geometry(r0));
    const auto& f = b.fields[0];
    double worst = 0.0, ref = 0.0;
    const double R = r0 / 2;
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 30; ++j) {
            double r = R * j / 30.0, z = -R + 2 * R * i / 60.0;
            if (r * r + z * z > R * R) continue;
            double an = (z * z * z - 1.5 * z * r * r) / (r0 * r0 * r0);
            worst = std::max(worst, std::abs(f.spline(r, z).v - an));
            ref = std::max(ref, std::abs(an));
        }
    CHECK(worst / ref < 0.01);
}

TEST_CASE("reference trap: central field, eta null and symmetry") {
    auto b = testing::reference_basis();
    auto d = testing::reference_drives();
    auto f = testing::reference_field();
    const Vector3d O = Vector3d::Zero();

    CHECK(f->field(O, 0.0).norm() == doctest::Approx(400.0).epsilon(0.02));
    CHECK(d.eta == doctest::Approx(4.6428).epsilon(1e-3));  // frozen from the calibration

    SUBCASE("eta null: |E(O, t)| constant over one drive period") {
        const double T = rydtrap::units::two_pi / d.omega1;
        const double E0 = f->field(O, 0.0).norm();
        for (int k = 1; k < 16; ++k) CHECK(std::abs(f->field(O, T * k / 16).norm() - E0) < 1e-9 * E0);
    }
    SUBCASE("linearity in the drives") {
        auto f2 = make_trap_field(b, d.scaled(2.0));
        for (const Vector3d& x : {Vector3d(50e-6, 20e-6, -30e-6), Vector3d(-80e-6, 0, 120e-6)}) {
            for (double t : {0.0, 0.3e-3}) {
                auto a = f->sample(x, t), c = f2->sample(x, t);
                CHECK((c.E - 2.0 * a.E).norm() < 1e-9 * a.E.norm());
                CHECK((c.J - 2.0 * a.J).norm() < 1e-9 * a.J.norm());
            }
        }
    }
    SUBCASE("mirror symmetry of the static directing field") {
        DriveWaveforms s = d;
        s.U1 = s.U2 = 0.0;
        auto fs = make_trap_field(b, s);
        for (const Vector3d& x : {Vector3d(60e-6, 0, 90e-6), Vector3d(0, 150e-6, 40e-6)}) {
            Vector3d m(x.x(), x.y(), -x.z());
            auto a = fs->field(x, 0.0), c = fs->field(m, 0.0);
            // The spline coefficients are mirror symmetric only to the
            // fit tolerance, hence 1e-6 of |E| rather than rounding level.
            CHECK(std::abs(a.z() - c.z()) < 1e-6 * a.norm());
            CHECK(std::abs(a.x() + c.x()) < 1e-6 * a.norm());
            CHECK(std::abs(a.y() + c.y()) < 1e-6 * a.norm());
        }
    }
    SUBCASE("Jacobian is curl free and traceless") {
        auto s = f->sample(Vector3d(40e-6, -25e-6, 70e-6), 0.2e-3);
        CHECK((s.J - s.J.transpose()).norm() < 1e-6 * s.J.norm());
        CHECK(std::abs(s.J.trace()) < 1e-3 * s.J.norm());
    }
}

TEST_CASE("basis cache: hit, and rebuild on corruption") {
    auto dir = testing::scratch_dir("basis_cache");
    auto g = parallel_plate_geometry(1e-3, 2e-3);
    auto path = dir / "plates.bin";
    bool hit = true;
    auto first = load_or_solve_basis(g, path, true, &hit);
    CHECK_FALSE(hit);
    auto second = load_or_solve_basis(g, path, true, &hit);
    CHECK(hit);
    CHECK((second.fields[0].potential - first.fields[0].potential).abs().maxCoeff() == 0.0);

    {
        std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(200);
        io.put('\x5a');
    }
    CHECK_FALSE(load_basis_cache(path, g).has_value());
    auto third = load_or_solve_basis(g, path, true, &hit);
    CHECK_FALSE(hit);
    CHECK((third.fields[0].potential - first.fields[0].potential).abs().maxCoeff() < 1e-12);

    auto other = parallel_plate_geometry(1.2e-3, 2e-3);
    CHECK_FALSE(load_basis_cache(path, other).has_value());
}

TEST_CASE("out-of-domain evaluation throws") {
    auto f = testing::reference_field();
    CHECK_THROWS_AS(f->sample(Vector3d(0, 0, 0.52e-3), 0.0), OutOfDomainError);
    CHECK_FALSE(f->in_domain(Vector3d(0, 0, 0.52e-3)));
    CHECK(f->in_domain(Vector3d(100e-6, 0, 0)));
}

}
