#include "support.hpp"

#include <mutex>

#ifndef RYDTRAP_TEST_SCRATCH
#define RYDTRAP_TEST_SCRATCH "test-scratch"
#endif

namespace rydtrap::testing {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::path(RYDTRAP_TEST_SCRATCH) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::shared_ptr<const field::BasisFieldSet> reference_basis() {
    static std::once_flag once;
    static std::shared_ptr<const field::BasisFieldSet> basis;
    std::call_once(once, [] {
        fs::path dir = fs::path(RYDTRAP_TEST_SCRATCH) / "shared";
        fs::create_directories(dir);
        basis = std::make_shared<const field::BasisFieldSet>(
            field::load_or_solve_basis(field::reference_geometry(), dir / "reference_basis.bin", true));
    });
    return basis;
}

field::DriveWaveforms reference_drives() {
    static const field::DriveWaveforms d = [] {
        field::DriveWaveforms w;
        w.eta = field::calibrate_eta(*reference_basis());
        w.u1_scale = field::hexapole_u1_scale(*reference_basis(), w.eta);
        return w;
    }();
    return d;
}

std::shared_ptr<const field::FieldModel> reference_field() {
    static const auto f = field::make_trap_field(reference_basis(), reference_drives());
    return f;
}

}  // namespace rydtrap::testing
