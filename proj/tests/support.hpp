#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "rydtrap/basis_field.hpp"
#include "rydtrap/field_model.hpp"

namespace rydtrap::testing {

/// Scratch directory under the build tree, emptied on first use per name.
std::filesystem::path scratch_dir(const std::string& name);

/// Reference geometry fields, solved once per process (cached on disk).
std::shared_ptr<const field::BasisFieldSet> reference_basis();

/// Reference drives with eta calibrated and the hexapole-equivalent U1.
field::DriveWaveforms reference_drives();

std::shared_ptr<const field::FieldModel> reference_field();

}  // namespace rydtrap::testing
