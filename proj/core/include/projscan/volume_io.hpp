#pragma once

#include <string>

#include "projscan/volume.hpp"

namespace projscan {

enum class VolumeFormat { nifti1, raw };

/// Reads a volume and validates finiteness.
///
/// nifti1 is a strict read-only subset: single-file `.nii`, 348-byte
/// header, little-endian, datatype float32; vox_offset is honored and
/// scl_slope/scl_inter are applied when the slope is nonzero.
/// raw is a little-endian float32 payload next to a JSON sidecar
/// {"dims":[nx,ny,nz],"dtype":"f32","order":"x-fastest"} at the same
/// path with a .json extension.
Volume3D load_volume(const std::string& path, VolumeFormat format);

/// Dispatches on extension: .nii -> nifti1, .raw -> raw.
Volume3D load_volume(const std::string& path);

void save_volume(const Volume3D& vol, const std::string& path, VolumeFormat format);
void save_volume(const Volume3D& vol, const std::string& path);

/// Sidecar path for a raw volume ("dir/subj.raw" -> "dir/subj.json").
std::string sidecar_path(const std::string& raw_path);

} // namespace projscan
