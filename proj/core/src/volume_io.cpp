#include "projscan/volume_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "projscan/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "projscan volume I/O assumes a little-endian host");

namespace projscan {

namespace {

// NIfTI-1 header; field offsets match the on-disk layout without packing
// directives because every member sits at its natural alignment.
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t kNiftiFloat32 = 16;

std::uintmax_t file_size_or_throw(const std::string& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw FormatError("cannot stat " + path + ": " + ec.message());
  return size;
}

Volume3D load_nifti(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);

  Nifti1Header hdr{};
  in.read(reinterpret_cast<char*>(&hdr), sizeof(hdr));
  if (!in) throw FormatError(path + ": truncated NIfTI header");

  if (hdr.sizeof_hdr != 348) {
    int32_t swapped;
    std::memcpy(&swapped, &hdr.sizeof_hdr, sizeof(swapped));
    swapped = __builtin_bswap32(swapped);
    if (swapped == 348)
      throw FormatError(path + ": big-endian NIfTI is not supported");
    throw FormatError(path + ": not a NIfTI-1 file (sizeof_hdr = " +
                      std::to_string(hdr.sizeof_hdr) + ")");
  }
  if (std::memcmp(hdr.magic, "n+1", 3) != 0) {
    if (std::memcmp(hdr.magic, "ni1", 3) == 0)
      throw FormatError(path + ": two-file NIfTI (.hdr/.img) is not supported");
    throw FormatError(path + ": bad NIfTI magic");
  }
  if (hdr.datatype != kNiftiFloat32)
    throw FormatError(path + ": unsupported NIfTI datatype " +
                      std::to_string(hdr.datatype) + " (only float32/16 is read)");
  if (hdr.bitpix != 32)
    throw FormatError(path + ": bitpix " + std::to_string(hdr.bitpix) +
                      " does not match float32");
  if (hdr.dim[0] < 3 || hdr.dim[0] > 7)
    throw FormatError(path + ": expected a 3D volume, dim[0] = " +
                      std::to_string(hdr.dim[0]));
  for (int d = 4; d <= hdr.dim[0]; ++d)
    if (hdr.dim[d] > 1)
      throw FormatError(path + ": higher-dimensional volumes are not supported");

  const Dims3 dims{hdr.dim[1], hdr.dim[2], hdr.dim[3]};
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw FormatError(path + ": non-positive dimensions " + dims.str());

  const auto offset = static_cast<std::uintmax_t>(hdr.vox_offset);
  if (hdr.vox_offset < 348.0f)
    throw FormatError(path + ": vox_offset " + std::to_string(hdr.vox_offset) +
                      " overlaps the header");
  const std::size_t count = dims.count();
  if (file_size_or_throw(path) < offset + count * sizeof(float))
    throw FormatError(path + ": payload truncated, dims " + dims.str() +
                      " need " + std::to_string(count * sizeof(float)) +
                      " bytes past offset " + std::to_string(offset));

  std::vector<float> data(count);
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw FormatError(path + ": payload read failed");

  const float slope = hdr.scl_slope;
  const float inter = hdr.scl_inter;
  if (slope != 0.0f && !(slope == 1.0f && inter == 0.0f)) {
    for (auto& v : data) v = v * slope + inter;
  }

  Volume3D vol(dims, std::move(data));
  validate_volume(vol);
  return vol;
}

void save_nifti(const Volume3D& vol, const std::string& path) {
  Nifti1Header hdr{};
  hdr.sizeof_hdr = 348;
  hdr.regular = 'r';
  hdr.dim[0] = 3;
  hdr.dim[1] = static_cast<int16_t>(vol.dims().nx);
  hdr.dim[2] = static_cast<int16_t>(vol.dims().ny);
  hdr.dim[3] = static_cast<int16_t>(vol.dims().nz);
  for (int d = 4; d < 8; ++d) hdr.dim[d] = 1;
  hdr.datatype = kNiftiFloat32;
  hdr.bitpix = 32;
  for (auto& p : hdr.pixdim) p = 1.0f;
  hdr.vox_offset = 352.0f;
  hdr.scl_slope = 0.0f; // stored values are final; reader applies no scaling
  hdr.xyzt_units = 2;   // mm
  std::memcpy(hdr.descrip, "projscan", 8);
  std::memcpy(hdr.magic, "n+1", 4);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
  const char ext[4] = {0, 0, 0, 0}; // no header extensions
  out.write(ext, 4);
  out.write(reinterpret_cast<const char*>(vol.data().data()),
            static_cast<std::streamsize>(vol.data().size() * sizeof(float)));
  if (!out) throw FormatError("write failed for " + path);
}

Volume3D load_raw(const std::string& path) {
  const std::string meta_path = sidecar_path(path);
  std::ifstream meta(meta_path);
  if (!meta) throw FormatError("missing raw sidecar " + meta_path);
  nlohmann::json j;
  try {
    meta >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path + ": invalid JSON: " + e.what());
  }
  if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3)
    throw FormatError(meta_path + ": sidecar needs \"dims\": [nx,ny,nz]");
  if (j.value("dtype", "") != "f32")
    throw FormatError(meta_path + ": unsupported dtype \"" +
                      j.value("dtype", "") + "\" (only \"f32\")");
  if (j.value("order", "") != "x-fastest")
    throw FormatError(meta_path + ": unsupported order \"" +
                      j.value("order", "") + "\" (only \"x-fastest\")");

  const Dims3 dims{j["dims"][0].get<int>(), j["dims"][1].get<int>(),
                   j["dims"][2].get<int>()};
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw FormatError(meta_path + ": non-positive dims " + dims.str());

  const std::size_t count = dims.count();
  if (file_size_or_throw(path) != count * sizeof(float))
    throw FormatError(path + ": payload is " +
                      std::to_string(file_size_or_throw(path)) + " bytes, dims " +
                      dims.str() + " require " +
                      std::to_string(count * sizeof(float)));

  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw FormatError(path + ": payload read failed");

  Volume3D vol(dims, std::move(data));
  validate_volume(vol);
  return vol;
}

void save_raw(const Volume3D& vol, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(vol.data().data()),
            static_cast<std::streamsize>(vol.data().size() * sizeof(float)));
  if (!out) throw FormatError("write failed for " + path);

  nlohmann::json j;
  j["dims"] = {vol.dims().nx, vol.dims().ny, vol.dims().nz};
  j["dtype"] = "f32";
  j["order"] = "x-fastest";
  std::ofstream meta(sidecar_path(path), std::ios::trunc);
  if (!meta) throw FormatError("cannot create " + sidecar_path(path));
  meta << j.dump(2) << "\n";
}

VolumeFormat format_from_extension(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".nii") return VolumeFormat::nifti1;
  if (ext == ".raw") return VolumeFormat::raw;
  throw FormatError(path + ": unknown volume extension \"" + ext +
                    "\" (use .nii or .raw)");
}

} // namespace

std::string sidecar_path(const std::string& raw_path) {
  return std::filesystem::path(raw_path).replace_extension(".json").string();
}

Volume3D load_volume(const std::string& path, VolumeFormat format) {
  switch (format) {
    case VolumeFormat::nifti1: return load_nifti(path);
    case VolumeFormat::raw: return load_raw(path);
  }
  throw ParameterError("unknown volume format");
}

Volume3D load_volume(const std::string& path) {
  return load_volume(path, format_from_extension(path));
}

void save_volume(const Volume3D& vol, const std::string& path, VolumeFormat format) {
  switch (format) {
    case VolumeFormat::nifti1: save_nifti(vol, path); return;
    case VolumeFormat::raw: save_raw(vol, path); return;
  }
  throw ParameterError("unknown volume format");
}

void save_volume(const Volume3D& vol, const std::string& path) {
  save_volume(vol, path, format_from_extension(path));
}

} // namespace projscan
