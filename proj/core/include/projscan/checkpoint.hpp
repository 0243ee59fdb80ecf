#pragma once

#include <string>

#include "projscan/model.hpp"
#include "projscan/projection.hpp"

namespace projscan {

/// Weight snapshot format, magic "PSCK":
///   bytes 0-3   "PSCK"
///   byte  4     version (1)
///   bytes 5-8   u32 header length, little-endian
///   header      JSON: model config, input dims, normalization, layer
///               specs and a tensor table (name, shape, payload offset)
///   payload     row-major float32 tensors, little-endian
/// Save/load round trips are bit-exact; load rebuilds the architecture
/// from the header alone and verifies it against the stored specs.
void save_checkpoint(const std::string& path, const Model& model,
                     const NormalizationParams& normalization);

struct LoadedCheckpoint {
  Model model;
  NormalizationParams normalization;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace projscan
