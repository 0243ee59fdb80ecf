#pragma once

#include <string>
#include <vector>

#include "projscan/image.hpp"
#include "projscan/volume.hpp"

namespace projscan {

/// Per-plane slice statistics a projection channel can carry. eigen
/// denotes one principal-direction slice and needs a 1-based component.
enum class Statistic { mean = 0, std = 1, skew = 2, kurt = 3, eigen = 4 };

const char* to_string(Statistic stat);
Statistic statistic_from_string(const std::string& name);

struct ChannelKey {
  Plane plane = Plane::coronal;
  Statistic stat = Statistic::mean;
  int component = 0; // eigen component, 1-based; 0 for moment statistics

  bool operator==(const ChannelKey&) const = default;
  /// Canonical order: plane-major (coronal, axial, sagittal), then
  /// statistic (mean, std, skew, kurt, eigen_1..k).
  bool operator<(const ChannelKey& other) const;
  std::string str() const; // e.g. "axial-std", "coronal-eigen2"
};

ChannelKey channel_key_from_string(const std::string& token);

struct Channel {
  ChannelKey key;
  Image2D image;
  float min = 0.0f; // raw value range of this image, kept for
  float max = 0.0f; // downstream min-max normalization
};

struct ProjectionSet {
  std::string subject_id;
  std::vector<Channel> channels; // canonical order

  const Channel* find(const ChannelKey& key) const;
};

/// Per-channel affine rescale to [0,1], fit on training data and kept
/// with the trained weights so evaluation reuses the exact same map. A
/// collapsed range (hi == lo) maps the whole channel to 0.
struct NormalizationParams {
  std::vector<ChannelKey> keys; // canonical order
  std::vector<float> lo, hi;    // parallel to keys
};

/// Duplicate-free channel set, always held in canonical order.
class ChannelSelection {
 public:
  ChannelSelection() = default;
  explicit ChannelSelection(std::vector<ChannelKey> keys);

  /// Comma-separated "plane-statistic" tokens ("coronal-mean",
  /// "axial-eigen2", ...). The shorthand "six" expands to mean+std on
  /// all planes, "moments" to all four moments on all planes.
  static ChannelSelection parse(const std::string& text);
  static ChannelSelection six();      // 3 planes × (mean, std)
  static ChannelSelection moments();  // 3 planes × (mean, std, skew, kurt)

  const std::vector<ChannelKey>& keys() const { return keys_; }
  bool empty() const { return keys_.empty(); }
  std::size_t size() const { return keys_.size(); }
  bool contains(const ChannelKey& key) const;
  int max_eigen_component(Plane plane) const;
  std::string str() const;

 private:
  std::vector<ChannelKey> keys_;
};

/// Bit i of the mask selects canonical-six channel i: plane-major,
/// mean before std (bit 0 = coronal-mean ... bit 5 = sagittal-std).
ChannelSelection selection_from_bitmask(unsigned mask);
unsigned bitmask_from_selection(const ChannelSelection& sel);

/// Projects the volume onto every requested channel. Channels come out
/// in canonical order with their raw min/max recorded. The selection
/// must be nonempty (ParameterError) and the statistics must be finite
/// (ValidationError otherwise).
ProjectionSet build_projection_set(const Volume3D& vol,
                                   const ChannelSelection& spec,
                                   const std::string& subject_id);

/// Container on disk: binary channel file plus a JSON sidecar (same
/// path, .json) carrying subject id and per-channel value ranges.
/// Binary layout, little-endian: "PJSN", version byte 1, u16 channel
/// count, u32 h and w of channel 0, then one descriptor per channel
/// (u8 plane, u8 statistic, u16 component, u32 h, u32 w), then the
/// row-major float32 payloads in channel order. Round-trips bit-exact.
void save_projection_set(const ProjectionSet& ps, const std::string& path);
ProjectionSet load_projection_set(const std::string& path);

} // namespace projscan
