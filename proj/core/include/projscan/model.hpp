#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "projscan/layers.hpp"
#include "projscan/projection.hpp"
#include "projscan/volume.hpp"

namespace projscan {

enum class DropoutPlacement { between_conv, between_dense };
std::string to_string(DropoutPlacement placement);
DropoutPlacement dropout_placement_from_string(const std::string& s);

/// Architecture knobs for the three-stack regression network. Each
/// canonical plane feeds its own conv stack (channels_per_plane entries
/// of 0 switch a stack off entirely, as the channel-subset sweep
/// requires); stacks end in global average pooling, their feature
/// vectors are concatenated in canonical plane order, and a two-dense
/// head reduces to a single linear output node.
struct ModelConfig {
  std::array<int, 3> channels_per_plane{2, 2, 2}; // indexed by int(Plane)
  int conv_layers = 13;
  int first_filters = 4;
  int max_filters = 256;
  int head_width = 288;
  DropoutPlacement placement = DropoutPlacement::between_conv;
  double dropout_p = 0.2;
  bool iso = false;
};

/// Filter count of 1-based conv layer i: first_filters doubled before
/// every second layer, capped at max_filters. With the defaults the
/// schedule is 4,4,8,8,16,16,32,32,64,64,128,128,256.
int stack_filters(const ModelConfig& cfg, int layer);

/// Channel counts per plane implied by a channel selection.
std::array<int, 3> plane_channel_counts(const ChannelSelection& sel);

/// One training/eval batch: a rank-4 (batch, channels, h, w) tensor per
/// canonical plane, indexed by int(Plane). Inactive planes still carry
/// a tensor, with zero channels, so the batch dimension is always
/// recoverable.
struct PlaneBatch {
  std::array<Tensor, 3> planes;
};

/// The assembled network. Stride-2 convolutions sit at every even
/// layer, so a 13-layer stack downsamples six times; inputs must keep
/// every stage at least 2 px wide except the last (min side 32 for the
/// default depth). Convs feeding a BatchNorm carry no bias (beta
/// subsumes it); BN follows every even conv, then ReLU, then dropout
/// when placement is between_conv. The iso variant runs all planes
/// through one shared parameter set: its grads accumulate the sum of
/// the three stack contributions, and the shared BN running stats see
/// every plane's batches.
class Model {
 public:
  Tensor forward(const PlaneBatch& batch, Mode mode, Rng* rng);
  /// Per-plane input gradients, (batch, channels, h, w) each.
  std::array<Tensor, 3> backward(const Tensor& dpred);
  /// The concatenated per-stack feature vector, (batch, feature_width).
  Tensor forward_features(const PlaneBatch& batch, Mode mode, Rng* rng);

  /// Learnable parameters, deduplicated (iso stacks share), in a fixed
  /// deterministic order.
  std::vector<ParamPtr> params() const;
  /// Persistent non-learned state (BN running stats), deduplicated.
  std::vector<ParamPtr> state() const;
  std::size_t param_count() const;

  void init_params(Rng& rng);

  /// Converts to the weight-shared variant in place: all planes must
  /// have equal channel counts (ConfigError otherwise). Stack 0's
  /// parameters become the shared set, renamed under "shared.".
  void set_iso();

  const ModelConfig& config() const { return cfg_; }
  const std::array<PlaneImageDims, 3>& input_dims() const { return dims_; }
  int feature_width() const { return concat_w_; }

  /// Layer descriptions (name, spec) in forward order, for checkpoint
  /// headers and integrity checks.
  std::vector<std::pair<std::string, LayerSpec>> layer_specs() const;

 private:
  friend Model build_model(const ModelConfig& cfg,
                           const std::array<PlaneImageDims, 3>& dims);
  Model() = default;

  ModelConfig cfg_;
  std::array<PlaneImageDims, 3> dims_{};
  std::array<std::vector<std::unique_ptr<Layer>>, 3> stacks_;
  std::vector<std::unique_ptr<Layer>> head_;
  int concat_w_ = 0;
  int feat_w_ = 0; // per-stack feature width
  int batch_n_ = 0;
};

/// Validates the config against the per-plane image dims and assembles
/// the network. Planes with zero channels contribute no stack; with no
/// active plane the head degenerates to a trainable constant.
Model build_model(const ModelConfig& cfg,
                  const std::array<PlaneImageDims, 3>& dims);

} // namespace projscan
