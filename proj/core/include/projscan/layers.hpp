#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "projscan/rng.hpp"
#include "projscan/tensor.hpp"

namespace projscan {

enum class Mode { train, eval };

/// Named learnable (or persistent) tensor. Layers share parameters by
/// holding the same Param instance; gradient accumulation (+=) into the
/// shared grad buffer realizes the weight-sharing contract.
struct Param {
  std::string name;
  Tensor value;
};
using ParamPtr = std::shared_ptr<Param>;

/// Serializable layer description, enough to rebuild the layer from a
/// checkpoint header. attrs hold numeric settings (filters, stride, p).
struct LayerSpec {
  std::string kind;
  std::map<std::string, double> attrs;
};

/// One differentiable operation. forward caches whatever backward needs;
/// backward consumes the cache (StateError when absent), accumulates
/// parameter gradients, and returns the input gradient. Train-mode
/// randomness comes only from the rng argument.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;

  /// Learnable parameters, Adam-updated and checkpointed.
  virtual std::vector<ParamPtr> params() { return {}; }
  /// Persistent non-learned tensors (BN running stats), checkpointed.
  virtual std::vector<ParamPtr> state() { return {}; }
  virtual LayerSpec spec() const = 0;

  /// Seeds learnable parameters (Glorot-uniform weights, zero biases,
  /// unit gamma). Draws from rng in a fixed order.
  virtual void init_params(Rng&) {}

  /// New instance sharing this layer's Param tensors but owning its own
  /// forward cache, for weight-tied stacks.
  virtual std::unique_ptr<Layer> clone_shared() const = 0;
};

/// 3×3-default 2D cross-correlation, NCHW. Output spatial dims are
/// floor((H + 2·pad − k)/stride) + 1. When followed by a BatchNorm the
/// bias is disabled (BN's beta subsumes it).
class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel = 3,
         int stride = 1, int pad = 1, bool bias = true);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamPtr> params() override;
  LayerSpec spec() const override;
  void init_params(Rng& rng) override;
  std::unique_ptr<Layer> clone_shared() const override;

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

 private:
  Conv2d(const Conv2d& other); // shares params, drops cache
  std::string name_;
  int in_c_, out_c_, k_, stride_, pad_;
  ParamPtr w_, b_; // w (out,in,k,k); b (out) or null
  Tensor x_cache_;
  bool has_cache_ = false;
};

/// Per-channel batch normalization over (N,H,W). Train mode normalizes
/// by batch statistics (population variance, eps 1e-5) and blends them
/// into the running stats with momentum 0.1; eval mode uses the running
/// stats, making inference deterministic and batch-independent.
class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(std::string name, int channels, double momentum = 0.1,
                       double eps = 1e-5);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamPtr> params() override;
  std::vector<ParamPtr> state() override;
  LayerSpec spec() const override;
  void init_params(Rng& rng) override;
  std::unique_ptr<Layer> clone_shared() const override;

 private:
  BatchNorm2d(const BatchNorm2d& other);
  std::string name_;
  int c_;
  double momentum_, eps_;
  ParamPtr gamma_, beta_;
  ParamPtr running_mean_, running_var_;
  Tensor xhat_cache_;
  std::vector<float> inv_std_cache_;
  bool has_cache_ = false;
};

class ReLU final : public Layer {
 public:
  ReLU() = default;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  LayerSpec spec() const override;
  std::unique_ptr<Layer> clone_shared() const override;

 private:
  std::vector<bool> mask_;
  std::vector<int> shape_;
  bool has_cache_ = false;
};

/// Inverted dropout: train mode zeroes each element with probability p
/// and scales survivors by 1/(1-p); eval mode is the identity. Train
/// mode requires an rng (StateError otherwise).
class Dropout final : public Layer {
 public:
  explicit Dropout(double p);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  LayerSpec spec() const override;
  std::unique_ptr<Layer> clone_shared() const override;

 private:
  double p_;
  std::vector<float> scale_mask_;
  std::vector<int> shape_;
  bool has_cache_ = false;
};

/// (N,C,H,W) -> (N,C) spatial mean.
class GlobalAvgPool final : public Layer {
 public:
  GlobalAvgPool() = default;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  LayerSpec spec() const override;
  std::unique_ptr<Layer> clone_shared() const override;

 private:
  std::vector<int> shape_;
  bool has_cache_ = false;
};

/// Fully connected (N,in) -> (N,out). in_features may be zero, which
/// degenerates to a learned constant (bias broadcast).
class Dense final : public Layer {
 public:
  Dense(std::string name, int in_features, int out_features);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamPtr> params() override;
  LayerSpec spec() const override;
  void init_params(Rng& rng) override;
  std::unique_ptr<Layer> clone_shared() const override;

  ParamPtr bias() { return b_; }

 private:
  Dense(const Dense& other);
  std::string name_;
  int in_, out_;
  ParamPtr w_, b_; // w (out,in)
  Tensor x_cache_;
  bool has_cache_ = false;
};

/// Glorot-uniform fill: limit sqrt(6/(fan_in+fan_out)).
void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng);

/// Rebuilds a layer from its serialized spec (checkpoint loading).
std::unique_ptr<Layer> layer_from_spec(const LayerSpec& spec,
                                       const std::string& name);

} // namespace projscan
