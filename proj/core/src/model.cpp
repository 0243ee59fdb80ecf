#include "projscan/model.hpp"

#include <algorithm>

#include "projscan/errors.hpp"

namespace projscan {

std::string to_string(DropoutPlacement placement) {
  return placement == DropoutPlacement::between_conv ? "between-conv"
                                                     : "between-dense";
}

DropoutPlacement dropout_placement_from_string(const std::string& s) {
  if (s == "between-conv") return DropoutPlacement::between_conv;
  if (s == "between-dense") return DropoutPlacement::between_dense;
  throw ConfigError("unknown dropout placement: " + s);
}

int stack_filters(const ModelConfig& cfg, int layer) {
  if (layer < 1) throw ParameterError("conv layer index is 1-based");
  long long f = cfg.first_filters;
  for (int i = 0; i < (layer - 1) / 2 && f < cfg.max_filters; ++i) f *= 2;
  return static_cast<int>(std::min<long long>(f, cfg.max_filters));
}

std::array<int, 3> plane_channel_counts(const ChannelSelection& sel) {
  std::array<int, 3> counts{0, 0, 0};
  for (const ChannelKey& key : sel.keys())
    ++counts[static_cast<std::size_t>(key.plane)];
  return counts;
}

namespace {

std::string two_digits(int i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

std::vector<std::unique_ptr<Layer>> build_stack(const ModelConfig& cfg,
                                                const std::string& prefix,
                                                int in_channels) {
  std::vector<std::unique_ptr<Layer>> stack;
  for (int i = 1; i <= cfg.conv_layers; ++i) {
    const int in = i == 1 ? in_channels : stack_filters(cfg, i - 1);
    const int out = stack_filters(cfg, i);
    const bool downsample = i % 2 == 0; // also where BN sits
    stack.push_back(std::make_unique<Conv2d>(prefix + ".conv" + two_digits(i),
                                             in, out, 3, downsample ? 2 : 1, 1,
                                             /*bias=*/!downsample));
    if (downsample)
      stack.push_back(
          std::make_unique<BatchNorm2d>(prefix + ".bn" + two_digits(i), out));
    stack.push_back(std::make_unique<ReLU>());
    if (downsample && cfg.placement == DropoutPlacement::between_conv)
      stack.push_back(std::make_unique<Dropout>(cfg.dropout_p));
  }
  stack.push_back(std::make_unique<GlobalAvgPool>());
  return stack;
}

std::vector<std::unique_ptr<Layer>> clone_stack(
    const std::vector<std::unique_ptr<Layer>>& stack) {
  std::vector<std::unique_ptr<Layer>> out;
  out.reserve(stack.size());
  for (const auto& layer : stack) out.push_back(layer->clone_shared());
  return out;
}

void append_unique(std::vector<ParamPtr>& into, std::vector<ParamPtr> more) {
  for (auto& p : more)
    if (std::find(into.begin(), into.end(), p) == into.end())
      into.push_back(std::move(p));
}

} // namespace

Model build_model(const ModelConfig& cfg,
                  const std::array<PlaneImageDims, 3>& dims) {
  if (cfg.conv_layers < 1 || cfg.first_filters < 1 ||
      cfg.max_filters < cfg.first_filters || cfg.head_width < 1)
    throw ConfigError("bad model config: layers/filters/head out of range");
  if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0)
    throw ConfigError("dropout probability must be in [0,1)");
  for (const Plane plane : kCanonicalPlanes)
    if (cfg.channels_per_plane[static_cast<std::size_t>(plane)] < 0)
      throw ConfigError(std::string("negative channel count for plane ") +
                        to_string(plane));
  if (cfg.iso &&
      (cfg.channels_per_plane[0] != cfg.channels_per_plane[1] ||
       cfg.channels_per_plane[0] != cfg.channels_per_plane[2]))
    throw ConfigError("iso requires equal channel counts on every plane");

  // every downsampling stage except possibly the last must see >= 2 px
  const int stages = cfg.conv_layers / 2;
  const int min_side = stages > 0 ? 1 << (stages - 1) : 1;
  for (const Plane plane : kCanonicalPlanes) {
    const auto p = static_cast<std::size_t>(plane);
    if (cfg.channels_per_plane[p] == 0) continue;
    const PlaneImageDims d = dims[p];
    if (d.h < min_side || d.w < min_side)
      throw ConfigError(std::string("plane ") + to_string(plane) + " images " +
                        std::to_string(d.h) + "x" + std::to_string(d.w) +
                        " too small for " + std::to_string(stages) +
                        " downsampling stages (min side " +
                        std::to_string(min_side) + ")");
  }

  Model m;
  m.cfg_ = cfg;
  m.dims_ = dims;
  m.feat_w_ = stack_filters(cfg, cfg.conv_layers);

  int active = 0;
  int first_active = -1;
  for (const Plane plane : kCanonicalPlanes) {
    const auto p = static_cast<std::size_t>(plane);
    if (cfg.channels_per_plane[p] == 0) continue;
    ++active;
    if (first_active < 0) first_active = static_cast<int>(p);
    if (cfg.iso) {
      if (static_cast<int>(p) == first_active)
        m.stacks_[p] = build_stack(cfg, "shared", cfg.channels_per_plane[p]);
      else
        m.stacks_[p] =
            clone_stack(m.stacks_[static_cast<std::size_t>(first_active)]);
    } else {
      m.stacks_[p] =
          build_stack(cfg, to_string(plane), cfg.channels_per_plane[p]);
    }
  }
  m.concat_w_ = active * m.feat_w_;

  if (cfg.placement == DropoutPlacement::between_dense)
    m.head_.push_back(std::make_unique<Dropout>(cfg.dropout_p));
  m.head_.push_back(
      std::make_unique<Dense>("head.dense1", m.concat_w_, cfg.head_width));
  m.head_.push_back(std::make_unique<ReLU>());
  if (cfg.placement == DropoutPlacement::between_dense)
    m.head_.push_back(std::make_unique<Dropout>(cfg.dropout_p));
  m.head_.push_back(std::make_unique<Dense>("head.dense2", cfg.head_width, 1));
  return m;
}

Tensor Model::forward_features(const PlaneBatch& batch, Mode mode, Rng* rng) {
  for (const Plane plane : kCanonicalPlanes) {
    const auto p = static_cast<std::size_t>(plane);
    const Tensor& x = batch.planes[p];
    if (x.rank() != 4)
      throw ShapeError(std::string("plane ") + to_string(plane) +
                       ": batch tensor must be rank 4, got " + x.shape_str());
    if (x.dim(1) != cfg_.channels_per_plane[p])
      throw ShapeError(std::string("plane ") + to_string(plane) + ": expected " +
                       std::to_string(cfg_.channels_per_plane[p]) +
                       " channels, got " + x.shape_str());
    if (x.dim(0) != batch.planes[0].dim(0))
      throw ShapeError(std::string("plane ") + to_string(plane) +
                       ": batch size differs across planes");
    if (cfg_.channels_per_plane[p] > 0 &&
        (x.dim(2) != dims_[p].h || x.dim(3) != dims_[p].w))
      throw ShapeError(std::string("plane ") + to_string(plane) + ": expected " +
                       std::to_string(dims_[p].h) + "x" +
                       std::to_string(dims_[p].w) + " images, got " +
                       x.shape_str());
  }

  const int n = batch.planes[0].dim(0);
  batch_n_ = n;
  Tensor cat({n, concat_w_});
  int offset = 0;
  for (const Plane plane : kCanonicalPlanes) {
    const auto p = static_cast<std::size_t>(plane);
    if (cfg_.channels_per_plane[p] == 0) continue;
    Tensor h = batch.planes[p];
    for (auto& layer : stacks_[p]) h = layer->forward(h, mode, rng);
    for (int i = 0; i < n; ++i)
      std::copy_n(h.data().data() + static_cast<std::size_t>(i) * feat_w_,
                  feat_w_,
                  cat.data().data() + static_cast<std::size_t>(i) * concat_w_ +
                      offset);
    offset += feat_w_;
  }
  return cat;
}

Tensor Model::forward(const PlaneBatch& batch, Mode mode, Rng* rng) {
  Tensor h = forward_features(batch, mode, rng);
  for (auto& layer : head_) h = layer->forward(h, mode, rng);
  return h;
}

std::array<Tensor, 3> Model::backward(const Tensor& dpred) {
  Tensor d = dpred;
  for (auto it = head_.rbegin(); it != head_.rend(); ++it)
    d = (*it)->backward(d);

  const int n = batch_n_;
  std::array<Tensor, 3> grads;
  int offset = concat_w_;
  // reverse canonical order keeps each split aligned with forward
  for (int pi = 2; pi >= 0; --pi) {
    const auto p = static_cast<std::size_t>(pi);
    if (cfg_.channels_per_plane[p] == 0) {
      grads[p] = Tensor({n, 0, 1, 1});
      continue;
    }
    offset -= feat_w_;
    Tensor ds({n, feat_w_});
    for (int i = 0; i < n; ++i)
      std::copy_n(d.data().data() + static_cast<std::size_t>(i) * concat_w_ +
                      offset,
                  feat_w_,
                  ds.data().data() + static_cast<std::size_t>(i) * feat_w_);
    for (auto it = stacks_[p].rbegin(); it != stacks_[p].rend(); ++it)
      ds = (*it)->backward(ds);
    grads[p] = std::move(ds);
  }
  return grads;
}

std::vector<ParamPtr> Model::params() const {
  std::vector<ParamPtr> out;
  for (const auto& stack : stacks_)
    for (const auto& layer : stack) append_unique(out, layer->params());
  for (const auto& layer : head_) append_unique(out, layer->params());
  return out;
}

std::vector<ParamPtr> Model::state() const {
  std::vector<ParamPtr> out;
  for (const auto& stack : stacks_)
    for (const auto& layer : stack) append_unique(out, layer->state());
  for (const auto& layer : head_) append_unique(out, layer->state());
  return out;
}

std::size_t Model::param_count() const {
  std::size_t count = 0;
  for (const auto& p : params()) count += p->value.numel();
  return count;
}

void Model::init_params(Rng& rng) {
  bool stack_done = false;
  for (const auto& stack : stacks_) {
    if (stack.empty()) continue;
    if (cfg_.iso && stack_done) continue; // clones share the drawn weights
    for (const auto& layer : stack) layer->init_params(rng);
    stack_done = true;
  }
  for (const auto& layer : head_) layer->init_params(rng);
}

void Model::set_iso() {
  if (cfg_.iso) return;
  if (cfg_.channels_per_plane[0] != cfg_.channels_per_plane[1] ||
      cfg_.channels_per_plane[0] != cfg_.channels_per_plane[2])
    throw ConfigError("iso requires equal channel counts on every plane");
  cfg_.iso = true;

  int first_active = -1;
  for (int p = 0; p < 3; ++p)
    if (cfg_.channels_per_plane[static_cast<std::size_t>(p)] > 0) {
      first_active = p;
      break;
    }
  if (first_active < 0) return; // no stacks to share

  auto& owner = stacks_[static_cast<std::size_t>(first_active)];
  for (const auto& layer : owner) {
    for (const auto& p : layer->params())
      p->name = "shared" + p->name.substr(p->name.find('.'));
    for (const auto& p : layer->state())
      p->name = "shared" + p->name.substr(p->name.find('.'));
  }
  for (int p = 0; p < 3; ++p)
    if (p != first_active &&
        cfg_.channels_per_plane[static_cast<std::size_t>(p)] > 0)
      stacks_[static_cast<std::size_t>(p)] = clone_stack(owner);
}

std::vector<std::pair<std::string, LayerSpec>> Model::layer_specs() const {
  std::vector<std::pair<std::string, LayerSpec>> out;
  for (const Plane plane : kCanonicalPlanes) {
    const auto p = static_cast<std::size_t>(plane);
    int i = 0;
    for (const auto& layer : stacks_[p])
      out.emplace_back(std::string(to_string(plane)) + "[" + std::to_string(i++) + "]",
                       layer->spec());
  }
  int i = 0;
  for (const auto& layer : head_)
    out.emplace_back("head[" + std::to_string(i++) + "]", layer->spec());
  return out;
}

} // namespace projscan
