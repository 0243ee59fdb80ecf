#include "projscan/layers.hpp"

#include <cmath>
#include <cstring>

#include "projscan/errors.hpp"
#include "projscan/gemm.hpp"

namespace projscan {

namespace {

void require_rank(const Tensor& x, int rank, const char* what) {
  if (x.rank() != rank)
    throw ShapeError(std::string(what) + " expects a rank-" +
                     std::to_string(rank) + " tensor, got " + x.shape_str());
}

ParamPtr make_param(std::string name, std::vector<int> shape, bool with_grad) {
  auto p = std::make_shared<Param>();
  p->name = std::move(name);
  p->value = Tensor(std::move(shape));
  if (with_grad) p->value.ensure_grad();
  return p;
}

// im2col: (C,H,W) patch extraction into (C*k*k) x (oh*ow), zero fill
// outside the image.
void im2col(const float* x, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, float* col) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t ocount = static_cast<std::size_t>(oh) * ow;
  std::size_t r = 0;
  for (int ch = 0; ch < c; ++ch) {
    const float* src = x + static_cast<std::size_t>(ch) * plane;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj, ++r) {
        float* dst = col + r * ocount;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          float* drow = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::memset(drow, 0, static_cast<std::size_t>(ow) * sizeof(float));
            continue;
          }
          const float* srow = src + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kj;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// col2im: scatter-add transpose of im2col.
void col2im(const float* col, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, float* x) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t ocount = static_cast<std::size_t>(oh) * ow;
  std::memset(x, 0, static_cast<std::size_t>(c) * plane * sizeof(float));
  std::size_t r = 0;
  for (int ch = 0; ch < c; ++ch) {
    float* dst = x + static_cast<std::size_t>(ch) * plane;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj, ++r) {
        const float* src = col + r * ocount;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          const float* srow = src + static_cast<std::size_t>(oy) * ow;
          float* drow = dst + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

} // namespace

void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  const float limit =
      fan_in + fan_out > 0
          ? std::sqrt(6.0f / static_cast<float>(fan_in + fan_out))
          : 0.0f;
  for (auto& v : t.data()) v = rng.uniform_f(-limit, limit);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel,
               int stride, int pad, bool bias)
    : name_(std::move(name)), in_c_(in_channels), out_c_(out_channels),
      k_(kernel), stride_(stride), pad_(pad) {
  if (in_c_ < 1 || out_c_ < 1)
    throw ParameterError("conv " + name_ + ": channel counts must be >= 1");
  if (k_ < 1 || stride_ < 1 || pad_ < 0)
    throw ParameterError("conv " + name_ + ": bad kernel/stride/pad");
  w_ = make_param(name_ + ".w", {out_c_, in_c_, k_, k_}, true);
  if (bias) b_ = make_param(name_ + ".b", {out_c_}, true);
}

Conv2d::Conv2d(const Conv2d& other)
    : name_(other.name_), in_c_(other.in_c_), out_c_(other.out_c_),
      k_(other.k_), stride_(other.stride_), pad_(other.pad_), w_(other.w_),
      b_(other.b_) {}

std::unique_ptr<Layer> Conv2d::clone_shared() const {
  return std::unique_ptr<Layer>(new Conv2d(*this));
}

std::vector<ParamPtr> Conv2d::params() {
  return b_ ? std::vector<ParamPtr>{w_, b_} : std::vector<ParamPtr>{w_};
}

LayerSpec Conv2d::spec() const {
  return {"conv2d",
          {{"in", in_c_},
           {"out", out_c_},
           {"kernel", k_},
           {"stride", stride_},
           {"pad", pad_},
           {"bias", b_ ? 1.0 : 0.0}}};
}

void Conv2d::init_params(Rng& rng) {
  glorot_uniform(w_->value, in_c_ * k_ * k_, out_c_ * k_ * k_, rng);
  if (b_) std::fill(b_->value.data().begin(), b_->value.data().end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x, Mode, Rng*) {
  require_rank(x, 4, "conv2d");
  if (x.dim(1) != in_c_)
    throw ShapeError("conv " + name_ + " expects " + std::to_string(in_c_) +
                     " input channels, got " + x.shape_str());
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_)
    throw ShapeError("conv " + name_ + ": input " + x.shape_str() +
                     " smaller than the kernel");
  const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
  const int krows = in_c_ * k_ * k_;
  const std::size_t ocount = static_cast<std::size_t>(oh) * ow;

  Tensor y({n, out_c_, oh, ow});
  std::vector<float> col(static_cast<std::size_t>(krows) * ocount);
  const std::size_t in_item = static_cast<std::size_t>(in_c_) * h * w;
  const std::size_t out_item = static_cast<std::size_t>(out_c_) * ocount;

  for (int i = 0; i < n; ++i) {
    im2col(x.data().data() + static_cast<std::size_t>(i) * in_item, in_c_, h, w,
           k_, stride_, pad_, oh, ow, col.data());
    float* yi = y.data().data() + static_cast<std::size_t>(i) * out_item;
    gemm_f32(out_c_, static_cast<int>(ocount), krows, w_->value.data().data(),
             col.data(), yi);
    if (b_) {
      for (int o = 0; o < out_c_; ++o) {
        const float bv = b_->value.data()[static_cast<std::size_t>(o)];
        float* row = yi + static_cast<std::size_t>(o) * ocount;
        for (std::size_t j = 0; j < ocount; ++j) row[j] += bv;
      }
    }
  }
  x_cache_ = x;
  has_cache_ = true;
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  if (!has_cache_)
    throw StateError("conv " + name_ + ": backward without cached forward");
  require_rank(dy, 4, "conv2d backward");
  const Tensor& x = x_cache_;
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int krows = in_c_ * k_ * k_;
  const std::size_t ocount = static_cast<std::size_t>(oh) * ow;
  if (dy.dim(0) != n || dy.dim(1) != out_c_)
    throw ShapeError("conv " + name_ + ": upstream grad " + dy.shape_str() +
                     " does not match output");

  Tensor dx({n, in_c_, h, w});
  std::vector<float> col(static_cast<std::size_t>(krows) * ocount);
  std::vector<float> colT(col.size());
  std::vector<float> dcol(col.size());
  std::vector<float> wT(w_->value.numel());
  transpose_f32(w_->value.data().data(), out_c_, krows, wT.data());

  const std::size_t in_item = static_cast<std::size_t>(in_c_) * h * w;
  const std::size_t out_item = static_cast<std::size_t>(out_c_) * ocount;
  auto& dw = w_->value.grad();

  for (int i = 0; i < n; ++i) {
    const float* xi = x.data().data() + static_cast<std::size_t>(i) * in_item;
    const float* dyi =
        dy.data().data() + static_cast<std::size_t>(i) * out_item;

    im2col(xi, in_c_, h, w, k_, stride_, pad_, oh, ow, col.data());
    transpose_f32(col.data(), krows, static_cast<int>(ocount), colT.data());
    gemm_f32(out_c_, krows, static_cast<int>(ocount), dyi, colT.data(),
             dw.data(), true);

    if (b_) {
      auto& db = b_->value.grad();
      for (int o = 0; o < out_c_; ++o) {
        const float* row = dyi + static_cast<std::size_t>(o) * ocount;
        double sum = 0.0;
        for (std::size_t j = 0; j < ocount; ++j) sum += row[j];
        db[static_cast<std::size_t>(o)] += static_cast<float>(sum);
      }
    }

    gemm_f32(krows, static_cast<int>(ocount), out_c_, wT.data(), dyi,
             dcol.data());
    col2im(dcol.data(), in_c_, h, w, k_, stride_, pad_, oh, ow,
           dx.data().data() + static_cast<std::size_t>(i) * in_item);
  }
  has_cache_ = false;
  return dx;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum,
                         double eps)
    : name_(std::move(name)), c_(channels), momentum_(momentum), eps_(eps) {
  if (c_ < 1) throw ParameterError("batchnorm " + name_ + ": channels >= 1");
  if (momentum_ <= 0.0 || momentum_ >= 1.0 || eps_ <= 0.0)
    throw ParameterError("batchnorm " + name_ + ": bad momentum/eps");
  gamma_ = make_param(name_ + ".gamma", {c_}, true);
  beta_ = make_param(name_ + ".beta", {c_}, true);
  running_mean_ = make_param(name_ + ".running_mean", {c_}, false);
  running_var_ = make_param(name_ + ".running_var", {c_}, false);
  std::fill(gamma_->value.data().begin(), gamma_->value.data().end(), 1.0f);
  std::fill(running_var_->value.data().begin(),
            running_var_->value.data().end(), 1.0f);
}

BatchNorm2d::BatchNorm2d(const BatchNorm2d& other)
    : name_(other.name_), c_(other.c_), momentum_(other.momentum_),
      eps_(other.eps_), gamma_(other.gamma_), beta_(other.beta_),
      running_mean_(other.running_mean_), running_var_(other.running_var_) {}

std::unique_ptr<Layer> BatchNorm2d::clone_shared() const {
  return std::unique_ptr<Layer>(new BatchNorm2d(*this));
}

std::vector<ParamPtr> BatchNorm2d::params() { return {gamma_, beta_}; }
std::vector<ParamPtr> BatchNorm2d::state() {
  return {running_mean_, running_var_};
}

LayerSpec BatchNorm2d::spec() const {
  return {"batchnorm2d",
          {{"channels", c_}, {"momentum", momentum_}, {"eps", eps_}}};
}

void BatchNorm2d::init_params(Rng&) {
  std::fill(gamma_->value.data().begin(), gamma_->value.data().end(), 1.0f);
  std::fill(beta_->value.data().begin(), beta_->value.data().end(), 0.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode, Rng*) {
  require_rank(x, 4, "batchnorm2d");
  if (x.dim(1) != c_)
    throw ShapeError("batchnorm " + name_ + " expects " + std::to_string(c_) +
                     " channels, got " + x.shape_str());
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t item = static_cast<std::size_t>(c_) * plane;
  const std::size_t m = static_cast<std::size_t>(n) * plane;

  Tensor y(x.shape());
  const float* gamma = gamma_->value.data().data();
  const float* beta = beta_->value.data().data();

  if (mode == Mode::eval) {
    const float* rm = running_mean_->value.data().data();
    const float* rv = running_var_->value.data().data();
    for (int ch = 0; ch < c_; ++ch) {
      const float inv =
          static_cast<float>(1.0 / std::sqrt(static_cast<double>(rv[ch]) + eps_));
      const float a = gamma[ch] * inv;
      const float b = beta[ch] - a * rm[ch];
      for (int i = 0; i < n; ++i) {
        const float* src =
            x.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
        float* dst =
            y.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] = a * src[p] + b;
      }
    }
    has_cache_ = false;
    return y;
  }

  if (m < 2)
    throw ShapeError("batchnorm " + name_ +
                     ": train mode needs at least 2 values per channel, got " +
                     x.shape_str());

  xhat_cache_ = Tensor(x.shape());
  inv_std_cache_.assign(static_cast<std::size_t>(c_), 0.0f);
  auto& rm = running_mean_->value.data();
  auto& rv = running_var_->value.data();

  for (int ch = 0; ch < c_; ++ch) {
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* src =
          x.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum += src[p];
        sum2 += static_cast<double>(src[p]) * src[p];
      }
    }
    const double mean = sum / static_cast<double>(m);
    const double var = std::max(sum2 / static_cast<double>(m) - mean * mean, 0.0);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_cache_[static_cast<std::size_t>(ch)] = inv;
    const float mu = static_cast<float>(mean);
    const float g = gamma[ch], b = beta[ch];

    for (int i = 0; i < n; ++i) {
      const float* src =
          x.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
      float* xh = xhat_cache_.data().data() +
                  static_cast<std::size_t>(i) * item + ch * plane;
      float* dst =
          y.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const float v = (src[p] - mu) * inv;
        xh[p] = v;
        dst[p] = g * v + b;
      }
    }

    rm[static_cast<std::size_t>(ch)] = static_cast<float>(
        (1.0 - momentum_) * rm[static_cast<std::size_t>(ch)] + momentum_ * mean);
    rv[static_cast<std::size_t>(ch)] = static_cast<float>(
        (1.0 - momentum_) * rv[static_cast<std::size_t>(ch)] + momentum_ * var);
  }
  has_cache_ = true;
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  if (!has_cache_)
    throw StateError("batchnorm " + name_ +
                     ": backward without cached train forward");
  if (!dy.same_shape(xhat_cache_))
    throw ShapeError("batchnorm " + name_ + ": upstream grad " +
                     dy.shape_str() + " does not match input");
  const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t item = static_cast<std::size_t>(c_) * plane;
  const double m = static_cast<double>(n) * static_cast<double>(plane);

  Tensor dx(dy.shape());
  auto& dgamma = gamma_->value.grad();
  auto& dbeta = beta_->value.grad();
  const float* gamma = gamma_->value.data().data();

  for (int ch = 0; ch < c_; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* g =
          dy.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
      const float* xh = xhat_cache_.data().data() +
                        static_cast<std::size_t>(i) * item + ch * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum_dy += g[p];
        sum_dy_xhat += static_cast<double>(g[p]) * xh[p];
      }
    }
    dgamma[static_cast<std::size_t>(ch)] += static_cast<float>(sum_dy_xhat);
    dbeta[static_cast<std::size_t>(ch)] += static_cast<float>(sum_dy);

    const float inv = inv_std_cache_[static_cast<std::size_t>(ch)];
    const float a = static_cast<float>(gamma[ch] * inv);
    const float mean_dy = static_cast<float>(sum_dy / m);
    const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / m);
    for (int i = 0; i < n; ++i) {
      const float* g =
          dy.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
      const float* xh = xhat_cache_.data().data() +
                        static_cast<std::size_t>(i) * item + ch * plane;
      float* d =
          dx.data().data() + static_cast<std::size_t>(i) * item + ch * plane;
      for (std::size_t p = 0; p < plane; ++p)
        d[p] = a * (g[p] - mean_dy - xh[p] * mean_dy_xhat);
    }
  }
  has_cache_ = false;
  return dx;
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, Mode, Rng*) {
  Tensor y(x.shape());
  mask_.assign(x.numel(), false);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float v = x.data()[i];
    if (v > 0.0f) {
      y.data()[i] = v;
      mask_[i] = true;
    }
  }
  shape_ = x.shape();
  has_cache_ = true;
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  if (!has_cache_) throw StateError("relu: backward without cached forward");
  if (dy.shape() != shape_)
    throw ShapeError("relu: upstream grad " + dy.shape_str() +
                     " does not match input");
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i)
    dx.data()[i] = mask_[i] ? dy.data()[i] : 0.0f;
  has_cache_ = false;
  return dx;
}

LayerSpec ReLU::spec() const { return {"relu", {}}; }

std::unique_ptr<Layer> ReLU::clone_shared() const {
  return std::make_unique<ReLU>();
}

// --------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
  if (p_ < 0.0 || p_ >= 1.0)
    throw ParameterError("dropout probability must be in [0,1), got " +
                         std::to_string(p_));
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (mode == Mode::eval) {
    has_cache_ = false;
    return x;
  }
  if (rng == nullptr)
    throw StateError("dropout: train-mode forward needs a generator");
  const float scale = static_cast<float>(1.0 / (1.0 - p_));
  Tensor y(x.shape());
  scale_mask_.assign(x.numel(), 0.0f);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (rng->uniform() >= p_) {
      scale_mask_[i] = scale;
      y.data()[i] = x.data()[i] * scale;
    }
  }
  shape_ = x.shape();
  has_cache_ = true;
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (!has_cache_)
    throw StateError("dropout: backward without cached train forward");
  if (dy.shape() != shape_)
    throw ShapeError("dropout: upstream grad " + dy.shape_str() +
                     " does not match input");
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i)
    dx.data()[i] = dy.data()[i] * scale_mask_[i];
  has_cache_ = false;
  return dx;
}

LayerSpec Dropout::spec() const { return {"dropout", {{"p", p_}}}; }

std::unique_ptr<Layer> Dropout::clone_shared() const {
  return std::make_unique<Dropout>(p_);
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, Mode, Rng*) {
  require_rank(x, 4, "global-avg-pool");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor y({n, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float* src =
          x.data().data() + (static_cast<std::size_t>(i) * c + ch) * plane;
      double sum = 0.0;
      for (std::size_t p = 0; p < plane; ++p) sum += src[p];
      y.data()[static_cast<std::size_t>(i) * c + ch] =
          static_cast<float>(sum / static_cast<double>(plane));
    }
  shape_ = x.shape();
  has_cache_ = true;
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  if (!has_cache_)
    throw StateError("global-avg-pool: backward without cached forward");
  const int n = shape_[0], c = shape_[1], h = shape_[2], w = shape_[3];
  if (dy.rank() != 2 || dy.dim(0) != n || dy.dim(1) != c)
    throw ShapeError("global-avg-pool: upstream grad " + dy.shape_str() +
                     " does not match (batch, channels)");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const float inv = 1.0f / static_cast<float>(plane);
  Tensor dx(shape_);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float g =
          dy.data()[static_cast<std::size_t>(i) * c + ch] * inv;
      float* dst =
          dx.data().data() + (static_cast<std::size_t>(i) * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = g;
    }
  has_cache_ = false;
  return dx;
}

LayerSpec GlobalAvgPool::spec() const { return {"gap", {}}; }

std::unique_ptr<Layer> GlobalAvgPool::clone_shared() const {
  return std::make_unique<GlobalAvgPool>();
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in_features, int out_features)
    : name_(std::move(name)), in_(in_features), out_(out_features) {
  if (in_ < 0 || out_ < 1)
    throw ParameterError("dense " + name_ + ": bad feature counts");
  w_ = make_param(name_ + ".w", {out_, in_}, true);
  b_ = make_param(name_ + ".b", {out_}, true);
}

Dense::Dense(const Dense& other)
    : name_(other.name_), in_(other.in_), out_(other.out_), w_(other.w_),
      b_(other.b_) {}

std::unique_ptr<Layer> Dense::clone_shared() const {
  return std::unique_ptr<Layer>(new Dense(*this));
}

std::vector<ParamPtr> Dense::params() { return {w_, b_}; }

LayerSpec Dense::spec() const {
  return {"dense", {{"in", in_}, {"out", out_}}};
}

void Dense::init_params(Rng& rng) {
  glorot_uniform(w_->value, in_, out_, rng);
  std::fill(b_->value.data().begin(), b_->value.data().end(), 0.0f);
}

Tensor Dense::forward(const Tensor& x, Mode, Rng*) {
  require_rank(x, 2, "dense");
  if (x.dim(1) != in_)
    throw ShapeError("dense " + name_ + " expects " + std::to_string(in_) +
                     " features, got " + x.shape_str());
  const int n = x.dim(0);
  Tensor y({n, out_});
  if (in_ > 0) {
    std::vector<float> wT(w_->value.numel());
    transpose_f32(w_->value.data().data(), out_, in_, wT.data());
    gemm_f32(n, out_, in_, x.data().data(), wT.data(), y.data().data());
  }
  const float* b = b_->value.data().data();
  for (int i = 0; i < n; ++i) {
    float* row = y.data().data() + static_cast<std::size_t>(i) * out_;
    for (int o = 0; o < out_; ++o) row[o] += b[o];
  }
  x_cache_ = x;
  has_cache_ = true;
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  if (!has_cache_)
    throw StateError("dense " + name_ + ": backward without cached forward");
  const int n = x_cache_.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != n || dy.dim(1) != out_)
    throw ShapeError("dense " + name_ + ": upstream grad " + dy.shape_str() +
                     " does not match (batch, out)");

  Tensor dx({n, in_});
  if (in_ > 0) {
    gemm_f32(n, in_, out_, dy.data().data(), w_->value.data().data(),
             dx.data().data());
    std::vector<float> dyT(dy.numel());
    transpose_f32(dy.data().data(), n, out_, dyT.data());
    gemm_f32(out_, in_, n, dyT.data(), x_cache_.data().data(),
             w_->value.grad().data(), true);
  }
  auto& db = b_->value.grad();
  for (int o = 0; o < out_; ++o) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      sum += dy.data()[static_cast<std::size_t>(i) * out_ + o];
    db[static_cast<std::size_t>(o)] += static_cast<float>(sum);
  }
  has_cache_ = false;
  return dx;
}

// ---------------------------------------------------------- deserializer

std::unique_ptr<Layer> layer_from_spec(const LayerSpec& spec,
                                       const std::string& name) {
  const auto attr = [&spec](const char* key) {
    const auto it = spec.attrs.find(key);
    if (it == spec.attrs.end())
      throw FormatError("layer spec " + spec.kind + " missing attr " + key);
    return it->second;
  };
  if (spec.kind == "conv2d")
    return std::make_unique<Conv2d>(
        name, static_cast<int>(attr("in")), static_cast<int>(attr("out")),
        static_cast<int>(attr("kernel")), static_cast<int>(attr("stride")),
        static_cast<int>(attr("pad")), attr("bias") != 0.0);
  if (spec.kind == "batchnorm2d")
    return std::make_unique<BatchNorm2d>(name,
                                         static_cast<int>(attr("channels")),
                                         attr("momentum"), attr("eps"));
  if (spec.kind == "relu") return std::make_unique<ReLU>();
  if (spec.kind == "dropout") return std::make_unique<Dropout>(attr("p"));
  if (spec.kind == "gap") return std::make_unique<GlobalAvgPool>();
  if (spec.kind == "dense")
    return std::make_unique<Dense>(name, static_cast<int>(attr("in")),
                                   static_cast<int>(attr("out")));
  throw FormatError("unknown layer kind: " + spec.kind);
}

} // namespace projscan
