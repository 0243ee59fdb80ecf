#include "projscan/adam.hpp"

#include <algorithm>
#include <cmath>

#include "projscan/errors.hpp"

namespace projscan {

Adam::Adam(std::vector<ParamPtr> params, AdamConfig cfg) : cfg_(cfg) {
  if (cfg_.lr <= 0.0 || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 ||
      cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0 || cfg_.eps <= 0.0)
    throw ParameterError("adam: bad hyperparameters");
  for (auto& p : params) {
    if (!p) throw ParameterError("adam: null parameter");
    if (std::find(params_.begin(), params_.end(), p) != params_.end())
      continue;
    if (!p->value.has_grad()) p->value.ensure_grad();
    params_.push_back(std::move(p));
  }
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i]->value.numel(), 0.0f);
    v_[i].assign(params_[i]->value.numel(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const double c2 = 1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));

  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    const auto& g = p.value.grad();
    for (const float gv : g)
      if (!std::isfinite(gv))
        throw DivergenceError("non-finite gradient in parameter " + p.name);

    auto& w = p.value.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gv = g[j];
      const double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gv;
      const double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gv * gv;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      w[j] = static_cast<float>(
          w[j] - cfg_.lr * (mj * c1) / (std::sqrt(vj * c2) + cfg_.eps));
    }
    p.value.zero_grad();
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p->value.zero_grad();
}

} // namespace projscan
