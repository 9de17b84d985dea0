#include "denoiserank/optimizer.hpp"

#include <cmath>

#include "denoiserank/error.hpp"

namespace denoiserank {

void AdamWConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adamw: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adamw: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adamw: eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("adamw: weight_decay must be >= 0");
}

AdamW::AdamW(std::vector<ad::Tensor> params, double lr, AdamWConfig config)
    : params_(std::move(params)), lr_(lr), config_(config) {
  config_.validate();
  if (!(lr_ >= 0.0)) throw ConfigError("adamw: learning rate must be >= 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw ContractError("adamw: parameter does not require grad");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const double decay = 1.0 - lr_ * config_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    auto value = p.mutable_data();
    const auto grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      value[j] *= decay;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      value[j] -= lr_ * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace denoiserank
