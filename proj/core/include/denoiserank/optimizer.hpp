#pragma once

#include <cstdint>
#include <vector>

#include "denoiserank/tensor.hpp"

namespace denoiserank {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
  bool operator==(const AdamWConfig&) const = default;
};

// AdamW with decoupled weight decay, in the PyTorch update order:
//   p <- p * (1 - lr * wd)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
// Parameters without an accumulated gradient are left untouched.
class AdamW {
 public:
  AdamW(std::vector<ad::Tensor> params, double lr, AdamWConfig config = {});

  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return steps_; }
  const AdamWConfig& config() const { return config_; }

  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<ad::Tensor> params_;
  double lr_;
  AdamWConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace denoiserank
