#include "denoiserank/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "denoiserank/error.hpp"

namespace denoiserank::ad {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

GradCheckResult check_gradients(const ScalarFn& fn, std::vector<Tensor>& inputs, double h) {
  for (auto& x : inputs) {
    if (!x.requires_grad()) throw ContractError("check_gradients: input does not require grad");
    x.zero_grad();
  }
  backward(fn(inputs));

  GradCheckResult result;
  for (std::size_t q = 0; q < inputs.size(); ++q) {
    Tensor& x = inputs[q];
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    auto values = x.mutable_data();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double plus = fn(inputs).item();
      values[i] = original - h;
      const double minus = fn(inputs).item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      ++result.elements_checked;
      if (!(err <= result.max_rel_error)) {
        result.max_rel_error = std::isnan(err) ? INFINITY : err;
        result.worst_input = q;
        result.worst_element = i;
      }
    }
  }
  return result;
}

}  // namespace denoiserank::ad
