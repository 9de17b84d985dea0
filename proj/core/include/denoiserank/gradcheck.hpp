#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "denoiserank/tensor.hpp"

namespace denoiserank::ad {

// |analytic - numeric| / max(1, |numeric|)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t elements_checked = 0;
  // Input position and flat element index of the worst disagreement.
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>& inputs)>;

// Compares backward() against central finite differences with step `h` for
// every element of every input. `fn` must be deterministic and return a
// one-element tensor; inputs are restored to their original values.
GradCheckResult check_gradients(const ScalarFn& fn, std::vector<Tensor>& inputs,
                                double h = 1e-5);

}  // namespace denoiserank::ad
