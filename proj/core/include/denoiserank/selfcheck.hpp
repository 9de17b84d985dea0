#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace denoiserank {

struct CheckLine {
  std::string suite;  // "op", "loss", "model", "schedule"
  std::string name;
  std::size_t trials = 0;
  double worst = 0.0;  // worst relative error; 0 for pass/fail-only checks
  bool passed = false;
  std::string detail;
};

struct SelfCheckOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};

// Central finite differences against backward() for every autodiff op, on
// random 64-bit instances.
std::vector<CheckLine> check_autodiff_ops(const SelfCheckOptions& options);
// Every ranking loss on random lists of five documents.
std::vector<CheckLine> check_losses(const SelfCheckOptions& options);
// Encoder plus denoiser, all parameters and the input features.
std::vector<CheckLine> check_model_gradients(const SelfCheckOptions& options);
// Schedule invariants for every kind at T in {200, 600, 1000}.
std::vector<CheckLine> check_schedules();

std::vector<CheckLine> run_all_checks(const SelfCheckOptions& options);

}  // namespace denoiserank
