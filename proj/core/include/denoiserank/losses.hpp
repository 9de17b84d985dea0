#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "denoiserank/tensor.hpp"

namespace denoiserank {

enum class LossKind : std::uint8_t { kMse, kRmse, kRankNet, kNdcgLoss2pp, kApproxNdcg, kListNet };

std::string_view loss_name(LossKind kind);
// "mse", "rmse", "ranknet", "ndcgloss2pp", "approxndcg", "listnet" (case-insensitive).
LossKind parse_loss_kind(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::kMse;
  double temperature = 1.0;  // ApproxNDCG smoothing
  double mu = 10.0;          // NDCGLoss2++ weight of the delta term
  double sigma = 1.0;        // NDCGLoss2++ logistic scale

  void validate() const;
};

struct LossValue {
  ad::Tensor value;      // scalar
  bool skipped = false;  // every entry was masked out; value is a constant 0
};

// One query list's loss. mask[i] == 0 excludes entry i from every sum and
// pair enumeration; an empty mask keeps all entries. Labels are relevance
// grades 0..4. Lists without any scoring pair (or all-zero gains) yield a
// constant 0.
LossValue ranking_loss(const LossSpec& spec, const ad::Tensor& y_hat,
                       std::span<const double> labels, std::span<const std::uint8_t> mask = {});

// Worst finite-difference relative error of ranking_loss over `trials` random
// lists of length n (n <= 8), in 64-bit.
double loss_gradient_check(const LossSpec& spec, std::size_t n, std::size_t trials,
                           std::uint64_t seed);

}  // namespace denoiserank
