#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace denoiserank {

// Document indices sorted by score descending; equal scores keep index order.
std::vector<std::size_t> ranking_order(std::span<const double> scores);

// Graded gain 2^l - 1, discount 1 / log2(1 + rank). Cutoffs larger than the
// list are clamped to its length. K < 1 throws ContractError.
double dcg_at_k(std::span<const std::size_t> order, std::span<const double> labels, std::size_t k);
// Returns `all_zero_value` when the labels carry no gain.
double ndcg_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k,
                 double all_zero_value = 0.0);
// Cascade model with stopping probability (2^l - 1) / 2^4.
double err_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k);

// Binary metrics treat label > 0 as relevant.
// Average of precision@i over relevant positions i <= K, divided by the
// number of relevant documents retrieved in the top K (0 when none).
double map_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k);
double mrr_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k);
// Relevant count in the top K divided by K.
double precision_at_k(std::span<const double> scores, std::span<const double> labels,
                      std::size_t k);

bool has_relevant(std::span<const double> labels);

struct RsdResult {
  std::size_t k = 0;
  std::size_t m = 0;
  std::size_t distinct = 0;  // N
  double rsd = 0.0;          // N / M
};

// Ranking sequence diversity over M permutations of the same documents:
// distinct top-K prefixes divided by M.
RsdResult rsd(const std::vector<std::vector<std::size_t>>& permutations, std::size_t k);

}  // namespace denoiserank
