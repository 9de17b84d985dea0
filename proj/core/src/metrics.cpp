#include "denoiserank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "denoiserank/error.hpp"
#include "denoiserank/letor.hpp"

namespace denoiserank {

namespace {

void check_args(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  if (k < 1) throw ContractError("metric cutoff K must be >= 1");
  if (scores.size() != labels.size()) {
    throw ShapeError("metric: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
}

double gain(double label) { return std::exp2(label) - 1.0; }

}  // namespace

std::vector<std::size_t> ranking_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double dcg_at_k(std::span<const std::size_t> order, std::span<const double> labels, std::size_t k) {
  if (k < 1) throw ContractError("metric cutoff K must be >= 1");
  const std::size_t limit = std::min(k, order.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < limit; ++r) {
    dcg += gain(labels[order[r]]) / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg;
}

double ndcg_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k,
                 double all_zero_value) {
  check_args(scores, labels, k);
  const auto ideal = ranking_order(labels);
  const double idcg = dcg_at_k(ideal, labels, k);
  if (idcg <= 0.0) return all_zero_value;
  return dcg_at_k(ranking_order(scores), labels, k) / idcg;
}

double err_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  check_args(scores, labels, k);
  const auto order = ranking_order(scores);
  const double max_gain = std::exp2(static_cast<double>(kMaxLabel));
  const std::size_t limit = std::min(k, order.size());
  double err = 0.0;
  double reach = 1.0;
  for (std::size_t r = 0; r < limit; ++r) {
    const double stop = gain(labels[order[r]]) / max_gain;
    err += reach * stop / static_cast<double>(r + 1);
    reach *= 1.0 - stop;
  }
  return err;
}

double map_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  check_args(scores, labels, k);
  const auto order = ranking_order(scores);
  const std::size_t limit = std::min(k, order.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < limit; ++r) {
    if (labels[order[r]] > 0.0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double mrr_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  check_args(scores, labels, k);
  const auto order = ranking_order(scores);
  const std::size_t limit = std::min(k, order.size());
  for (std::size_t r = 0; r < limit; ++r) {
    if (labels[order[r]] > 0.0) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

double precision_at_k(std::span<const double> scores, std::span<const double> labels,
                      std::size_t k) {
  check_args(scores, labels, k);
  const auto order = ranking_order(scores);
  const std::size_t limit = std::min(k, order.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < limit; ++r) hits += labels[order[r]] > 0.0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

bool has_relevant(std::span<const double> labels) {
  return std::any_of(labels.begin(), labels.end(), [](double l) { return l > 0.0; });
}

RsdResult rsd(const std::vector<std::vector<std::size_t>>& permutations, std::size_t k) {
  if (k < 1) throw ContractError("rsd: K must be >= 1");
  if (permutations.empty()) throw ContractError("rsd: need at least one run");
  std::vector<std::size_t> reference = permutations.front();
  std::sort(reference.begin(), reference.end());
  std::set<std::vector<std::size_t>> prefixes;
  for (std::size_t run = 0; run < permutations.size(); ++run) {
    const auto& perm = permutations[run];
    std::vector<std::size_t> docs = perm;
    std::sort(docs.begin(), docs.end());
    if (docs != reference) {
      throw ContractError("rsd: run " + std::to_string(run) + " ranks a different document set");
    }
    const std::size_t limit = std::min(k, perm.size());
    prefixes.emplace(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(limit));
  }
  RsdResult result;
  result.k = k;
  result.m = permutations.size();
  result.distinct = prefixes.size();
  result.rsd = static_cast<double>(result.distinct) / static_cast<double>(result.m);
  return result;
}

}  // namespace denoiserank
