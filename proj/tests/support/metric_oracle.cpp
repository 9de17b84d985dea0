#include "metric_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace denoiserank::testing::oracle {

std::vector<std::size_t> selection_order(const std::vector<double>& scores) {
  std::vector<bool> used(scores.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (used[i]) continue;
      // strict > keeps the lowest index among equal scores
      if (best == scores.size() || scores[i] > scores[best]) best = i;
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

namespace {

double dcg(const std::vector<std::size_t>& order, const std::vector<double>& labels, std::size_t k) {
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    total += (std::pow(2.0, labels[order[r]]) - 1.0) / std::log2(r + 2.0);
  }
  return total;
}

}  // namespace

double ideal_dcg(const std::vector<double>& labels, std::size_t k) {
  std::vector<std::size_t> perm(labels.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    best = std::max(best, dcg(perm, labels, k));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double ndcg(const std::vector<double>& scores, const std::vector<double>& labels, std::size_t k) {
  const double ideal = ideal_dcg(labels, k);
  return ideal == 0.0 ? 0.0 : dcg(selection_order(scores), labels, k) / ideal;
}

double err(const std::vector<double>& scores, const std::vector<double>& labels, std::size_t k) {
  const auto order = selection_order(scores);
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    // probability the user reaches rank r+1 and stops there
    double reach = 1.0;
    for (std::size_t q = 0; q < r; ++q) reach *= 1.0 - (std::pow(2.0, labels[order[q]]) - 1.0) / 16.0;
    total += reach * (std::pow(2.0, labels[order[r]]) - 1.0) / 16.0 / (r + 1.0);
  }
  return total;
}

double average_precision(const std::vector<double>& scores, const std::vector<double>& labels,
                         std::size_t k) {
  const auto order = selection_order(scores);
  double sum = 0.0;
  int hits = 0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    if (labels[order[r]] <= 0) continue;
    ++hits;
    sum += precision(scores, labels, r + 1);
  }
  return hits == 0 ? 0.0 : sum / hits;
}

double reciprocal_rank(const std::vector<double>& scores, const std::vector<double>& labels,
                       std::size_t k) {
  const auto order = selection_order(scores);
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    if (labels[order[r]] > 0) return 1.0 / (r + 1.0);
  }
  return 0.0;
}

double precision(const std::vector<double>& scores, const std::vector<double>& labels, std::size_t k) {
  const auto order = selection_order(scores);
  double hits = 0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) hits += labels[order[r]] > 0;
  return hits / static_cast<double>(k);
}

}  // namespace denoiserank::testing::oracle
