#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "denoiserank/letor.hpp"

namespace denoiserank {

enum class Metric : std::uint8_t { kNdcg, kErr, kMap, kMrr, kPrecision };

std::string_view metric_name(Metric metric);
const std::vector<Metric>& all_metrics();

// A metric cutoff; k == 0 stands for the whole list ("ALL").
struct Cutoff {
  std::size_t k = 0;
  bool is_all() const { return k == 0; }
  std::string label() const;
  bool operator==(const Cutoff&) const = default;
};

// "1,3,5,10,20,ALL" style list.
std::vector<Cutoff> parse_cutoffs(std::string_view text);
std::vector<Cutoff> default_cutoffs();

double metric_value(Metric metric, std::span<const double> scores, std::span<const double> labels,
                    Cutoff cutoff);

struct MetricsReport {
  std::vector<Metric> metrics;
  std::vector<Cutoff> cutoffs;
  std::size_t n_queries = 0;   // queries that entered the means
  std::size_t n_excluded = 0;  // queries without any relevant document
  std::vector<std::int64_t> qids;
  // per_query[metric][cutoff][query], aligned with qids
  std::vector<std::vector<std::vector<double>>> per_query;

  double mean(Metric metric, Cutoff cutoff) const;
  // "metric,K,value,n_queries" with one row per (metric, cutoff).
  std::string to_csv() const;
  // Human-readable table with values scaled by 100.
  std::string to_table() const;
};

// Scores for one query. Called concurrently from several workers when
// workers > 1; `index` is the query's position in the dataset.
using Ranker = std::function<std::vector<double>(const QueryGroup& group, std::size_t index)>;

// Averages per-query metrics over the queries that have a relevant document.
// Ranker failures are rethrown with the offending query id.
MetricsReport evaluate_dataset(const Dataset& ds, const Ranker& ranker,
                               const std::vector<Cutoff>& cutoffs,
                               const std::vector<Metric>& metrics = all_metrics(),
                               std::size_t workers = 1);

}  // namespace denoiserank
