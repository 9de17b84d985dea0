#include "denoiserank/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>

#include "denoiserank/error.hpp"
#include "denoiserank/metrics.hpp"
#include "denoiserank/parallel.hpp"

namespace denoiserank {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string with_query(std::int64_t qid, const char* what) {
  return "query " + std::to_string(qid) + ": " + what;
}

// Re-raise preserving the error category so callers can still map it.
[[noreturn]] void rethrow_for_query(std::int64_t qid) {
  try {
    throw;
  } catch (const NumericError& e) {
    throw NumericError(with_query(qid, e.what()));
  } catch (const IncompatibleError& e) {
    throw IncompatibleError(with_query(qid, e.what()));
  } catch (const DataError& e) {
    throw DataError(with_query(qid, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(with_query(qid, e.what()));
  } catch (const ShapeError& e) {
    throw ShapeError(with_query(qid, e.what()));
  } catch (const IndexError& e) {
    throw IndexError(with_query(qid, e.what()));
  } catch (const DomainError& e) {
    throw DomainError(with_query(qid, e.what()));
  } catch (const ContractError& e) {
    throw ContractError(with_query(qid, e.what()));
  } catch (const std::exception& e) {
    throw Error(with_query(qid, e.what()));
  }
}

std::string format_value(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kNdcg:
      return "NDCG";
    case Metric::kErr:
      return "ERR";
    case Metric::kMap:
      return "MAP";
    case Metric::kMrr:
      return "MRR";
    case Metric::kPrecision:
      return "P";
  }
  return "?";
}

const std::vector<Metric>& all_metrics() {
  static const std::vector<Metric> metrics{Metric::kNdcg, Metric::kErr, Metric::kMap, Metric::kMrr,
                                           Metric::kPrecision};
  return metrics;
}

std::string Cutoff::label() const { return is_all() ? "ALL" : std::to_string(k); }

std::vector<Cutoff> default_cutoffs() { return {{1}, {3}, {5}, {10}, {20}, {0}}; }

std::vector<Cutoff> parse_cutoffs(std::string_view text) {
  std::vector<Cutoff> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = trim(text.substr(start, comma - start));
    start = comma + 1;
    if (item.empty()) throw ConfigError("cutoffs: empty entry in '" + std::string(text) + "'");
    std::string upper = item;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    Cutoff c;
    if (upper != "ALL") {
      std::size_t k = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
      if (ec != std::errc() || ptr != item.data() + item.size() || k < 1) {
        throw ConfigError("cutoffs: '" + item + "' is not a positive integer or ALL");
      }
      c.k = k;
    }
    if (std::find(out.begin(), out.end(), c) != out.end()) {
      throw ConfigError("cutoffs: duplicate entry " + c.label());
    }
    out.push_back(c);
    if (comma == text.size()) break;
  }
  return out;
}

double metric_value(Metric metric, std::span<const double> scores, std::span<const double> labels,
                    Cutoff cutoff) {
  const std::size_t k = cutoff.is_all() ? std::max<std::size_t>(labels.size(), 1) : cutoff.k;
  switch (metric) {
    case Metric::kNdcg:
      return ndcg_at_k(scores, labels, k);
    case Metric::kErr:
      return err_at_k(scores, labels, k);
    case Metric::kMap:
      return map_at_k(scores, labels, k);
    case Metric::kMrr:
      return mrr_at_k(scores, labels, k);
    case Metric::kPrecision:
      return precision_at_k(scores, labels, k);
  }
  throw ContractError("unhandled metric");
}

double MetricsReport::mean(Metric metric, Cutoff cutoff) const {
  const auto m = std::find(metrics.begin(), metrics.end(), metric);
  const auto c = std::find(cutoffs.begin(), cutoffs.end(), cutoff);
  if (m == metrics.end() || c == cutoffs.end()) {
    throw ContractError("report has no " + std::string(metric_name(metric)) + "@" + cutoff.label());
  }
  const auto& values = per_query[m - metrics.begin()][c - cutoffs.begin()];
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string MetricsReport::to_csv() const {
  std::string out = "metric,K,value,n_queries\n";
  for (Metric m : metrics) {
    for (const Cutoff& c : cutoffs) {
      out += std::string(metric_name(m)) + "," + c.label() + "," +
             format_value(mean(m, c), "%.6f") + "," + std::to_string(n_queries) + "\n";
    }
  }
  return out;
}

std::string MetricsReport::to_table() const {
  std::string out = "metric ";
  for (const Cutoff& c : cutoffs) {
    std::string head = "@" + c.label();
    out += std::string(9 - std::min<std::size_t>(head.size(), 8), ' ') + head;
  }
  out += "\n";
  for (Metric m : metrics) {
    std::string name(metric_name(m));
    name.resize(6, ' ');
    out += name + " ";
    for (const Cutoff& c : cutoffs) out += format_value(100.0 * mean(m, c), "%9.2f");
    out += "\n";
  }
  out += "queries: " + std::to_string(n_queries) + " (excluded without relevant documents: " +
         std::to_string(n_excluded) + ")\n";
  return out;
}

MetricsReport evaluate_dataset(const Dataset& ds, const Ranker& ranker,
                               const std::vector<Cutoff>& cutoffs,
                               const std::vector<Metric>& metrics, std::size_t workers) {
  if (cutoffs.empty()) throw ConfigError("evaluate: no cutoffs requested");
  const std::size_t L = ds.groups.size();
  std::vector<std::vector<double>> scores(L);
  std::vector<std::vector<double>> labels(L);
  parallel_for(L, workers, [&](std::size_t q) {
    const QueryGroup& group = ds.groups[q];
    labels[q] = group.labels();
    if (!has_relevant(labels[q])) return;
    try {
      scores[q] = ranker(group, q);
    } catch (...) {
      rethrow_for_query(group.qid);
    }
    if (scores[q].size() != group.size()) {
      throw ShapeError(with_query(group.qid, "ranker returned the wrong number of scores"));
    }
  });

  MetricsReport report;
  report.metrics = metrics;
  report.cutoffs = cutoffs;
  report.per_query.assign(metrics.size(), std::vector<std::vector<double>>(cutoffs.size()));
  for (std::size_t q = 0; q < L; ++q) {
    if (!has_relevant(labels[q])) {
      ++report.n_excluded;
      continue;
    }
    report.qids.push_back(ds.groups[q].qid);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        const double v = metric_value(metrics[m], scores[q], labels[q], cutoffs[c]);
        if (!std::isfinite(v)) {
          throw NumericError(with_query(ds.groups[q].qid, "non-finite metric value"));
        }
        report.per_query[m][c].push_back(v);
      }
    }
  }
  report.n_queries = report.qids.size();
  return report;
}

}  // namespace denoiserank
