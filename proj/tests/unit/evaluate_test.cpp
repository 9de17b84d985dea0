#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "denoiserank/error.hpp"
#include "denoiserank/evaluate.hpp"
#include "denoiserank/random.hpp"
#include "synthetic.hpp"

namespace denoiserank {
namespace {

std::vector<double> label_scores(const QueryGroup& g, std::size_t) { return g.labels(); }

TEST(Cutoffs, Parse) {
  const auto c = parse_cutoffs("1, 5,ALL");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].k, 1u);
  EXPECT_EQ(c[1].k, 5u);
  EXPECT_TRUE(c[2].is_all());
  EXPECT_EQ(c[2].label(), "ALL");
  EXPECT_EQ(c[1].label(), "5");
  EXPECT_THROW(parse_cutoffs("0"), ConfigError);
  EXPECT_THROW(parse_cutoffs("5,5"), ConfigError);
  EXPECT_THROW(parse_cutoffs("x"), ConfigError);
  EXPECT_THROW(parse_cutoffs(""), ConfigError);
  EXPECT_EQ(default_cutoffs().size(), 6u);
}

TEST(EvaluateDataset, OracleRankerScoresOne) {
  const Dataset ds = testing::linear_dataset({30, 15, 6, 2});
  const auto report = evaluate_dataset(ds, label_scores, parse_cutoffs("1,3,5,10,ALL"));
  for (const auto& c : report.cutoffs) {
    EXPECT_DOUBLE_EQ(report.mean(Metric::kNdcg, c), 1.0) << c.label();
    EXPECT_DOUBLE_EQ(report.mean(Metric::kMrr, c), 1.0) << c.label();
  }
}

TEST(EvaluateDataset, RandomRankerMatchesAnalyticExpectation) {
  const Dataset ds = testing::linear_dataset({1000, 20, 6, 3});
  const std::size_t k = 10;
  // Under a uniformly random permutation every position holds the mean gain.
  double expected = 0.0;
  std::size_t counted = 0;
  for (const auto& g : ds.groups) {
    auto labels = g.labels();
    double mean_gain = 0.0;
    for (double l : labels) mean_gain += std::pow(2.0, l) - 1.0;
    mean_gain /= labels.size();
    if (mean_gain == 0.0) continue;
    std::sort(labels.rbegin(), labels.rend());
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, labels.size()); ++r) {
      dcg += mean_gain / std::log2(r + 2.0);
      idcg += (std::pow(2.0, labels[r]) - 1.0) / std::log2(r + 2.0);
    }
    expected += dcg / idcg;
    ++counted;
  }
  expected /= counted;

  const auto random_ranker = [](const QueryGroup& g, std::size_t index) {
    Rng rng = make_stream(99, index);
    std::vector<double> s(g.size());
    for (auto& v : s) v = standard_normal(rng);
    return s;
  };
  const auto report = evaluate_dataset(ds, random_ranker, {Cutoff{k}}, {Metric::kNdcg}, 2);
  EXPECT_EQ(report.n_queries, counted);
  EXPECT_NEAR(report.mean(Metric::kNdcg, Cutoff{k}), expected, 0.02);
}

TEST(EvaluateDataset, ExcludesQueriesWithoutRelevantDocuments) {
  Dataset ds = testing::linear_dataset({12, 8, 4, 4});
  for (auto& d : ds.groups[3].docs) d.label = 0;
  for (auto& d : ds.groups[7].docs) d.label = 0;
  std::size_t already = 0;
  for (const auto& g : ds.groups) {
    bool any = false;
    for (const auto& d : g.docs) any |= d.label > 0;
    already += !any;
  }
  const auto report = evaluate_dataset(ds, label_scores, default_cutoffs());
  EXPECT_EQ(report.n_excluded, already);
  EXPECT_EQ(report.n_queries, ds.num_queries() - already);
  EXPECT_EQ(report.qids.size(), report.n_queries);
  ASSERT_EQ(report.per_query.size(), all_metrics().size());
  EXPECT_EQ(report.per_query[0][0].size(), report.n_queries);
}

TEST(EvaluateDataset, CsvHasOneRowPerMetricAndCutoff) {
  const Dataset ds = testing::linear_dataset({5, 6, 4, 5});
  const auto report = evaluate_dataset(ds, label_scores, parse_cutoffs("1,5,10"), {Metric::kNdcg});
  const std::string csv = report.to_csv();
  EXPECT_EQ(csv.rfind("metric,K,value,n_queries\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("NDCG,10,1.000000,"), std::string::npos);
  EXPECT_FALSE(report.to_table().empty());
}

TEST(EvaluateDataset, RankerErrorsNameTheQuery) {
  const Dataset ds = testing::linear_dataset({6, 5, 4, 6});
  const auto failing = [&](const QueryGroup& g, std::size_t index) -> std::vector<double> {
    if (index == 4) throw ShapeError("boom");
    return g.labels();
  };
  try {
    evaluate_dataset(ds, failing, default_cutoffs());
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("query " + std::to_string(ds.groups[4].qid)), std::string::npos) << msg;
    EXPECT_NE(msg.find("boom"), std::string::npos);
  }
  const auto wrong_length = [](const QueryGroup&, std::size_t) { return std::vector<double>{1.0}; };
  EXPECT_THROW(evaluate_dataset(ds, wrong_length, default_cutoffs()), ShapeError);
}

TEST(EvaluateDataset, WorkerCountDoesNotChangeResults) {
  const Dataset ds = testing::linear_dataset({40, 10, 4, 7});
  const auto ranker = [](const QueryGroup& g, std::size_t index) {
    Rng rng = make_stream(1, index);
    std::vector<double> s(g.size());
    for (auto& v : s) v = standard_normal(rng);
    return s;
  };
  EXPECT_EQ(evaluate_dataset(ds, ranker, default_cutoffs(), all_metrics(), 1).to_csv(),
            evaluate_dataset(ds, ranker, default_cutoffs(), all_metrics(), 3).to_csv());
}

}  // namespace
}  // namespace denoiserank
