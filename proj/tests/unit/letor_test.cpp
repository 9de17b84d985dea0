#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "denoiserank/error.hpp"
#include "denoiserank/letor.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace denoiserank {
namespace {

Dataset parse(const std::string& text, std::optional<std::size_t> k_hint = std::nullopt) {
  std::istringstream in(text);
  return parse_letor(in, "mem", k_hint);
}

TEST(Letor, ZeroFillsMissingFeatureIds) {
  const Dataset ds = parse("2 qid:1 1:0.5 3:0.25\n", 3);
  ASSERT_EQ(ds.num_queries(), 1u);
  const Document& d = ds.groups[0].docs[0];
  EXPECT_EQ(d.label, 2);
  EXPECT_EQ(d.qid, 1);
  EXPECT_EQ(d.features, (std::vector<double>{0.5, 0.0, 0.25}));
}

TEST(Letor, KHintOnlyWidens) {
  EXPECT_EQ(parse("0 qid:1 5:1\n", 3).k, 5u);
  EXPECT_EQ(parse("0 qid:1 2:1\n", 9).k, 9u);
}

TEST(Letor, GroupsByQidInFileOrderAndSkipsComments) {
  const Dataset ds = parse(
      "# header comment\n"
      "1 qid:7 1:1 # doc a\n"
      "\n"
      "0 qid:3 1:2\n"
      "2 qid:7 2:3\n"
      "4 qid:3 1:4 2:5\n");
  ASSERT_EQ(ds.num_queries(), 2u);
  EXPECT_EQ(ds.groups[0].qid, 7);
  EXPECT_EQ(ds.groups[1].qid, 3);
  EXPECT_EQ(ds.num_documents(), 4u);
  for (const auto& g : ds.groups) {
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g.docs[i - 1].doc_index, g.docs[i].doc_index);
    for (const auto& d : g.docs) {
      EXPECT_EQ(d.qid, g.qid);
      EXPECT_EQ(d.features.size(), ds.k);
    }
  }
  EXPECT_EQ(ds.groups[1].int_labels(), (std::vector<int>{0, 4}));
}

TEST(Letor, WebAndYahooWidths) {
  auto wide_line = [](int k) {
    std::string s = "1 qid:10";
    for (int f = 1; f <= k; ++f) s += " " + std::to_string(f) + ":0.1";
    return s + "\n";
  };
  EXPECT_EQ(parse(wide_line(136)).k, 136u);
  EXPECT_EQ(parse(wide_line(700)).k, 700u);
}

TEST(Letor, ErrorsCarryLineNumbers) {
  try {
    parse("1 qid:1 1:0\nx qid:1 1:0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("mem:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("5 qid:1 1:0\n"), ValidationError);
  EXPECT_THROW(parse("-1 qid:1 1:0\n"), ValidationError);
  EXPECT_THROW(parse("1 1:0\n"), ParseError);
  EXPECT_THROW(parse("1 qid:1 0:1\n"), ParseError);
  EXPECT_THROW(parse("1 qid:1 2:1 1:1\n"), ParseError);
  EXPECT_THROW(parse("1 qid:1 1:abc\n"), ParseError);
  EXPECT_THROW(parse(""), EmptyDatasetError);
  EXPECT_THROW(parse("# only a comment\n\n"), EmptyDatasetError);
  EXPECT_THROW(parse_letor("/nonexistent/file.txt"), DataError);
}

TEST(Letor, NormalizeConstantColumnAndHandValues) {
  Dataset ds = parse("0 qid:1 1:5 2:1\n1 qid:1 1:5 2:3\n");
  const Dataset out = normalize(ds);
  ASSERT_TRUE(out.norm_stats);
  EXPECT_EQ(out.norm_stats->stddev[0], 1.0);
  EXPECT_EQ(out.norm_stats->mean[1], 2.0);
  EXPECT_EQ(out.norm_stats->stddev[1], 1.0);
  EXPECT_EQ(out.groups[0].docs[0].features, (std::vector<double>{0.0, -1.0}));
  EXPECT_EQ(out.groups[0].docs[1].features, (std::vector<double>{0.0, 1.0}));
}

TEST(Letor, NormalizeAppliesGivenStats) {
  const Dataset train = normalize(testing::linear_dataset({20, 10, 4, 3}));
  const Dataset test = normalize(testing::linear_dataset({5, 10, 4, 4}), train.norm_stats);
  EXPECT_EQ(*test.norm_stats, *train.norm_stats);

  NormStats bad = *train.norm_stats;
  bad.mean.pop_back();
  EXPECT_THROW(normalize(testing::linear_dataset({5, 10, 4, 4}), bad), ValidationError);
}

TEST(Letor, NormalizedFittingSplitIsStandardized) {
  const Dataset ds = normalize(testing::linear_dataset({30, 12, 6, 5}));
  for (std::size_t f = 0; f < ds.k; ++f) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& g : ds.groups) {
      for (const auto& d : g.docs) {
        sum += d.features[f];
        sq += d.features[f] * d.features[f];
        ++n;
      }
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 1.0, 1e-9);
  }
}

TEST(LetorCache, RoundTripIsByteIdentical) {
  const Dataset ds = normalize(parse("2 qid:4 1:0.5 3:0.25\n0 qid:4 2:1\n3 qid:9 1:-2\n"));
  const auto bytes = cache_serialize(ds);
  const Dataset back = cache_deserialize(bytes);
  EXPECT_EQ(cache_serialize(back), bytes);
  ASSERT_EQ(back.num_queries(), ds.num_queries());
  EXPECT_EQ(back.k, ds.k);
  EXPECT_EQ(*back.norm_stats, *ds.norm_stats);
  for (std::size_t q = 0; q < ds.num_queries(); ++q) {
    EXPECT_EQ(back.groups[q].qid, ds.groups[q].qid);
    EXPECT_EQ(back.groups[q].feature_matrix(), ds.groups[q].feature_matrix());
    EXPECT_EQ(back.groups[q].int_labels(), ds.groups[q].int_labels());
  }
}

TEST(LetorCache, LargeRoundTripPreservesFeatureSums) {
  const Dataset ds = testing::linear_dataset({1000, 8, 5, 11});
  std::vector<double> sums;
  for (const auto& g : ds.groups) {
    for (const auto& d : g.docs) {
      double s = 0.0;
      for (double x : d.features) s += x;
      sums.push_back(s);
    }
  }
  testing::TempDir dir;
  cache_write(ds, dir / "big.cache");
  const Dataset back = cache_read(dir / "big.cache");
  std::size_t i = 0;
  for (const auto& g : back.groups) {
    for (const auto& d : g.docs) {
      double s = 0.0;
      for (double x : d.features) s += x;
      EXPECT_EQ(s, sums[i++]);
    }
  }
  EXPECT_EQ(i, sums.size());
}

TEST(LetorCache, RejectsForeignTruncatedAndCorruptFiles) {
  const auto bytes = cache_serialize(parse("1 qid:1 1:1\n"));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(cache_deserialize(bad_magic), IncompatibleError);

  auto bad_version = bytes;
  bad_version[8] = 99;  // version follows the 8 magic bytes
  EXPECT_THROW(cache_deserialize(bad_version), IncompatibleError);

  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 12);
  EXPECT_THROW(cache_deserialize(truncated), CorruptionError);

  auto flipped = bytes;
  flipped[bytes.size() - 20] ^= 0x40;
  EXPECT_THROW(cache_deserialize(flipped), CorruptionError);

  EXPECT_THROW(cache_deserialize(std::vector<std::uint8_t>{}), DataError);
}

}  // namespace
}  // namespace denoiserank
