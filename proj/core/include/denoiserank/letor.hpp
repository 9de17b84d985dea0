#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace denoiserank {

inline constexpr int kMaxLabel = 4;
inline constexpr int kNumGrades = kMaxLabel + 1;

struct Document {
  std::int64_t qid = 0;
  int label = 0;
  std::vector<double> features;
  // Line position within the source file; strictly increasing inside a group.
  std::size_t doc_index = 0;
};

struct QueryGroup {
  std::int64_t qid = 0;
  std::vector<Document> docs;

  std::size_t size() const { return docs.size(); }
  // Row-major n x k copy of the features.
  std::vector<double> feature_matrix() const;
  std::vector<double> labels() const;
  std::vector<int> int_labels() const;
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const NormStats&) const = default;
};

struct Dataset {
  std::vector<QueryGroup> groups;
  std::size_t k = 0;
  std::optional<NormStats> norm_stats;

  std::size_t num_queries() const { return groups.size(); }
  std::size_t num_documents() const;
};

// Parses an SVMLight/LETOR file: `<label> qid:<id> <fid>:<val> ... [# comment]`.
// Feature ids are 1-based; missing ids are zero-filled. k is the largest
// feature id seen, or k_hint when that is larger.
Dataset parse_letor(const std::filesystem::path& path,
                    std::optional<std::size_t> k_hint = std::nullopt);
// Same, reading from an already opened stream. `source_name` only labels errors.
Dataset parse_letor(std::istream& in, const std::string& source_name,
                    std::optional<std::size_t> k_hint = std::nullopt);

// Pads every document with zero features up to `k` (k >= ds.k).
Dataset widen_features(Dataset ds, std::size_t k);

// Per-feature population mean and standard deviation over all documents.
// Zero-variance features get stddev 1.
NormStats compute_norm_stats(const Dataset& ds);

// z-scores every feature with `stats`, or with statistics of `ds` itself when
// none are given. The result records the statistics that were applied.
Dataset normalize(Dataset ds, const std::optional<NormStats>& stats = std::nullopt);

void cache_write(const Dataset& ds, const std::filesystem::path& path);
Dataset cache_read(const std::filesystem::path& path);
// In-memory form of the cache file, byte for byte.
std::vector<std::uint8_t> cache_serialize(const Dataset& ds);
Dataset cache_deserialize(std::span<const std::uint8_t> bytes);

}  // namespace denoiserank
