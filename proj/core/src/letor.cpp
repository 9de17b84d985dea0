#include "denoiserank/letor.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string_view>
#include <unordered_map>

#include "binary_io.hpp"
#include "denoiserank/error.hpp"

namespace denoiserank {

namespace {

constexpr char kCacheMagic[8] = {'D', 'R', 'N', 'K', 'C', 'A', 'C', 'H'};
constexpr std::uint32_t kCacheVersion = 1;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view next_token(std::string_view& rest) {
  std::size_t b = 0;
  while (b < rest.size() && is_space(rest[b])) ++b;
  std::size_t e = b;
  while (e < rest.size() && !is_space(rest[e])) ++e;
  auto tok = rest.substr(b, e - b);
  rest.remove_prefix(e);
  return tok;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct RawDoc {
  std::int64_t qid;
  int label;
  std::size_t doc_index;
  std::vector<std::pair<std::size_t, double>> sparse;
};

}  // namespace

std::vector<double> QueryGroup::feature_matrix() const {
  std::vector<double> out;
  if (docs.empty()) return out;
  out.reserve(docs.size() * docs.front().features.size());
  for (const auto& d : docs) out.insert(out.end(), d.features.begin(), d.features.end());
  return out;
}

std::vector<double> QueryGroup::labels() const {
  std::vector<double> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(static_cast<double>(d.label));
  return out;
}

std::vector<int> QueryGroup::int_labels() const {
  std::vector<int> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.label);
  return out;
}

std::size_t Dataset::num_documents() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

Dataset parse_letor(std::istream& in, const std::string& source_name,
                    std::optional<std::size_t> k_hint) {
  std::vector<RawDoc> raw;
  std::size_t max_fid = 0;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError(source_name + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) {
      rest = rest.substr(0, hash);
    }
    std::string_view label_tok = next_token(rest);
    if (label_tok.empty()) continue;  // blank or comment-only line

    RawDoc doc{};
    doc.doc_index = raw.size();
    long long label = 0;
    if (!parse_number(label_tok, label)) {
      throw fail("invalid label '" + std::string(label_tok) + "'");
    }
    if (label < 0 || label > kMaxLabel) {
      throw ValidationError(source_name + ":" + std::to_string(line_no) +
                            ": label " + std::to_string(label) + " outside 0..4");
    }
    doc.label = static_cast<int>(label);

    std::string_view qid_tok = next_token(rest);
    if (qid_tok.substr(0, 4) != "qid:" || !parse_number(qid_tok.substr(4), doc.qid)) {
      throw fail("expected qid:<id>, got '" + std::string(qid_tok) + "'");
    }

    std::size_t last_fid = 0;
    for (auto tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
      const auto colon = tok.find(':');
      std::size_t fid = 0;
      double value = 0.0;
      if (colon == std::string_view::npos || !parse_number(tok.substr(0, colon), fid) ||
          !parse_number(tok.substr(colon + 1), value)) {
        throw fail("malformed feature '" + std::string(tok) + "'");
      }
      if (fid == 0) throw fail("feature ids are 1-based");
      if (fid <= last_fid) throw fail("feature ids must be strictly increasing");
      if (!std::isfinite(value)) throw fail("non-finite feature value");
      last_fid = fid;
      max_fid = std::max(max_fid, fid);
      doc.sparse.emplace_back(fid, value);
    }
    raw.push_back(std::move(doc));
  }

  if (raw.empty()) throw EmptyDatasetError(source_name + ": no documents");

  Dataset ds;
  ds.k = std::max(max_fid, k_hint.value_or(0));
  std::unordered_map<std::int64_t, std::size_t> group_of;
  for (auto& r : raw) {
    auto [it, inserted] = group_of.try_emplace(r.qid, ds.groups.size());
    if (inserted) ds.groups.push_back(QueryGroup{r.qid, {}});
    Document d;
    d.qid = r.qid;
    d.label = r.label;
    d.doc_index = r.doc_index;
    d.features.assign(ds.k, 0.0);
    for (auto [fid, value] : r.sparse) d.features[fid - 1] = value;
    ds.groups[it->second].docs.push_back(std::move(d));
  }
  return ds;
}

Dataset parse_letor(const std::filesystem::path& path, std::optional<std::size_t> k_hint) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_letor(in, path.string(), k_hint);
}

Dataset widen_features(Dataset ds, std::size_t k) {
  if (k < ds.k) throw ValidationError("cannot narrow features from " + std::to_string(ds.k));
  if (ds.norm_stats && k != ds.k) {
    throw ValidationError("cannot widen a dataset that already carries norm stats");
  }
  for (auto& g : ds.groups) {
    for (auto& d : g.docs) d.features.resize(k, 0.0);
  }
  ds.k = k;
  return ds;
}

NormStats compute_norm_stats(const Dataset& ds) {
  NormStats s;
  s.mean.assign(ds.k, 0.0);
  s.stddev.assign(ds.k, 0.0);
  const double count = static_cast<double>(ds.num_documents());
  if (count == 0) throw EmptyDatasetError("cannot compute statistics of an empty dataset");
  for (const auto& g : ds.groups) {
    for (const auto& d : g.docs) {
      for (std::size_t j = 0; j < ds.k; ++j) s.mean[j] += d.features[j];
    }
  }
  for (auto& m : s.mean) m /= count;
  for (const auto& g : ds.groups) {
    for (const auto& d : g.docs) {
      for (std::size_t j = 0; j < ds.k; ++j) {
        const double c = d.features[j] - s.mean[j];
        s.stddev[j] += c * c;
      }
    }
  }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / count);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

Dataset normalize(Dataset ds, const std::optional<NormStats>& stats) {
  NormStats applied = stats ? *stats : compute_norm_stats(ds);
  if (applied.mean.size() != ds.k || applied.stddev.size() != ds.k) {
    throw ValidationError("norm stats have " + std::to_string(applied.mean.size()) +
                          " entries, dataset has k=" + std::to_string(ds.k));
  }
  for (double s : applied.stddev) {
    if (!(s > 0.0)) throw ValidationError("norm stats contain a non-positive stddev");
  }
  for (auto& g : ds.groups) {
    for (auto& d : g.docs) {
      for (std::size_t j = 0; j < ds.k; ++j) {
        d.features[j] = (d.features[j] - applied.mean[j]) / applied.stddev[j];
      }
    }
  }
  ds.norm_stats = std::move(applied);
  return ds;
}

std::vector<std::uint8_t> cache_serialize(const Dataset& ds) {
  detail::ByteWriter w;
  w.put_raw(std::string_view(kCacheMagic, sizeof(kCacheMagic)));
  w.put<std::uint32_t>(kCacheVersion);
  w.put<std::uint64_t>(ds.k);
  w.put<std::uint64_t>(ds.groups.size());
  w.put<std::uint8_t>(ds.norm_stats ? 1 : 0);
  if (ds.norm_stats) {
    w.put_doubles(ds.norm_stats->mean);
    w.put_doubles(ds.norm_stats->stddev);
  }
  for (const auto& g : ds.groups) {
    w.put<std::int64_t>(g.qid);
    w.put<std::uint64_t>(g.docs.size());
    for (const auto& d : g.docs) {
      if (d.features.size() != ds.k) throw ValidationError("document with wrong feature count");
      w.put<std::int32_t>(d.label);
      w.put<std::uint64_t>(d.doc_index);
      w.put_doubles(d.features);
    }
  }
  w.seal();
  return std::move(w.bytes());
}

Dataset cache_deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "dataset cache");
  if (r.remaining() < sizeof(kCacheMagic) ||
      r.get_raw(sizeof(kCacheMagic)) != std::string_view(kCacheMagic, sizeof(kCacheMagic))) {
    throw IncompatibleError("not a dataset cache (bad magic bytes)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCacheVersion) {
    throw IncompatibleError("dataset cache version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kCacheVersion) + ")");
  }
  Dataset ds;
  ds.k = r.get<std::uint64_t>();
  const auto num_groups = r.get<std::uint64_t>();
  r.check_count(ds.k, sizeof(double));
  r.check_count(num_groups, sizeof(std::int64_t) + sizeof(std::uint64_t));
  const auto has_stats = r.get<std::uint8_t>();
  if (has_stats > 1) throw CorruptionError("dataset cache: bad stats flag");
  if (has_stats) {
    NormStats s;
    s.mean.resize(ds.k);
    s.stddev.resize(ds.k);
    r.get_doubles(s.mean);
    r.get_doubles(s.stddev);
    ds.norm_stats = std::move(s);
  }
  const std::size_t doc_bytes = sizeof(std::int32_t) + sizeof(std::uint64_t) + ds.k * sizeof(double);
  ds.groups.resize(num_groups);
  for (auto& g : ds.groups) {
    g.qid = r.get<std::int64_t>();
    const auto n = r.get<std::uint64_t>();
    r.check_count(n, doc_bytes);
    g.docs.resize(n);
    for (auto& d : g.docs) {
      d.qid = g.qid;
      d.label = r.get<std::int32_t>();
      if (d.label < 0 || d.label > kMaxLabel) throw CorruptionError("dataset cache: bad label");
      d.doc_index = r.get<std::uint64_t>();
      d.features.resize(ds.k);
      r.get_doubles(d.features);
    }
  }
  r.verify_seal();
  return ds;
}

void cache_write(const Dataset& ds, const std::filesystem::path& path) {
  detail::write_file_bytes(path, cache_serialize(ds));
}

Dataset cache_read(const std::filesystem::path& path) {
  return cache_deserialize(detail::read_file_bytes(path));
}

}  // namespace denoiserank
