#include "commands.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include "denoiserank/error.hpp"
#include "denoiserank/letor.hpp"
#include "denoiserank/metrics.hpp"
#include "denoiserank/network.hpp"
#include "denoiserank/parallel.hpp"
#include "denoiserank/sampler.hpp"
#include "denoiserank/selfcheck.hpp"
#include "denoiserank/trainer.hpp"

namespace denoiserank::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

Dataset require_cache(const std::string& path, const char* what) {
  if (path.empty()) throw DataError(std::string("no ") + what + " cache configured");
  if (!fs::exists(path)) throw DataError(std::string(what) + " cache not found: " + path);
  return cache_read(path);
}

std::size_t percentile(std::vector<std::size_t> v, double p) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

void summarize(const std::string& name, const Dataset& ds, std::uint64_t checksum,
               std::ostream& out) {
  std::array<std::size_t, kNumGrades> histogram{};
  std::vector<std::size_t> lengths;
  for (const auto& g : ds.groups) {
    lengths.push_back(g.size());
    for (const auto& d : g.docs) ++histogram[static_cast<std::size_t>(d.label)];
  }
  out << name << ": L=" << ds.num_queries() << " k=" << ds.k << " docs=" << ds.num_documents()
      << "\n  labels:";
  for (int l = 0; l < kNumGrades; ++l) out << ' ' << l << ':' << histogram[static_cast<std::size_t>(l)];
  out << "\n  list length p50=" << percentile(lengths, 0.5) << " p90=" << percentile(lengths, 0.9)
      << " p99=" << percentile(lengths, 0.99)
      << " max=" << *std::max_element(lengths.begin(), lengths.end())
      << "\n  cache checksum " << hex64(checksum) << '\n';
}

void check_model_data(const DenoiseModel& model, const Dataset& ds, const std::string& what) {
  if (model.config().k != ds.k) {
    throw IncompatibleError("checkpoint expects " + std::to_string(model.config().k) +
                            " features but " + what + " has " + std::to_string(ds.k));
  }
}

}  // namespace

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

RunConfig resolve_config(const ConfigOptions& o) {
  RunConfig config;
  if (!o.preset.empty()) config.apply_preset(o.preset);
  if (!o.config_file.empty()) config.load_file(o.config_file);
  for (const auto& a : o.overrides) config.assign(a);
  if (o.seed) config.set("seed", std::to_string(*o.seed));
  if (o.reverse_steps) config.set("reverse_steps", std::to_string(*o.reverse_steps));
  if (o.repeat) config.set("repeat", std::to_string(*o.repeat));
  if (o.workers) config.set("workers", std::to_string(*o.workers));
  if (!o.out_dir.empty()) config.set("out_dir", o.out_dir);
  return config;
}

int cmd_prepare(const PrepareOptions& o, std::ostream& out) {
  std::optional<std::size_t> hint;
  if (o.num_features > 0) hint = o.num_features;
  std::vector<std::pair<std::string, Dataset>> splits;
  splits.emplace_back("train", parse_letor(o.train, hint));
  if (!o.valid.empty()) splits.emplace_back("valid", parse_letor(o.valid, hint));
  if (!o.test.empty()) splits.emplace_back("test", parse_letor(o.test, hint));

  std::size_t k = 0;
  for (const auto& [name, ds] : splits) k = std::max(k, ds.k);
  for (auto& [name, ds] : splits) ds = widen_features(std::move(ds), k);

  const NormStats stats = compute_norm_stats(splits.front().second);
  fs::create_directories(o.out_dir);
  for (auto& [name, ds] : splits) {
    ds = normalize(std::move(ds), stats);
    const auto bytes = cache_serialize(ds);
    const fs::path path = fs::path(o.out_dir) / (name + ".cache");
    cache_write(ds, path);
    summarize(name, ds, fnv1a(bytes), out);
    out << "  wrote " << path.string() << '\n';
  }
  return kExitOk;
}

int cmd_train(const ConfigOptions& options, std::ostream& out, std::ostream& log) {
  const RunConfig config = resolve_config(options);
  TrainConfig train_config = config.train_config();
  // Fail on missing data before anything is written.
  const Dataset train = require_cache(config.get("train_cache"), "training");
  const Dataset valid = require_cache(config.get("valid_cache"), "validation");
  train_config.model.k = train.k;
  train_config.validate();

  const fs::path out_dir = config.get("out_dir");
  fs::create_directories(out_dir);
  write_text(out_dir / "config.resolved", config.snapshot());
  out << "model: " << describe(train_config.model) << '\n';

  const FitResult result = fit(train, valid, train_config, out_dir, [&](const EpochLog& e) {
    log << "epoch " << e.epoch << " loss " << fmt("%.6f", e.loss);
    if (e.valid_ndcg10) log << " valid NDCG@10 " << fmt("%.4f", *e.valid_ndcg10);
    log << '\n';
  });
  out << "best validation NDCG@10 " << fmt("%.4f", result.best_ndcg10) << " at epoch "
      << result.best_epoch << "\ncheckpoint " << result.best_checkpoint.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& log) {
  RunConfig config = resolve_config(o.config);
  if (!o.cutoffs.empty()) config.set("cutoffs", o.cutoffs);
  const DenoiseModel model = load_checkpoint(o.checkpoint);
  const Dataset test =
      require_cache(o.test_cache.empty() ? config.get("test_cache") : o.test_cache, "test");
  check_model_data(model, test, "the test data");

  const ScheduleTable table(model.schedule());
  const SamplerConfig sampler = config.sampler_config();
  stride_schedule(table.timesteps(), sampler.resolved_steps(table.timesteps()));

  // Warm start: one untimed query.
  if (!test.groups.empty()) rank_query(test.groups.front(), model, table, sampler, 0);

  std::mutex time_mutex;
  double seconds = 0.0;
  std::size_t timed = 0;
  const Ranker ranker = [&](const QueryGroup& group, std::size_t index) {
    const auto start = std::chrono::steady_clock::now();
    auto scores = rank_query(group, model, table, sampler, index).scores;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lock(time_mutex);
    seconds += s;
    ++timed;
    return scores;
  };
  const MetricsReport report = evaluate_dataset(test, ranker, config.cutoffs(), all_metrics(),
                                                static_cast<std::size_t>(config.get_int("workers")));

  const fs::path out_dir = config.get("out_dir");
  write_text(out_dir / "eval.csv", report.to_csv());
  const double per_query_ms = timed == 0 ? 0.0 : 1000.0 * seconds / static_cast<double>(timed);
  write_text(out_dir / "eval_timing.csv",
             "reverse_steps,queries,mean_ms_per_query\n" +
                 std::to_string(sampler.resolved_steps(table.timesteps())) + "," +
                 std::to_string(timed) + "," + fmt("%.4f", per_query_ms) + "\n");
  out << report.to_table();
  log << "mean inference time " << fmt("%.3f", per_query_ms) << " ms/query over " << timed
      << " queries (" << sampler.resolved_steps(table.timesteps()) << " reverse steps)\n";
  return kExitOk;
}

int cmd_infer(const InferOptions& o, std::ostream& out) {
  const RunConfig config = resolve_config(o.config);
  const DenoiseModel model = load_checkpoint(o.checkpoint);
  const Dataset ds = require_cache(o.input, "input");
  check_model_data(model, ds, "the input");
  const ScheduleTable table(model.schedule());
  const SamplerConfig sampler = config.sampler_config();

  std::vector<RankResult> results(ds.groups.size());
  parallel_for(ds.groups.size(), static_cast<std::size_t>(config.get_int("workers")),
               [&](std::size_t q) { results[q] = rank_query(ds.groups[q], model, table, sampler, q); });

  std::string text = "qid\tdoc_index\tscore\trank\n";
  for (std::size_t q = 0; q < ds.groups.size(); ++q) {
    const auto& group = ds.groups[q];
    std::vector<std::size_t> rank(group.size());
    for (std::size_t r = 0; r < results[q].order.size(); ++r) rank[results[q].order[r]] = r + 1;
    for (std::size_t i = 0; i < group.size(); ++i) {
      text += std::to_string(group.qid) + "\t" + std::to_string(group.docs[i].doc_index) + "\t" +
              fmt("%.9g", results[q].scores[i]) + "\t" + std::to_string(rank[i]) + "\n";
    }
  }
  if (o.output.empty() || o.output == "-") {
    out << text;
  } else {
    write_text(o.output, text);
  }
  return kExitOk;
}

int cmd_diversity(const EvaluateOptions& o, std::ostream& out, std::ostream& log) {
  RunConfig config = resolve_config(o.config);
  if (!o.cutoffs.empty()) config.set("diversity_cutoffs", o.cutoffs);
  const DenoiseModel model = load_checkpoint(o.checkpoint);
  const Dataset test =
      require_cache(o.test_cache.empty() ? config.get("test_cache") : o.test_cache, "test");
  check_model_data(model, test, "the test data");
  const ScheduleTable table(model.schedule());
  const SamplerConfig sampler = config.sampler_config();
  const auto cutoffs = config.diversity_cutoffs();
  const auto repeats = static_cast<std::size_t>(config.get_int("repeat"));
  if (repeats < 1) throw ConfigError("repeat must be >= 1");
  for (const Cutoff& c : cutoffs) {
    if (c.is_all()) throw ConfigError("diversity cutoffs must be explicit integers");
  }

  const std::size_t L = test.groups.size();
  // Per query and cutoff: RSD, mean NDCG over runs, NDCG of the first run.
  std::vector<std::vector<std::array<double, 3>>> rows(L);
  std::vector<bool> used(L, false);
  parallel_for(L, static_cast<std::size_t>(config.get_int("workers")), [&](std::size_t q) {
    const auto& group = test.groups[q];
    const auto labels = group.labels();
    if (!has_relevant(labels)) return;
    const auto runs = rank_query_repeated(group, model, table, sampler, repeats, q);
    std::vector<std::vector<std::size_t>> perms;
    for (const auto& r : runs) perms.push_back(r.order);
    for (const Cutoff& c : cutoffs) {
      double ndcg_sum = 0.0;
      for (const auto& r : runs) ndcg_sum += ndcg_at_k(r.scores, labels, c.k);
      rows[q].push_back({rsd(perms, c.k).rsd, ndcg_sum / static_cast<double>(repeats),
                         ndcg_at_k(runs.front().scores, labels, c.k)});
    }
    used[q] = true;
  });

  const std::size_t n = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
  if (n == 0) throw DataError("no test query has a relevant document");
  const bool show_rsd = repeats > 1;
  std::string csv = show_rsd ? "K,M,rsd,ndcg_mean,ndcg_single,n_queries\n"
                             : "K,M,ndcg_mean,n_queries\n";
  out << "K      M" << (show_rsd ? "      RSD" : "") << "  NDCG(mean)" << (show_rsd ? "  NDCG(run 1)" : "")
      << '\n';
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    std::array<double, 3> mean{};
    for (std::size_t q = 0; q < L; ++q) {
      if (!used[q]) continue;
      for (int j = 0; j < 3; ++j) mean[j] += rows[q][c][j];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    const std::string K = std::to_string(cutoffs[c].k);
    if (show_rsd) {
      csv += K + "," + std::to_string(repeats) + "," + fmt("%.6f", mean[0]) + "," +
             fmt("%.6f", mean[1]) + "," + fmt("%.6f", mean[2]) + "," + std::to_string(n) + "\n";
      out << fmt("%-4.0f", static_cast<double>(cutoffs[c].k)) << fmt("%4.0f", static_cast<double>(repeats))
          << fmt("%9.3f", mean[0]) << fmt("%12.2f", 100 * mean[1]) << fmt("%13.2f", 100 * mean[2]) << '\n';
    } else {
      csv += K + ",1," + fmt("%.6f", mean[1]) + "," + std::to_string(n) + "\n";
      out << fmt("%-4.0f", static_cast<double>(cutoffs[c].k)) << "   1" << fmt("%12.2f", 100 * mean[1])
          << '\n';
    }
  }
  const fs::path out_dir = config.get("out_dir");
  write_text(out_dir / "diversity.csv", csv);
  log << "queries: " << n << " (excluded without relevant documents: " << L - n << ")\n";
  return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  SelfCheckOptions options;
  options.trials = o.trials;
  options.seed = o.seed;
  bool ok = true;
  for (const CheckLine& line : run_all_checks(options)) {
    ok = ok && line.passed;
    std::string name = line.suite + "/" + line.name;
    name.resize(std::max<std::size_t>(name.size(), 34), ' ');
    out << (line.passed ? "pass  " : "FAIL  ") << name;
    if (line.suite != "schedule") out << "worst rel err " << fmt("%.3e", line.worst);
    out << (line.detail.empty() ? "" : "  " + line.detail) << '\n';
  }
  out << (ok ? "all checks passed\n" : "gradient or schedule checks FAILED\n");
  return ok ? kExitOk : kExitFailure;
}

}  // namespace denoiserank::cli
