#include "denoiserank/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "denoiserank/error.hpp"
#include "denoiserank/evaluate.hpp"
#include "denoiserank/metrics.hpp"
#include "denoiserank/parallel.hpp"
#include "denoiserank/sampler.hpp"
#include "json.hpp"

namespace denoiserank {

namespace {

// Uniform index in [0, n) from the raw generator output, so that draws do not
// depend on the standard library's distribution implementations.
std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// Random subset of `cap` documents, kept in their original order.
QueryGroup capped(const QueryGroup& group, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(group.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  QueryGroup out;
  out.qid = group.qid;
  out.docs.reserve(cap);
  for (std::size_t i : idx) out.docs.push_back(group.docs[i]);
  return out;
}

void check_compatible(const Dataset& train, const Dataset& valid) {
  if (train.k != valid.k) {
    throw IncompatibleError("train has " + std::to_string(train.k) + " features, validation " +
                            std::to_string(valid.k));
  }
  if (train.norm_stats.has_value() != valid.norm_stats.has_value() ||
      (train.norm_stats && !(*train.norm_stats == *valid.norm_stats))) {
    throw IncompatibleError("validation set was not normalized with the training statistics");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be > 0");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (list_cap < 2) throw ConfigError("train: list_cap must be >= 2");
  if (schedule.timesteps < 1 || schedule.timesteps > kMaxTimesteps) {
    throw ConfigError("train: timesteps must be in 1.." + std::to_string(kMaxTimesteps));
  }
  if (valid_reverse_steps < 0 || valid_reverse_steps > schedule.timesteps) {
    throw ConfigError("train: valid_reverse_steps must be in 0..timesteps");
  }
  loss.validate();
  adamw.validate();
  model.validate();
}

TrainState::TrainState(const TrainConfig& config)
    : model(config.model, config.schedule, mix_seed(config.seed)),
      optimizer(model.params().tensors(), config.lr, config.adamw),
      rng(make_stream(config.seed, 1)) {}

int sample_timestep(Rng& rng, int timesteps) {
  if (timesteps < 1) throw ContractError("sample_timestep: T must be >= 1");
  return 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(timesteps)));
}

QueryDraw draw_query(Rng& rng, std::size_t n, int timesteps) {
  QueryDraw d;
  d.t = sample_timestep(rng, timesteps);
  d.eps.resize(n);
  for (auto& e : d.eps) e = standard_normal(rng);
  return d;
}

ad::Tensor batch_loss(const DenoiseModel& model, const ScheduleTable& table,
                      const std::vector<const QueryGroup*>& batch,
                      const std::vector<QueryDraw>& draws, const LossSpec& loss,
                      ForwardMode mode) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  if (draws.size() != batch.size()) throw ContractError("batch_loss: one draw per query required");
  const std::size_t k = model.config().k;
  ad::Tensor total;
  std::size_t counted = 0;
  for (std::size_t q = 0; q < batch.size(); ++q) {
    const QueryGroup& group = *batch[q];
    const std::size_t n = group.size();
    if (draws[q].eps.size() != n) throw ContractError("batch_loss: noise length mismatch");
    const std::vector<double> y0 = group.labels();
    const std::vector<double> y_t = q_sample(y0, draws[q].t, draws[q].eps, table);
    const std::string where = "query " + std::to_string(group.qid) + " at t=" + std::to_string(draws[q].t);
    LossValue value;
    try {
      const ad::Tensor features = ad::Tensor::constant({n, k}, group.feature_matrix());
      const ad::Tensor H = model.encode(features, {}, mode);
      const ad::Tensor y_hat = model.denoise(H, y_t, draws[q].t, mode);
      value = ranking_loss(loss, y_hat, y0);
    } catch (const DomainError& e) {
      // NaN/Inf reaching an op that checks its input
      throw NumericError(where + ": " + e.what());
    }
    if (value.skipped) continue;
    if (!std::isfinite(value.value.item())) throw NumericError("non-finite loss on " + where);
    total = total.defined() ? ad::add(total, value.value) : value.value;
    ++counted;
  }
  if (counted == 0) return ad::Tensor::scalar(0.0);
  return ad::scale(total, 1.0 / static_cast<double>(counted));
}

double train_step_with(const std::vector<const QueryGroup*>& batch,
                       const std::vector<QueryDraw>& draws, TrainState& state,
                       const ScheduleTable& table, const TrainConfig& config) {
  state.optimizer.zero_grad();
  const ad::Tensor loss =
      batch_loss(state.model, table, batch, draws, config.loss, ForwardMode{true, &state.rng});
  const double value = loss.item();
  if (loss.requires_grad()) {
    ad::backward(loss);
    state.optimizer.step();
  }
  return value;
}

double train_step(const std::vector<const QueryGroup*>& batch, TrainState& state,
                  const ScheduleTable& table, const TrainConfig& config) {
  std::vector<QueryDraw> draws;
  draws.reserve(batch.size());
  for (const QueryGroup* g : batch) draws.push_back(draw_query(state.rng, g->size(), table.timesteps()));
  return train_step_with(batch, draws, state, table, config);
}

std::string to_jsonl(const EpochLog& entry) {
  nlohmann::ordered_json line{{"epoch", entry.epoch}, {"loss", entry.loss}};
  if (entry.valid_ndcg10) line["valid_ndcg10"] = *entry.valid_ndcg10;
  return line.dump();
}

double validation_ndcg10(const DenoiseModel& model, const Dataset& ds, int reverse_steps,
                         std::uint64_t seed, std::size_t workers) {
  const ScheduleTable table(model.schedule());
  SamplerConfig sampler;
  sampler.reverse_steps = reverse_steps;
  sampler.seed = seed;
  const Ranker ranker = [&](const QueryGroup& group, std::size_t index) {
    return rank_query(group, model, table, sampler, index).scores;
  };
  const MetricsReport report = evaluate_dataset(ds, ranker, {Cutoff{10}}, {Metric::kNdcg}, workers);
  if (report.n_queries == 0) {
    throw DataError("validation set has no query with a relevant document");
  }
  return report.mean(Metric::kNdcg, Cutoff{10});
}

FitResult fit(const Dataset& train, const Dataset& valid, const TrainConfig& config_in,
              const std::filesystem::path& out_dir,
              const std::function<void(const EpochLog&)>& on_epoch) {
  TrainConfig config = config_in;
  if (config.model.k == 0) config.model.k = train.k;
  config.validate();
  if (train.groups.empty()) throw EmptyDatasetError("training set has no queries");
  if (config.model.k != train.k) {
    throw IncompatibleError("model expects " + std::to_string(config.model.k) +
                            " features, training data has " + std::to_string(train.k));
  }
  check_compatible(train, valid);

  const ScheduleTable table(config.schedule);
  TrainState state(config);
  const std::size_t scalar_count = state.model.params().scalar_count();

  std::ofstream log_file;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    state.best_checkpoint = out_dir / "best.ckpt";
    log_file.open(out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log_file) throw Error("cannot write " + (out_dir / "train_log.jsonl").string());
  }

  FitResult result;
  std::vector<std::size_t> order(train.groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<ModelParams> best_params;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    state.epoch = epoch;
    shuffle(order, state.rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<QueryGroup> trimmed;
      trimmed.reserve(end - start);
      std::vector<const QueryGroup*> batch;
      for (std::size_t i = start; i < end; ++i) {
        const QueryGroup& g = train.groups[order[i]];
        if (g.size() > config.list_cap) {
          trimmed.push_back(capped(g, config.list_cap, state.rng));
        }
      }
      std::size_t next_trimmed = 0;
      for (std::size_t i = start; i < end; ++i) {
        const QueryGroup& g = train.groups[order[i]];
        batch.push_back(g.size() > config.list_cap ? &trimmed[next_trimmed++] : &g);
      }
      const double loss = train_step(batch, state, table, config);
      loss_sum += loss * static_cast<double>(batch.size());
      loss_count += batch.size();
    }
    if (state.model.params().scalar_count() != scalar_count) {
      throw ContractError("parameter count changed during training");
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(loss_count);
    if (!std::isfinite(entry.loss)) {
      throw NumericError("non-finite mean loss at epoch " + std::to_string(epoch));
    }
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      const double ndcg =
          validation_ndcg10(state.model, valid, config.valid_reverse_steps, config.seed, config.workers);
      if (!std::isfinite(ndcg)) {
        throw NumericError("validation NDCG@10 is not finite at epoch " + std::to_string(epoch));
      }
      entry.valid_ndcg10 = ndcg;
      if (ndcg > state.best_ndcg10) {
        state.best_ndcg10 = ndcg;
        state.best_epoch = epoch;
        best_params = state.model.params().clone();
        if (!state.best_checkpoint.empty()) save_checkpoint(state.model, state.best_checkpoint);
      }
    }
    if (log_file.is_open()) {
      log_file << to_jsonl(entry) << '\n';
      log_file.flush();
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }

  result.best_ndcg10 = state.best_ndcg10;
  result.best_epoch = state.best_epoch;
  result.best_checkpoint = state.best_checkpoint;
  if (best_params) result.best_model.emplace(config.model, config.schedule, std::move(*best_params));
  result.final_model.emplace(config.model, config.schedule, state.model.params().clone());
  return result;
}

}  // namespace denoiserank
