#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "denoiserank/letor.hpp"
#include "denoiserank/losses.hpp"
#include "denoiserank/network.hpp"
#include "denoiserank/optimizer.hpp"
#include "denoiserank/random.hpp"
#include "denoiserank/schedule.hpp"

namespace denoiserank {

struct TrainConfig {
  int epochs = 200;
  std::size_t batch_size = 128;  // queries per optimizer step
  double lr = 1e-3;
  LossSpec loss{LossKind::kListNet};
  int eval_every = 10;
  std::uint64_t seed = 0;
  std::size_t list_cap = 512;  // documents per list during training
  ScheduleSpec schedule;
  ModelConfig model;
  AdamWConfig adamw;
  int valid_reverse_steps = 0;  // 0: every timestep
  std::size_t workers = 1;      // validation threads

  void validate() const;
};

// Per-query randomness of one training step.
struct QueryDraw {
  int t = 1;
  std::vector<double> eps;
};

struct TrainState {
  DenoiseModel model;
  AdamW optimizer;
  Rng rng;
  int epoch = 0;
  double best_ndcg10 = -1.0;
  int best_epoch = 0;
  std::filesystem::path best_checkpoint;

  TrainState(const TrainConfig& config);
};

// Uniform on {1..T}.
int sample_timestep(Rng& rng, int timesteps);

QueryDraw draw_query(Rng& rng, std::size_t n, int timesteps);

// Mean over queries of the loss between y0 and the denoiser's prediction from
// q_sample(y0, t, eps). Non-finite per-query losses raise NumericError naming
// the query id.
ad::Tensor batch_loss(const DenoiseModel& model, const ScheduleTable& table,
                      const std::vector<const QueryGroup*>& batch,
                      const std::vector<QueryDraw>& draws, const LossSpec& loss, ForwardMode mode);

// One optimizer step on fixed draws; returns the batch loss before the update.
double train_step_with(const std::vector<const QueryGroup*>& batch,
                       const std::vector<QueryDraw>& draws, TrainState& state,
                       const ScheduleTable& table, const TrainConfig& config);

// Draws timesteps and noise from state.rng, then steps.
double train_step(const std::vector<const QueryGroup*>& batch, TrainState& state,
                  const ScheduleTable& table, const TrainConfig& config);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> valid_ndcg10;
};

std::string to_jsonl(const EpochLog& entry);

struct FitResult {
  std::vector<EpochLog> log;
  double best_ndcg10 = -1.0;
  int best_epoch = 0;
  std::filesystem::path best_checkpoint;  // empty when no output directory
  std::optional<DenoiseModel> best_model;
  std::optional<DenoiseModel> final_model;
};

// Mean NDCG@10 of the sampler over the queries of `ds` that have a relevant
// document.
double validation_ndcg10(const DenoiseModel& model, const Dataset& ds, int reverse_steps,
                         std::uint64_t seed, std::size_t workers);

// Full training loop. Writes best.ckpt and train_log.jsonl under out_dir when
// it is non-empty.
FitResult fit(const Dataset& train, const Dataset& valid, const TrainConfig& config,
              const std::filesystem::path& out_dir = {},
              const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace denoiserank
