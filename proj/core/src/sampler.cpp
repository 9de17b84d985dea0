#include "denoiserank/sampler.hpp"

#include <cmath>
#include <string>

#include "denoiserank/error.hpp"
#include "denoiserank/metrics.hpp"
#include "denoiserank/random.hpp"

namespace denoiserank {

std::vector<int> stride_schedule(int timesteps, int steps) {
  if (timesteps < 1) throw ContractError("stride_schedule: T must be >= 1");
  if (steps < 1 || steps > timesteps) {
    throw ContractError("reverse steps " + std::to_string(steps) + " outside 1.." +
                        std::to_string(timesteps));
  }
  if (steps == 1) return {timesteps};
  std::vector<int> out(static_cast<std::size_t>(steps));
  const double stride = static_cast<double>(timesteps - 1) / (steps - 1);
  for (int i = 0; i < steps; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(timesteps - i * stride));
  }
  return out;
}

ScheduleTable effective_schedule(const ScheduleTable& full, std::span<const int> descending) {
  std::vector<double> alpha_bar;
  alpha_bar.reserve(descending.size());
  for (auto it = descending.rbegin(); it != descending.rend(); ++it) {
    alpha_bar.push_back(full.alpha_bar(*it));
  }
  return ScheduleTable::from_alpha_bar(std::move(alpha_bar), full.spec());
}

RankResult rank_query(const QueryGroup& group, const DenoiseModel& model,
                      const ScheduleTable& table, const SamplerConfig& config,
                      std::uint64_t stream) {
  if (!(model.schedule() == table.spec())) {
    throw IncompatibleError("model was trained for schedule " +
                            std::string(schedule_name(model.schedule().kind)) + "/" +
                            std::to_string(model.schedule().timesteps) + " but sampling uses " +
                            std::string(schedule_name(table.spec().kind)) + "/" +
                            std::to_string(table.spec().timesteps));
  }
  const std::size_t n = group.size();
  if (n == 0) throw ContractError("rank_query: empty query list");
  const std::size_t k = model.config().k;
  if (group.docs.front().features.size() != k) {
    throw IncompatibleError("query " + std::to_string(group.qid) + " has " +
                            std::to_string(group.docs.front().features.size()) +
                            " features, model expects " + std::to_string(k));
  }

  const int T = table.timesteps();
  const auto visited = stride_schedule(T, config.resolved_steps(T));
  const ScheduleTable eff = effective_schedule(table, visited);

  ad::NoGradGuard no_grad;
  Rng rng = make_stream(config.seed, stream);
  RankResult result;
  result.initial_noise.resize(n, 0.0);
  if (!config.zero_init) {
    for (auto& v : result.initial_noise) v = standard_normal(rng);
  }

  const ad::Tensor features = ad::Tensor::constant({n, k}, group.feature_matrix());
  const ForwardMode eval{false, nullptr};
  const ad::Tensor H = model.encode(features, {}, eval);

  std::vector<double> y = result.initial_noise;
  std::vector<double> y0_hat;
  const int S = static_cast<int>(visited.size());
  for (int j = S; j >= 1; --j) {
    const int t = visited[static_cast<std::size_t>(S - j)];
    const ad::Tensor pred = model.denoise(H, y, t, eval);
    y0_hat.assign(pred.data().begin(), pred.data().end());
    if (j == 1) break;
    Posterior post = posterior(y, y0_hat, j, eff);
    const double sd = config.zero_variance ? 0.0 : std::sqrt(post.variance);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = config.zero_variance ? 0.0 : standard_normal(rng);
      post.mean[i] += sd * z;
    }
    y = std::move(post.mean);
  }
  result.scores = std::move(y0_hat);
  result.order = ranking_order(result.scores);
  return result;
}

std::vector<RankResult> rank_query_repeated(const QueryGroup& group, const DenoiseModel& model,
                                            const ScheduleTable& table,
                                            const SamplerConfig& config, std::size_t repeats,
                                            std::uint64_t stream) {
  if (repeats < 1) throw ContractError("rank_query_repeated: need at least one repetition");
  std::vector<RankResult> runs;
  runs.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    SamplerConfig run = config;
    if (r > 0) run.seed = mix_seed(config.seed ^ mix_seed(0xD1B54A32D192ED03ULL * r));
    runs.push_back(rank_query(group, model, table, run, stream));
  }
  return runs;
}

}  // namespace denoiserank
