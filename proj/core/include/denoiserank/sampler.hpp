#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "denoiserank/letor.hpp"
#include "denoiserank/network.hpp"
#include "denoiserank/schedule.hpp"

namespace denoiserank {

struct SamplerConfig {
  int reverse_steps = 0;  // 0 means every timestep of the schedule
  std::uint64_t seed = 0;
  // Debug switches isolating the two sources of randomness.
  bool zero_variance = false;  // posterior steps take the mean without noise
  bool zero_init = false;      // Y_T = 0 instead of a standard normal draw

  int resolved_steps(int timesteps) const { return reverse_steps == 0 ? timesteps : reverse_steps; }
};

// Visited timesteps, strictly descending from T to 1 and uniformly spaced:
// t_i = round(T - i (T - 1) / (steps - 1)). steps == 1 gives {T}.
std::vector<int> stride_schedule(int timesteps, int steps);

// Schedule over the visited subsequence: alpha_bar'_j = alpha_bar_{s_j} for the
// visited steps in ascending order s_1 < ... < s_S.
ScheduleTable effective_schedule(const ScheduleTable& full, std::span<const int> descending);

struct RankResult {
  std::vector<double> scores;      // final y0_hat
  std::vector<std::size_t> order;  // by score descending, ties by index
  std::vector<double> initial_noise;
};

// Reverse diffusion for one query list. `stream` separates the random draws of
// different queries so results do not depend on evaluation order.
RankResult rank_query(const QueryGroup& group, const DenoiseModel& model,
                      const ScheduleTable& table, const SamplerConfig& config,
                      std::uint64_t stream);

// M runs with distinct random streams, in run order. Run 0 equals rank_query.
std::vector<RankResult> rank_query_repeated(const QueryGroup& group, const DenoiseModel& model,
                                            const ScheduleTable& table,
                                            const SamplerConfig& config, std::size_t repeats,
                                            std::uint64_t stream);

}  // namespace denoiserank
