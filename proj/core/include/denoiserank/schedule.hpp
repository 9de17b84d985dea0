#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace denoiserank {

enum class ScheduleKind : std::uint8_t { kLinear = 0, kTruncatedLinear = 1, kCosine = 2, kSqrt = 3 };

std::string_view schedule_name(ScheduleKind kind);
// Accepts "linear", "trunclinear" (or "truncated_linear", "truncl"), "cosine", "sqrt".
ScheduleKind parse_schedule_kind(std::string_view name);

inline constexpr int kMaxTimesteps = 10000;

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kTruncatedLinear;
  int timesteps = 1000;

  bool operator==(const ScheduleSpec&) const = default;
};

// Noise schedule tables, indexed by timestep t in 1..T. alpha_bar(0) is 1.
class ScheduleTable {
 public:
  // Builds the table for one of the named schedules.
  explicit ScheduleTable(const ScheduleSpec& spec);

  // Table defined directly by its cumulative products alpha_bar_1..alpha_bar_T
  // (used for strided sampling over a subsequence of timesteps).
  static ScheduleTable from_alpha_bar(std::vector<double> alpha_bar, ScheduleSpec spec);

  const ScheduleSpec& spec() const { return spec_; }
  int timesteps() const { return static_cast<int>(beta_.size()); }

  double beta(int t) const { return beta_[index(t)]; }
  double alpha(int t) const { return alpha_[index(t)]; }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[index(t)]; }
  // Posterior variance; 0 at t = 1.
  double beta_tilde(int t) const { return beta_tilde_[index(t)]; }

  std::span<const double> betas() const { return beta_; }
  std::span<const double> alpha_bars() const { return alpha_bar_; }

 private:
  ScheduleTable() = default;
  void fill_from_betas(std::vector<double> betas);
  std::size_t index(int t) const;

  ScheduleSpec spec_;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> beta_tilde_;
};

// Betas for each schedule kind; throws ContractError if any beta leaves (0, 1).
std::vector<double> make_betas(const ScheduleSpec& spec);

// y_t = sqrt(abar_t) y0 + sqrt(1 - abar_t) eps
std::vector<double> q_sample(std::span<const double> y0, int t, std::span<const double> eps,
                             const ScheduleTable& table);

struct Posterior {
  std::vector<double> mean;
  double variance = 0.0;
};

// Gaussian q(y_{t-1} | y_t, y0) for 2 <= t <= T.
Posterior posterior(std::span<const double> y_t, std::span<const double> y0, int t,
                    const ScheduleTable& table);

// The two scalar weights of the posterior mean: (coefficient on y0, on y_t).
std::pair<double, double> posterior_coefficients(int t, const ScheduleTable& table);

// Inverts q_sample given the noise: y0 = (y_t - sqrt(1 - abar_t) eps) / sqrt(abar_t).
std::vector<double> reconstruct_y0(std::span<const double> y_t, std::span<const double> eps_hat,
                                   int t, const ScheduleTable& table);

}  // namespace denoiserank
