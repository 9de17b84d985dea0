#include "denoiserank/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "denoiserank/error.hpp"

namespace denoiserank {

namespace {

constexpr double kMaxBeta = 0.999;
constexpr double kCosineOffset = 0.008;
constexpr double kSqrtOffset = 1e-4;
// Truncated linear: alpha_bar falls linearly 1 -> kTruncMid over the first
// half, then kTruncMid -> kTruncEnd over the second half.
constexpr double kTruncMid = 0.4;
constexpr double kTruncEnd = 0.005;

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("vector lengths differ: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

// Betas from a decreasing alpha_bar function with f(0) = 1, capped at kMaxBeta.
template <typename F>
std::vector<double> betas_from_alpha_bar_fn(int T, F f) {
  std::vector<double> betas(T);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double cur = f(t);
    double beta = cur > 0.0 ? 1.0 - cur / prev : kMaxBeta;
    betas[t - 1] = std::min(beta, kMaxBeta);
    prev = cur;
  }
  return betas;
}

double checked_alpha_bar(const ScheduleTable& table, int t) {
  if (t < 1 || t > table.timesteps()) {
    throw IndexError("timestep " + std::to_string(t) + " outside 1.." +
                     std::to_string(table.timesteps()));
  }
  return table.alpha_bar(t);
}

}  // namespace

std::string_view schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
      return "linear";
    case ScheduleKind::kTruncatedLinear:
      return "trunclinear";
    case ScheduleKind::kCosine:
      return "cosine";
    case ScheduleKind::kSqrt:
      return "sqrt";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view raw) {
  std::string name(raw);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "trunclinear" || name == "truncated_linear" || name == "truncl" ||
      name == "trunc_lin") {
    return ScheduleKind::kTruncatedLinear;
  }
  if (name == "cosine") return ScheduleKind::kCosine;
  if (name == "sqrt") return ScheduleKind::kSqrt;
  throw ConfigError("unknown noise schedule '" + std::string(raw) + "'");
}

std::vector<double> make_betas(const ScheduleSpec& spec) {
  const int T = spec.timesteps;
  if (T < 1 || T > kMaxTimesteps) {
    throw ContractError("timesteps must be in 1.." + std::to_string(kMaxTimesteps) + ", got " +
                        std::to_string(T));
  }
  std::vector<double> betas;
  switch (spec.kind) {
    case ScheduleKind::kLinear: {
      // 1e-4 .. 0.02 at T = 1000, rescaled by 1000/T so that every T ends
      // in near-isotropic noise.
      const double scale = 1000.0 / T;
      const double lo = 1e-4 * scale;
      const double hi = 0.02 * scale;
      betas.resize(T);
      for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 1.0 : static_cast<double>(t - 1) / (T - 1);
        betas[t - 1] = std::min(lo + (hi - lo) * frac, kMaxBeta);
      }
      break;
    }
    case ScheduleKind::kTruncatedLinear: {
      const double half = T / 2.0;
      betas = betas_from_alpha_bar_fn(T, [&](int t) {
        if (t <= half) return 1.0 - (1.0 - kTruncMid) * (t / half);
        return kTruncMid - (kTruncMid - kTruncEnd) * ((t - half) / (T - half));
      });
      break;
    }
    case ScheduleKind::kCosine: {
      auto f = [&](double t) {
        const double c = std::cos(((t / T + kCosineOffset) / (1.0 + kCosineOffset)) *
                                  std::numbers::pi / 2.0);
        return c * c;
      };
      const double f0 = f(0.0);
      betas = betas_from_alpha_bar_fn(T, [&](int t) { return f(t) / f0; });
      break;
    }
    case ScheduleKind::kSqrt: {
      betas = betas_from_alpha_bar_fn(
          T, [&](int t) { return 1.0 - std::sqrt(static_cast<double>(t) / T + kSqrtOffset); });
      break;
    }
  }
  for (int t = 1; t <= T; ++t) {
    const double b = betas[t - 1];
    if (!(b > 0.0 && b < 1.0)) {
      throw ContractError(std::string(schedule_name(spec.kind)) + " schedule produced beta_" +
                          std::to_string(t) + " = " + std::to_string(b) + " outside (0, 1)");
    }
  }
  return betas;
}

ScheduleTable::ScheduleTable(const ScheduleSpec& spec) : spec_(spec) {
  fill_from_betas(make_betas(spec));
}

ScheduleTable ScheduleTable::from_alpha_bar(std::vector<double> alpha_bar, ScheduleSpec spec) {
  if (alpha_bar.empty()) throw ContractError("empty alpha_bar sequence");
  std::vector<double> betas(alpha_bar.size());
  double prev = 1.0;
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    betas[i] = 1.0 - alpha_bar[i] / prev;
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
      throw ContractError("alpha_bar sequence must be strictly decreasing within (0, 1)");
    }
    prev = alpha_bar[i];
  }
  ScheduleTable table;
  table.spec_ = spec;
  table.spec_.timesteps = static_cast<int>(alpha_bar.size());
  table.fill_from_betas(std::move(betas));
  // Keep the given products exactly rather than their re-multiplied betas.
  table.alpha_bar_ = std::move(alpha_bar);
  for (std::size_t i = 1; i < table.beta_.size(); ++i) {
    table.beta_tilde_[i] =
        (1.0 - table.alpha_bar_[i - 1]) / (1.0 - table.alpha_bar_[i]) * table.beta_[i];
  }
  return table;
}

void ScheduleTable::fill_from_betas(std::vector<double> betas) {
  beta_ = std::move(betas);
  const std::size_t T = beta_.size();
  alpha_.resize(T);
  alpha_bar_.resize(T);
  beta_tilde_.resize(T);
  double prod = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    alpha_[i] = 1.0 - beta_[i];
    const double prev = prod;
    prod *= alpha_[i];
    alpha_bar_[i] = prod;
    beta_tilde_[i] = i == 0 ? 0.0 : (1.0 - prev) / (1.0 - prod) * beta_[i];
  }
}

std::size_t ScheduleTable::index(int t) const {
  if (t < 1 || t > timesteps()) {
    throw IndexError("timestep " + std::to_string(t) + " outside 1.." + std::to_string(timesteps()));
  }
  return static_cast<std::size_t>(t - 1);
}

std::vector<double> q_sample(std::span<const double> y0, int t, std::span<const double> eps,
                             const ScheduleTable& table) {
  check_lengths(y0, eps);
  const double ab = checked_alpha_bar(table, t);
  const double a = std::sqrt(ab);
  const double s = std::sqrt(1.0 - ab);
  std::vector<double> out(y0.size());
  for (std::size_t i = 0; i < y0.size(); ++i) out[i] = a * y0[i] + s * eps[i];
  return out;
}

std::pair<double, double> posterior_coefficients(int t, const ScheduleTable& table) {
  if (t < 2 || t > table.timesteps()) {
    throw ContractError("posterior is defined for 2 <= t <= T, got t = " + std::to_string(t));
  }
  const double ab_t = table.alpha_bar(t);
  const double ab_prev = table.alpha_bar(t - 1);
  const double beta = table.beta(t);
  const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
  const double ct = std::sqrt(table.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab_t);
  return {c0, ct};
}

Posterior posterior(std::span<const double> y_t, std::span<const double> y0, int t,
                    const ScheduleTable& table) {
  check_lengths(y_t, y0);
  const auto [c0, ct] = posterior_coefficients(t, table);
  Posterior p;
  p.mean.resize(y_t.size());
  for (std::size_t i = 0; i < y_t.size(); ++i) p.mean[i] = c0 * y0[i] + ct * y_t[i];
  p.variance = table.beta_tilde(t);
  return p;
}

std::vector<double> reconstruct_y0(std::span<const double> y_t, std::span<const double> eps_hat,
                                   int t, const ScheduleTable& table) {
  check_lengths(y_t, eps_hat);
  const double ab = checked_alpha_bar(table, t);
  const double s = std::sqrt(1.0 - ab);
  const double a = std::sqrt(ab);
  std::vector<double> out(y_t.size());
  for (std::size_t i = 0; i < y_t.size(); ++i) out[i] = (y_t[i] - s * eps_hat[i]) / a;
  return out;
}

}  // namespace denoiserank
