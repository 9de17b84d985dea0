#include "denoiserank/selfcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "denoiserank/gradcheck.hpp"
#include "denoiserank/losses.hpp"
#include "denoiserank/network.hpp"
#include "denoiserank/random.hpp"
#include "denoiserank/schedule.hpp"
#include "denoiserank/tensor.hpp"

namespace denoiserank {

namespace {

using ad::Shape;

CheckLine make_line(std::string suite, std::string name, std::size_t trials) {
  CheckLine line;
  line.suite = std::move(suite);
  line.name = std::move(name);
  line.trials = trials;
  return line;
}

using ad::Tensor;

Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::parameter(shape, std::move(v));
}

// Magnitude in [lo, hi] with a random sign; keeps inputs off kinks and poles.
Tensor away_from_zero(const Shape& shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Tensor::parameter(shape, std::move(v));
}

using Inputs = std::vector<Tensor>;
using MakeInputs = std::function<Inputs(Rng&)>;
using Op = std::function<Tensor(const Inputs&)>;

CheckLine check_op(const std::string& name, const SelfCheckOptions& options, std::uint64_t salt,
                   const MakeInputs& make, const Op& op) {
  CheckLine line = make_line("op", name, options.trials);
  Rng rng = make_stream(options.seed, salt);
  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    Inputs inputs = make(rng);
    Shape out_shape;
    {
      ad::NoGradGuard no_grad;
      out_shape = op(inputs).shape();
    }
    // Random projection to a scalar so every output element contributes.
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(ad::shape_numel(out_shape));
    for (auto& x : w) x = dist(rng);
    const Tensor weights = Tensor::constant(out_shape, std::move(w));
    const auto result = ad::check_gradients(
        [&](const Inputs& in) { return ad::sum(ad::mul(op(in), weights)); }, inputs);
    line.worst = std::max(line.worst, result.max_rel_error);
  }
  line.passed = line.worst < options.tolerance;
  return line;
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::vector<CheckLine> check_autodiff_ops(const SelfCheckOptions& o) {
  std::vector<CheckLine> lines;
  std::uint64_t salt = 100;
  auto add = [&](const std::string& name, const MakeInputs& make, const Op& op) {
    lines.push_back(check_op(name, o, ++salt, make, op));
  };
  auto mat = [](std::size_t r, std::size_t c) {
    return [r, c](Rng& rng) { return Inputs{uniform({r, c}, -2, 2, rng)}; };
  };
  auto pair = [](Shape a, Shape b) {
    return [a, b](Rng& rng) { return Inputs{uniform(a, -2, 2, rng), uniform(b, -2, 2, rng)}; };
  };

  add("matmul", pair({3, 4}, {4, 5}), [](const Inputs& in) { return ad::matmul(in[0], in[1]); });
  add("matmul_vec_mat", pair({4}, {4, 3}), [](const Inputs& in) { return ad::matmul(in[0], in[1]); });
  add("matmul_mat_vec", pair({3, 4}, {4}), [](const Inputs& in) { return ad::matmul(in[0], in[1]); });
  add("transpose", mat(3, 4), [](const Inputs& in) { return ad::transpose(in[0]); });
  add("add", pair({3, 4}, {3, 4}), [](const Inputs& in) { return ad::add(in[0], in[1]); });
  add("add_row_broadcast", pair({3, 4}, {4}), [](const Inputs& in) { return ad::add(in[0], in[1]); });
  add("add_scalar_tensor", pair({3, 4}, {}), [](const Inputs& in) { return ad::add(in[0], in[1]); });
  add("sub", pair({3, 4}, {3, 4}), [](const Inputs& in) { return ad::sub(in[0], in[1]); });
  add("sub_row_broadcast", pair({3, 4}, {4}), [](const Inputs& in) { return ad::sub(in[0], in[1]); });
  add("mul", pair({3, 4}, {3, 4}), [](const Inputs& in) { return ad::mul(in[0], in[1]); });
  add("mul_row_broadcast", pair({3, 4}, {4}), [](const Inputs& in) { return ad::mul(in[0], in[1]); });
  add("mul_scalar_tensor", pair({5}, {}), [](const Inputs& in) { return ad::mul(in[0], in[1]); });
  add("scale", mat(3, 4), [](const Inputs& in) { return ad::scale(in[0], -1.7); });
  add("add_scalar", mat(3, 4), [](const Inputs& in) { return ad::add_scalar(in[0], 0.3); });
  add("concat_cols",
      [](Rng& rng) { return Inputs{uniform({3, 2}, -2, 2, rng), uniform({3}, -2, 2, rng),
                                  uniform({3, 3}, -2, 2, rng)}; },
      [](const Inputs& in) { return ad::concat_cols(in); });
  add("slice_cols", mat(3, 6), [](const Inputs& in) { return ad::slice_cols(in[0], 2, 3); });
  add("reshape", mat(3, 4), [](const Inputs& in) { return ad::reshape(in[0], {2, 6}); });
  add("softplus", mat(3, 4), [](const Inputs& in) { return ad::softplus(in[0]); });
  add("sigmoid", mat(3, 4), [](const Inputs& in) { return ad::sigmoid(in[0]); });
  add("relu", [](Rng& rng) { return Inputs{away_from_zero({3, 4}, 0.1, 2.0, rng)}; },
      [](const Inputs& in) { return ad::relu(in[0]); });
  add("exp", mat(3, 4), [](const Inputs& in) { return ad::exp(in[0]); });
  add("log", [](Rng& rng) { return Inputs{uniform({3, 4}, 0.2, 3.0, rng)}; },
      [](const Inputs& in) { return ad::log(in[0]); });
  add("sqrt", [](Rng& rng) { return Inputs{uniform({3, 4}, 0.2, 3.0, rng)}; },
      [](const Inputs& in) { return ad::sqrt(in[0]); });
  add("reciprocal", [](Rng& rng) { return Inputs{away_from_zero({3, 4}, 0.3, 2.0, rng)}; },
      [](const Inputs& in) { return ad::reciprocal(in[0]); });
  add("softmax_rows", mat(3, 5), [](const Inputs& in) { return ad::softmax(in[0]); });
  add("softmax_vector", [](Rng& rng) { return Inputs{uniform({6}, -2, 2, rng)}; },
      [](const Inputs& in) { return ad::softmax(in[0]); });
  add("sum", mat(3, 4), [](const Inputs& in) { return ad::sum(in[0]); });
  add("mean", mat(3, 4), [](const Inputs& in) { return ad::mean(in[0]); });
  add("sum_axis0", mat(3, 4), [](const Inputs& in) { return ad::sum(in[0], 0); });
  add("sum_axis1", mat(3, 4), [](const Inputs& in) { return ad::sum(in[0], 1); });
  add("mean_axis0", mat(3, 4), [](const Inputs& in) { return ad::mean(in[0], 0); });
  add("mean_axis1", mat(3, 4), [](const Inputs& in) { return ad::mean(in[0], 1); });
  add("layer_norm",
      [](Rng& rng) { return Inputs{uniform({4, 6}, -2, 2, rng), uniform({6}, 0.5, 1.5, rng),
                                  uniform({6}, -0.5, 0.5, rng)}; },
      [](const Inputs& in) { return ad::layer_norm(in[0], in[1], in[2]); });
  add("dropout", mat(4, 5), [](const Inputs& in) {
    Rng fixed(7);  // same mask on every evaluation
    return ad::dropout(in[0], 0.3, true, fixed);
  });
  add("embedding_lookup_rows", mat(3, 4), [](const Inputs& in) {
    static const std::vector<std::size_t> idx{2, 0, 2, 1};
    return ad::embedding_lookup(in[0], idx);
  });
  add("embedding_lookup_vector", [](Rng& rng) { return Inputs{uniform({5}, -2, 2, rng)}; },
      [](const Inputs& in) {
        static const std::vector<std::size_t> idx{4, 1, 1};
        return ad::embedding_lookup(in[0], idx);
      });
  add("pairwise_diff", [](Rng& rng) { return Inputs{uniform({5}, -2, 2, rng)}; },
      [](const Inputs& in) { return ad::pairwise_diff(in[0]); });
  return lines;
}

std::vector<CheckLine> check_losses(const SelfCheckOptions& o) {
  std::vector<CheckLine> lines;
  for (LossKind kind : {LossKind::kMse, LossKind::kRmse, LossKind::kRankNet, LossKind::kNdcgLoss2pp,
                        LossKind::kApproxNdcg, LossKind::kListNet}) {
    CheckLine line = make_line("loss", std::string(loss_name(kind)), o.trials);
    line.worst = loss_gradient_check(LossSpec{kind}, 5, o.trials, o.seed);
    line.passed = line.worst < o.tolerance;
    lines.push_back(line);
  }
  return lines;
}

std::vector<CheckLine> check_model_gradients(const SelfCheckOptions& o) {
  CheckLine line = make_line("model", "encoder+denoiser", o.trials);
  ModelConfig cfg;
  cfg.k = 3;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.blocks = 1;
  cfg.denoise_layers = 3;
  cfg.ffn_multiplier = 2;
  cfg.dropout = 0.0;
  const ScheduleSpec spec{ScheduleKind::kTruncatedLinear, 50};
  Rng rng = make_stream(o.seed, 0x40de1);
  std::uniform_int_distribution<int> step(1, spec.timesteps);
  for (std::size_t trial = 0; trial < o.trials; ++trial) {
    const std::size_t n = 4;
    DenoiseModel model(cfg, spec, mix_seed(o.seed + trial));
    Inputs inputs = model.params().tensors();
    inputs.push_back(uniform({n, cfg.k}, -1.5, 1.5, rng));
    std::vector<double> y_t(n);
    for (auto& y : y_t) y = standard_normal(rng);
    std::vector<double> labels{3, 0, 1, 2};
    const int t = step(rng);
    // Every other trial pads the last row.
    std::vector<std::uint8_t> mask;
    if (trial % 2 == 1) mask = {1, 1, 1, 0};
    const Tensor weights = uniform({n}, -1, 1, rng).detach();
    const auto result = ad::check_gradients(
        [&](const Inputs& in) {
          const Tensor H = model.encode(in.back(), mask, ForwardMode{});
          const Tensor y_hat = model.denoise(H, y_t, t, ForwardMode{});
          const Tensor fit = ranking_loss(LossSpec{LossKind::kListNet}, y_hat, labels, mask).value;
          return ad::add(fit, ad::sum(ad::mul(y_hat, weights)));
        },
        inputs);
    line.worst = std::max(line.worst, result.max_rel_error);
  }
  line.passed = line.worst < o.tolerance;
  return {line};
}

std::vector<CheckLine> check_schedules() {
  std::vector<CheckLine> lines;
  for (ScheduleKind kind : {ScheduleKind::kLinear, ScheduleKind::kTruncatedLinear,
                            ScheduleKind::kCosine, ScheduleKind::kSqrt}) {
    for (int T : {200, 600, 1000}) {
      CheckLine line = make_line("schedule", std::string(schedule_name(kind)) + "/T=" + std::to_string(T), 1);
      std::string problem;
      const ScheduleTable table(ScheduleSpec{kind, T});
      for (int t = 1; t <= T && problem.empty(); ++t) {
        const double b = table.beta(t);
        if (!(b > 0.0 && b < 1.0)) problem = "beta outside (0,1) at t=" + std::to_string(t);
        else if (!(table.alpha_bar(t) < table.alpha_bar(t - 1))) problem = "alpha_bar not decreasing at t=" + std::to_string(t);
        else if (!(table.beta_tilde(t) < b)) problem = "beta_tilde >= beta at t=" + std::to_string(t);
      }
      if (problem.empty() && !(table.alpha_bar(T) < 0.01)) {
        problem = "alpha_bar_T = " + format_double("%.4g", table.alpha_bar(T)) + " >= 0.01";
      }
      if (problem.empty() && kind == ScheduleKind::kTruncatedLinear) {
        const double early = table.alpha_bar(1) - table.alpha_bar(T / 2);
        const double late = table.alpha_bar(T / 2) - table.alpha_bar(T);
        if (!(late < early)) problem = "no fast-then-slow decay";
      }
      line.passed = problem.empty();
      line.detail = problem.empty() ? "alpha_bar_T = " + format_double("%.3g", table.alpha_bar(T)) : problem;
      lines.push_back(line);
    }
  }
  return lines;
}

std::vector<CheckLine> run_all_checks(const SelfCheckOptions& options) {
  std::vector<CheckLine> all = check_autodiff_ops(options);
  for (auto&& group : {check_losses(options), check_model_gradients(options), check_schedules()}) {
    all.insert(all.end(), group.begin(), group.end());
  }
  return all;
}

}  // namespace denoiserank
