#include "denoiserank/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "denoiserank/error.hpp"
#include "denoiserank/gradcheck.hpp"
#include "denoiserank/random.hpp"

namespace denoiserank {

namespace {

using ad::Tensor;

constexpr double kRmseEps = 1e-12;

double gain(double label) { return std::exp2(label) - 1.0; }

double discount(double rank) { return std::log2(1.0 + rank); }

double ideal_dcg(std::span<const double> labels) {
  std::vector<double> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double dcg = 0.0;
  for (std::size_t r = 0; r < sorted.size(); ++r) dcg += gain(sorted[r]) / discount(r + 1.0);
  return dcg;
}

// Pair indicator P[i][j] = 1 for labels[i] > labels[j].
std::vector<double> ordered_pairs(std::span<const double> labels, std::size_t& count) {
  const std::size_t n = labels.size();
  std::vector<double> pairs(n * n, 0.0);
  count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[i] > labels[j]) {
        pairs[i * n + j] = 1.0;
        ++count;
      }
    }
  }
  return pairs;
}

// 1-based positions in the order sorted by score descending, ties by index.
std::vector<std::size_t> score_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> rank(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

Tensor zero() { return Tensor::scalar(0.0); }

Tensor mse(const Tensor& y_hat, std::span<const double> y) {
  const Tensor target = Tensor::constant({y.size()}, std::vector<double>(y.begin(), y.end()));
  const Tensor d = ad::sub(y_hat, target);
  return ad::mean(ad::mul(d, d));
}

Tensor ranknet(const Tensor& y_hat, std::span<const double> y) {
  std::size_t count = 0;
  auto pairs = ordered_pairs(y, count);
  if (count == 0) return zero();
  const std::size_t n = y.size();
  // pairwise_diff gives yhat_j - yhat_i at [i][j].
  const Tensor terms = ad::softplus(ad::pairwise_diff(y_hat));
  return ad::sum(ad::mul(terms, Tensor::constant({n, n}, std::move(pairs))));
}

Tensor listnet(const Tensor& y_hat, std::span<const double> y) {
  const Tensor target = ad::softmax(Tensor::constant({y.size()}, std::vector<double>(y.begin(), y.end())));
  return ad::scale(ad::sum(ad::mul(target.detach(), ad::log(ad::softmax(y_hat)))), -1.0);
}

Tensor approx_ndcg(const Tensor& y_hat, std::span<const double> y, double temperature) {
  const double max_dcg = ideal_dcg(y);
  if (max_dcg <= 0.0) return zero();
  const std::size_t n = y.size();
  std::vector<double> gains(n);
  for (std::size_t i = 0; i < n; ++i) gains[i] = gain(y[i]);
  // pi(i) = 1/2 + sum_j sigmoid((yhat_j - yhat_i) / T)
  const Tensor smooth_rank =
      ad::add_scalar(ad::sum(ad::sigmoid(ad::scale(ad::pairwise_diff(y_hat), 1.0 / temperature)), 1), 0.5);
  const Tensor inv_log = ad::reciprocal(ad::log(ad::add_scalar(smooth_rank, 1.0)));
  const Tensor dcg = ad::sum(ad::mul(inv_log, Tensor::constant({n}, std::move(gains))));
  return ad::scale(dcg, -std::numbers::ln2 / max_dcg);
}

Tensor ndcg_loss2pp(const Tensor& y_hat, std::span<const double> y, double mu, double sigma) {
  std::size_t count = 0;
  auto pairs = ordered_pairs(y, count);
  const double max_dcg = ideal_dcg(y);
  if (count == 0 || max_dcg <= 0.0) return zero();
  const std::size_t n = y.size();
  const auto rank = score_ranks(y_hat.data());
  auto inv_d = [](double r) { return 1.0 / discount(r); };
  std::vector<double> weights(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (pairs[i * n + j] == 0.0) continue;
      const double ri = static_cast<double>(rank[i]);
      const double rj = static_cast<double>(rank[j]);
      const double rho = std::abs(inv_d(ri) - inv_d(rj));
      const double gap = std::abs(ri - rj);
      const double delta = std::abs(inv_d(gap) - inv_d(gap + 1.0));
      const double dg = std::abs(gain(y[i]) - gain(y[j])) / max_dcg;
      weights[i * n + j] = (rho + mu * delta) * dg;
    }
  }
  // -log2 sigmoid(sigma (yhat_i - yhat_j)) = softplus(sigma (yhat_j - yhat_i)) / ln 2
  const Tensor terms = ad::softplus(ad::scale(ad::pairwise_diff(y_hat), sigma));
  return ad::scale(ad::sum(ad::mul(terms, Tensor::constant({n, n}, std::move(weights)))),
                   1.0 / std::numbers::ln2);
}

}  // namespace

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kMse:
      return "mse";
    case LossKind::kRmse:
      return "rmse";
    case LossKind::kRankNet:
      return "ranknet";
    case LossKind::kNdcgLoss2pp:
      return "ndcgloss2pp";
    case LossKind::kApproxNdcg:
      return "approxndcg";
    case LossKind::kListNet:
      return "listnet";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (LossKind k : {LossKind::kMse, LossKind::kRmse, LossKind::kRankNet, LossKind::kNdcgLoss2pp,
                     LossKind::kApproxNdcg, LossKind::kListNet}) {
    if (lower == loss_name(k)) return k;
  }
  if (lower == "ndcgloss2++" || lower == "lambdaloss") return LossKind::kNdcgLoss2pp;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("loss: ApproxNDCG temperature must be > 0");
  if (!(mu >= 0.0)) throw ConfigError("loss: NDCGLoss2++ mu must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("loss: NDCGLoss2++ sigma must be > 0");
}

LossValue ranking_loss(const LossSpec& spec, const Tensor& y_hat, std::span<const double> labels,
                       std::span<const std::uint8_t> mask) {
  if (y_hat.rank() != 1 || y_hat.numel() != labels.size()) {
    throw ShapeError("ranking_loss: predictions " + ad::shape_string(y_hat.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (!mask.empty() && mask.size() != labels.size()) {
    throw ShapeError("ranking_loss: mask length " + std::to_string(mask.size()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  Tensor pred = y_hat;
  std::vector<double> y(labels.begin(), labels.end());
  if (!mask.empty() && std::find(mask.begin(), mask.end(), 0) != mask.end()) {
    std::vector<std::size_t> keep;
    y.clear();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        keep.push_back(i);
        y.push_back(labels[i]);
      }
    }
    if (keep.empty()) return {zero(), true};
    pred = ad::embedding_lookup(y_hat, keep);
  }
  if (y.empty()) return {zero(), true};

  switch (spec.kind) {
    case LossKind::kMse:
      return {mse(pred, y)};
    case LossKind::kRmse:
      return {ad::sqrt(ad::add_scalar(mse(pred, y), kRmseEps))};
    case LossKind::kRankNet:
      return {ranknet(pred, y)};
    case LossKind::kNdcgLoss2pp:
      return {ndcg_loss2pp(pred, y, spec.mu, spec.sigma)};
    case LossKind::kApproxNdcg:
      return {approx_ndcg(pred, y, spec.temperature)};
    case LossKind::kListNet:
      return {listnet(pred, y)};
  }
  throw ContractError("unhandled loss kind");
}

double loss_gradient_check(const LossSpec& spec, std::size_t n, std::size_t trials,
                           std::uint64_t seed) {
  if (n == 0 || n > 8) throw ContractError("loss_gradient_check: n must be in 1..8");
  Rng rng = make_stream(seed, 0x10557);
  std::uniform_real_distribution<double> score(0.0, 4.0);
  std::uniform_int_distribution<int> grade(0, 4);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<double> labels(n);
    // Resample until the list has at least one ordered pair.
    do {
      for (auto& l : labels) l = grade(rng);
    } while (n > 1 && *std::max_element(labels.begin(), labels.end()) ==
                          *std::min_element(labels.begin(), labels.end()));
    std::vector<double> init(n);
    for (auto& v : init) v = score(rng);
    std::vector<Tensor> inputs{Tensor::parameter({n}, init)};
    if (!ranking_loss(spec, inputs[0], labels).value.requires_grad()) continue;
    const auto result = ad::check_gradients(
        [&](const std::vector<Tensor>& in) { return ranking_loss(spec, in[0], labels).value; },
        inputs);
    worst = std::max(worst, result.max_rel_error);
  }
  return worst;
}

}  // namespace denoiserank
