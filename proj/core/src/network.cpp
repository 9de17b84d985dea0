#include "denoiserank/network.hpp"

#include <cmath>
#include <sstream>

#include "binary_io.hpp"
#include "denoiserank/error.hpp"
#include "denoiserank/letor.hpp"

namespace denoiserank {

namespace {

using ad::Tensor;

constexpr char kCheckpointMagic[8] = {'D', 'R', 'N', 'K', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kMaskedScore = -1e9;

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = dist(rng);
  return Tensor::parameter({fan_in, fan_out}, std::move(w));
}

Tensor filled(std::size_t n, double value) {
  return Tensor::parameter({n}, std::vector<double>(n, value));
}

std::string block_name(std::size_t b, const char* part) {
  return "block" + std::to_string(b) + "." + part;
}

}  // namespace

void ModelConfig::validate() const {
  if (k == 0) throw ConfigError("model: feature dimension k must be positive");
  if (d_model == 0) throw ConfigError("model: d_model must be positive");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("model: d_model (" + std::to_string(d_model) +
                      ") must be divisible by heads (" + std::to_string(heads) + ")");
  }
  if (denoise_layers < 2) {
    throw ConfigError("model: denoise_layers must be >= 2 (input and output layers)");
  }
  if (ffn_multiplier == 0) throw ConfigError("model: ffn_multiplier must be positive");
  if (!(dropout >= 0.0 && dropout <= 0.8)) throw ConfigError("model: dropout must be in [0, 0.8]");
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << "k=" << c.k << " d_model=" << c.d_model << " heads=" << c.heads << " blocks=" << c.blocks
     << " denoise_layers=" << c.denoise_layers << " ffn_multiplier=" << c.ffn_multiplier
     << " dropout=" << c.dropout << " use_attention=" << (c.use_attention ? 1 : 0);
  return os.str();
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_stream(seed, 0x1417);
  const std::size_t d = config.d_model;
  const std::size_t ffn = d * config.ffn_multiplier;
  ModelParams p;
  p.add("input_proj.weight", xavier(config.k, d, rng));
  p.add("input_proj.bias", filled(d, 0.0));
  for (std::size_t b = 0; b < config.blocks; ++b) {
    if (config.use_attention) {
      p.add(block_name(b, "ln1.gamma"), filled(d, 1.0));
      p.add(block_name(b, "ln1.beta"), filled(d, 0.0));
      for (const char* m : {"attn.q", "attn.k", "attn.v", "attn.o"}) {
        p.add(block_name(b, m) + ".weight", xavier(d, d, rng));
        p.add(block_name(b, m) + ".bias", filled(d, 0.0));
      }
    }
    p.add(block_name(b, "ln2.gamma"), filled(d, 1.0));
    p.add(block_name(b, "ln2.beta"), filled(d, 0.0));
    p.add(block_name(b, "ffn1.weight"), xavier(d, ffn, rng));
    p.add(block_name(b, "ffn1.bias"), filled(ffn, 0.0));
    p.add(block_name(b, "ffn2.weight"), xavier(ffn, d, rng));
    p.add(block_name(b, "ffn2.bias"), filled(d, 0.0));
  }
  p.add("final_ln.gamma", filled(d, 1.0));
  p.add("final_ln.beta", filled(d, 0.0));
  // Bias 1 keeps the multiplicative timestep gate close to identity at start.
  p.add("time_proj.weight", xavier(d, d, rng));
  p.add("time_proj.bias", filled(d, 1.0));
  for (std::size_t j = 0; j < config.denoise_layers; ++j) {
    const std::size_t in = j == 0 ? d + 1 : d;
    const std::size_t out = j + 1 == config.denoise_layers ? kNumGrades : d;
    const std::string name = "denoise" + std::to_string(j);
    p.add(name + ".weight", xavier(in, out, rng));
    p.add(name + ".bias", filled(out, 0.0));
  }
  return p;
}

void ModelParams::add(std::string name, ad::Tensor tensor) {
  if (index_.contains(name)) throw ContractError("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(tensor));
}

const ad::Tensor& ModelParams::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter " + std::string(name));
  return entries_[it->second].second;
}

bool ModelParams::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::vector<ad::Tensor> ModelParams::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& [name, t] : entries_) {
    out.add(name, Tensor::parameter(t.shape(), std::vector<double>(t.data().begin(), t.data().end())));
  }
  return out;
}

std::vector<double> sinusoidal_embedding(int t, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
  return out;
}

DenoiseModel::DenoiseModel(ModelConfig config, ScheduleSpec schedule, std::uint64_t seed)
    : config_(config), schedule_(schedule), params_(ModelParams::initialize(config, seed)) {}

DenoiseModel::DenoiseModel(ModelConfig config, ScheduleSpec schedule, ModelParams params)
    : config_(config), schedule_(schedule), params_(std::move(params)) {
  config_.validate();
  const ModelParams reference = ModelParams::initialize(config_, 0);
  if (reference.size() != params_.size()) {
    throw IncompatibleError("parameter registry does not match " + describe(config_));
  }
  for (const auto& [name, t] : reference.entries()) {
    if (!params_.contains(name) || params_.get(name).shape() != t.shape()) {
      throw IncompatibleError("parameter " + name + " missing or misshaped for " + describe(config_));
    }
  }
}

Tensor DenoiseModel::linear(const Tensor& x, const std::string& prefix) const {
  return ad::add(ad::matmul(x, params_.get(prefix + ".weight")), params_.get(prefix + ".bias"));
}

Tensor DenoiseModel::attention(const Tensor& x, const Tensor& mask_bias, std::size_t b) const {
  const std::size_t dh = config_.d_model / config_.heads;
  const Tensor q = linear(x, block_name(b, "attn.q"));
  const Tensor k = linear(x, block_name(b, "attn.k"));
  const Tensor v = linear(x, block_name(b, "attn.v"));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const Tensor qh = ad::slice_cols(q, h * dh, dh);
    const Tensor kh = ad::slice_cols(k, h * dh, dh);
    const Tensor vh = ad::slice_cols(v, h * dh, dh);
    Tensor scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    if (mask_bias.defined()) scores = ad::add(scores, mask_bias);
    heads.push_back(ad::matmul(ad::softmax(scores), vh));
  }
  const Tensor merged = heads.size() == 1 ? heads[0] : ad::concat_cols(heads);
  return linear(merged, block_name(b, "attn.o"));
}

Tensor DenoiseModel::encode(const Tensor& features, std::span<const std::uint8_t> mask,
                            ForwardMode mode) const {
  if (features.rank() != 2 || features.cols() != config_.k) {
    throw ShapeError("encode: expected n x " + std::to_string(config_.k) + " features, got " +
                     ad::shape_string(features.shape()));
  }
  const std::size_t n = features.rows();
  if (n == 0) throw ShapeError("encode: empty document list");
  if (!mask.empty() && mask.size() != n) {
    throw ShapeError("encode: mask has " + std::to_string(mask.size()) + " entries for " +
                     std::to_string(n) + " documents");
  }
  const double p = config_.dropout;
  if (mode.training && p > 0.0 && mode.rng == nullptr) {
    throw ContractError("encode: training with dropout requires an rng");
  }
  static thread_local Rng unused;
  Rng& rng = mode.rng ? *mode.rng : unused;

  Tensor mask_bias;
  if (config_.use_attention && !mask.empty()) {
    bool any_padded = false;
    std::vector<double> bias(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) continue;
      any_padded = true;
      for (std::size_t i = 0; i < n; ++i) bias[i * n + j] = kMaskedScore;
    }
    if (any_padded) mask_bias = Tensor::constant({n, n}, std::move(bias));
  }

  Tensor x = linear(features, "input_proj");
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    if (config_.use_attention) {
      const Tensor h = ad::layer_norm(x, params_.get(block_name(b, "ln1.gamma")),
                                      params_.get(block_name(b, "ln1.beta")));
      x = ad::add(x, ad::dropout(attention(h, mask_bias, b), p, mode.training, rng));
    }
    const Tensor h = ad::layer_norm(x, params_.get(block_name(b, "ln2.gamma")),
                                    params_.get(block_name(b, "ln2.beta")));
    const Tensor f = linear(ad::relu(linear(h, block_name(b, "ffn1"))), block_name(b, "ffn2"));
    x = ad::add(x, ad::dropout(f, p, mode.training, rng));
  }
  return ad::layer_norm(x, params_.get("final_ln.gamma"), params_.get("final_ln.beta"));
}

Tensor DenoiseModel::timestep_embedding(int t) const {
  if (t < 1 || t > schedule_.timesteps) {
    throw IndexError("timestep " + std::to_string(t) + " outside 1.." +
                     std::to_string(schedule_.timesteps));
  }
  const Tensor s = Tensor::constant({config_.d_model}, sinusoidal_embedding(t, config_.d_model));
  return ad::add(ad::matmul(s, params_.get("time_proj.weight")), params_.get("time_proj.bias"));
}

Tensor DenoiseModel::grade_weights(const Tensor& H, std::span<const double> y_t, int t,
                                   ForwardMode mode) const {
  if (H.rank() != 2 || H.cols() != config_.d_model) {
    throw ShapeError("denoise: expected n x " + std::to_string(config_.d_model) + " context, got " +
                     ad::shape_string(H.shape()));
  }
  const std::size_t n = H.rows();
  if (y_t.size() != n) {
    throw ShapeError("denoise: " + std::to_string(y_t.size()) + " noisy labels for " +
                     std::to_string(n) + " documents");
  }
  const double p = config_.dropout;
  if (mode.training && p > 0.0 && mode.rng == nullptr) {
    throw ContractError("denoise: training with dropout requires an rng");
  }
  static thread_local Rng unused;
  Rng& rng = mode.rng ? *mode.rng : unused;

  const Tensor t_emb = timestep_embedding(t);
  const Tensor labels = Tensor::constant({n}, std::vector<double>(y_t.begin(), y_t.end()));
  Tensor h = ad::concat_cols({H, labels});
  const std::size_t layers = config_.denoise_layers;
  for (std::size_t j = 0; j < layers; ++j) {
    Tensor z = ad::dropout(ad::softplus(linear(h, "denoise" + std::to_string(j))), p,
                           mode.training, rng);
    h = j + 1 < layers ? ad::mul(z, t_emb) : z;
  }
  return ad::softmax(h);
}

Tensor DenoiseModel::denoise(const Tensor& H, std::span<const double> y_t, int t,
                             ForwardMode mode) const {
  static const Tensor grades = Tensor::constant({kNumGrades}, {0.0, 1.0, 2.0, 3.0, 4.0});
  return ad::matmul(grade_weights(H, y_t, t, mode), grades);
}

std::vector<std::uint8_t> serialize_checkpoint(const DenoiseModel& model) {
  const ModelConfig& c = model.config();
  detail::ByteWriter w;
  w.put_raw(std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(c.k);
  w.put<std::uint64_t>(c.d_model);
  w.put<std::uint64_t>(c.heads);
  w.put<std::uint64_t>(c.blocks);
  w.put<std::uint64_t>(c.denoise_layers);
  w.put<std::uint64_t>(c.ffn_multiplier);
  w.put<double>(c.dropout);
  w.put<std::uint8_t>(c.use_attention ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.schedule().kind));
  w.put<std::int32_t>(model.schedule().timesteps);
  w.put<std::uint64_t>(model.params().size());
  for (const auto& [name, t] : model.params().entries()) {
    w.put_string(name);
    w.put<std::uint64_t>(t.rank());
    for (auto dim : t.shape()) w.put<std::uint64_t>(dim);
    w.put_doubles(t.data());
  }
  w.seal();
  return std::move(w.bytes());
}

DenoiseModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < sizeof(kCheckpointMagic) ||
      r.get_raw(sizeof(kCheckpointMagic)) !=
          std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw IncompatibleError("not a checkpoint (bad magic bytes)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IncompatibleError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  ModelConfig c;
  c.k = r.get<std::uint64_t>();
  c.d_model = r.get<std::uint64_t>();
  c.heads = r.get<std::uint64_t>();
  c.blocks = r.get<std::uint64_t>();
  c.denoise_layers = r.get<std::uint64_t>();
  c.ffn_multiplier = r.get<std::uint64_t>();
  c.dropout = r.get<double>();
  c.use_attention = r.get<std::uint8_t>() != 0;
  ScheduleSpec s;
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(ScheduleKind::kSqrt)) {
    throw CorruptionError("checkpoint: unknown schedule kind");
  }
  s.kind = static_cast<ScheduleKind>(kind);
  s.timesteps = r.get<std::int32_t>();
  const auto count = r.get<std::uint64_t>();
  r.check_count(count, sizeof(std::uint64_t) * 2);
  ModelParams params;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto rank = r.get<std::uint64_t>();
    if (rank > 2) throw CorruptionError("checkpoint: parameter " + name + " has rank > 2");
    ad::Shape shape(rank);
    for (auto& dim : shape) dim = r.get<std::uint64_t>();
    const std::size_t numel = ad::shape_numel(shape);
    r.check_count(numel, sizeof(double));
    std::vector<double> values(numel);
    r.get_doubles(values);
    params.add(std::move(name), ad::Tensor::parameter(std::move(shape), std::move(values)));
  }
  r.verify_seal();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
  return DenoiseModel(c, s, std::move(params));
}

void save_checkpoint(const DenoiseModel& model, const std::filesystem::path& path) {
  detail::write_file_bytes(path, serialize_checkpoint(model));
}

DenoiseModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file_bytes(path));
}

ModelParams load_params(const std::filesystem::path& path, const ModelConfig& expected_config,
                        const ScheduleSpec& expected_schedule) {
  DenoiseModel model = load_checkpoint(path);
  if (!(model.config() == expected_config)) {
    throw IncompatibleError("checkpoint config {" + describe(model.config()) +
                            "} does not match expected {" + describe(expected_config) + "}");
  }
  if (!(model.schedule() == expected_schedule)) {
    throw IncompatibleError(
        "checkpoint schedule " + std::string(schedule_name(model.schedule().kind)) + "/T=" +
        std::to_string(model.schedule().timesteps) + " does not match expected " +
        std::string(schedule_name(expected_schedule.kind)) + "/T=" +
        std::to_string(expected_schedule.timesteps));
  }
  return std::move(model.params());
}

}  // namespace denoiserank
