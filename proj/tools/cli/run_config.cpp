#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "denoiserank/error.hpp"

namespace denoiserank::cli {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

const KeySpec* find_key(std::string_view key) {
  for (const auto& spec : config_schema()) {
    if (spec.key == key) return &spec;
  }
  return nullptr;
}

bool parse_int(std::string_view text, long long& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_real(const std::string& text, double& out) {
  if (text.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(text, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == text.size() && std::isfinite(out);
}

bool parse_bool(std::string_view text, bool& out) {
  const std::string v = lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

// Canonical spelling, so snapshots compare equal regardless of input form.
std::string normalize_value(const KeySpec& spec, const std::string& value) {
  auto bad = [&](const char* expected) {
    return ConfigError("config key '" + spec.key + "': '" + value + "' is not " + expected);
  };
  switch (spec.kind) {
    case ValueKind::kInt: {
      long long v = 0;
      if (!parse_int(value, v)) throw bad("an integer");
      return std::to_string(v);
    }
    case ValueKind::kCount: {
      long long v = 0;
      if (!parse_int(value, v) || v < 0) throw bad("a non-negative integer");
      return std::to_string(v);
    }
    case ValueKind::kReal: {
      double v = 0;
      if (!parse_real(value, v)) throw bad("a finite number");
      return value;
    }
    case ValueKind::kBool: {
      bool v = false;
      if (!parse_bool(value, v)) throw bad("a boolean");
      return v ? "true" : "false";
    }
    case ValueKind::kText:
      return value;
    case ValueKind::kLoss:
      return std::string(loss_name(parse_loss_kind(value)));
    case ValueKind::kSchedule:
      return std::string(schedule_name(parse_schedule_kind(value)));
    case ValueKind::kCutoffs: {
      std::string out;
      for (const Cutoff& c : parse_cutoffs(value)) out += (out.empty() ? "" : ",") + c.label();
      return out;
    }
  }
  return value;
}

std::size_t as_size(long long v) { return static_cast<std::size_t>(v); }

}  // namespace

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema{
      {"train_cache", ValueKind::kText, "", "prepared training split"},
      {"valid_cache", ValueKind::kText, "", "prepared validation split"},
      {"test_cache", ValueKind::kText, "", "prepared test split"},
      {"out_dir", ValueKind::kText, "run", "directory for checkpoints, logs and reports"},
      {"epochs", ValueKind::kCount, "200", "training epochs"},
      {"batch_size", ValueKind::kCount, "128", "queries per optimizer step"},
      {"lr", ValueKind::kReal, "0.001", "learning rate"},
      {"loss", ValueKind::kLoss, "listnet", "mse | rmse | ranknet | ndcgloss2pp | approxndcg | listnet"},
      {"loss_temperature", ValueKind::kReal, "1", "ApproxNDCG smoothing temperature"},
      {"loss_mu", ValueKind::kReal, "10", "NDCGLoss2++ delta weight"},
      {"loss_sigma", ValueKind::kReal, "1", "NDCGLoss2++ logistic scale"},
      {"eval_every", ValueKind::kCount, "10", "epochs between validation passes"},
      {"seed", ValueKind::kCount, "0", "random seed"},
      {"list_cap", ValueKind::kCount, "512", "documents kept per list during training"},
      {"valid_reverse_steps", ValueKind::kCount, "0", "reverse steps for validation (0 = all)"},
      {"workers", ValueKind::kCount, "1", "threads for evaluation"},
      {"adamw_beta1", ValueKind::kReal, "0.9", "AdamW first moment decay"},
      {"adamw_beta2", ValueKind::kReal, "0.999", "AdamW second moment decay"},
      {"adamw_eps", ValueKind::kReal, "1e-8", "AdamW epsilon"},
      {"weight_decay", ValueKind::kReal, "0.01", "AdamW decoupled weight decay"},
      {"schedule", ValueKind::kSchedule, "trunclinear", "linear | trunclinear | cosine | sqrt"},
      {"timesteps", ValueKind::kCount, "1000", "diffusion steps T"},
      {"d_model", ValueKind::kCount, "64", "encoder width"},
      {"heads", ValueKind::kCount, "4", "attention heads"},
      {"blocks", ValueKind::kCount, "3", "encoder blocks"},
      {"denoise_layers", ValueKind::kCount, "2", "denoising feed-forward layers"},
      {"ffn_multiplier", ValueKind::kCount, "4", "encoder feed-forward width multiplier"},
      {"dropout", ValueKind::kReal, "0.1", "dropout probability"},
      {"use_attention", ValueKind::kBool, "true", "self-attention in the encoder"},
      {"reverse_steps", ValueKind::kCount, "0", "reverse steps at inference (0 = all)"},
      {"repeat", ValueKind::kCount, "10", "repeated inferences for diversity"},
      {"zero_variance", ValueKind::kBool, "false", "posterior steps without noise"},
      {"zero_init", ValueKind::kBool, "false", "start reverse process from zeros"},
      {"cutoffs", ValueKind::kCutoffs, "1,3,5,10,20,ALL", "metric cutoffs"},
      {"diversity_cutoffs", ValueKind::kCutoffs, "1,5,10,20", "RSD cutoffs"},
  };
  return schema;
}

std::vector<std::string> preset_names() { return {"web30k", "yahoo", "istella"}; }

RunConfig::RunConfig() {
  for (const auto& spec : config_schema()) values_[spec.key] = spec.default_value;
}

void RunConfig::apply_preset(std::string_view name) {
  const std::string p = lower(name);
  std::vector<std::pair<const char*, const char*>> values;
  if (p == "web30k") {
    values = {{"schedule", "trunclinear"}, {"timesteps", "1000"}, {"denoise_layers", "2"},
              {"use_attention", "true"}, {"loss", "listnet"}};
  } else if (p == "yahoo") {
    values = {{"schedule", "trunclinear"}, {"timesteps", "1000"}, {"denoise_layers", "4"},
              {"use_attention", "true"}, {"loss", "mse"}};
  } else if (p == "istella") {
    values = {{"schedule", "trunclinear"}, {"timesteps", "600"}, {"denoise_layers", "8"},
              {"use_attention", "true"}, {"loss", "mse"}};
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (web30k, yahoo, istella)");
  }
  for (const auto& [k, v] : values) set(k, v);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw ConfigError("unknown config key '" + std::string(key) + "'");
  values_[spec->key] = normalize_value(*spec, trim(value));
}

void RunConfig::assign(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

long long RunConfig::get_int(std::string_view key) const {
  long long v = 0;
  parse_int(get(key), v);
  return v;
}

double RunConfig::get_real(std::string_view key) const {
  double v = 0;
  parse_real(get(key), v);
  return v;
}

bool RunConfig::get_bool(std::string_view key) const {
  bool v = false;
  parse_bool(get(key), v);
  return v;
}

std::string RunConfig::snapshot() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  return out.str();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.epochs = static_cast<int>(get_int("epochs"));
  c.batch_size = as_size(get_int("batch_size"));
  c.lr = get_real("lr");
  c.loss.kind = parse_loss_kind(get("loss"));
  c.loss.temperature = get_real("loss_temperature");
  c.loss.mu = get_real("loss_mu");
  c.loss.sigma = get_real("loss_sigma");
  c.eval_every = static_cast<int>(get_int("eval_every"));
  c.seed = static_cast<std::uint64_t>(get_int("seed"));
  c.list_cap = as_size(get_int("list_cap"));
  c.valid_reverse_steps = static_cast<int>(get_int("valid_reverse_steps"));
  c.workers = as_size(get_int("workers"));
  c.adamw.beta1 = get_real("adamw_beta1");
  c.adamw.beta2 = get_real("adamw_beta2");
  c.adamw.eps = get_real("adamw_eps");
  c.adamw.weight_decay = get_real("weight_decay");
  c.schedule.kind = parse_schedule_kind(get("schedule"));
  c.schedule.timesteps = static_cast<int>(get_int("timesteps"));
  c.model.d_model = as_size(get_int("d_model"));
  c.model.heads = as_size(get_int("heads"));
  c.model.blocks = as_size(get_int("blocks"));
  c.model.denoise_layers = as_size(get_int("denoise_layers"));
  c.model.ffn_multiplier = as_size(get_int("ffn_multiplier"));
  c.model.dropout = get_real("dropout");
  c.model.use_attention = get_bool("use_attention");
  return c;
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig s;
  s.reverse_steps = static_cast<int>(get_int("reverse_steps"));
  s.seed = static_cast<std::uint64_t>(get_int("seed"));
  s.zero_variance = get_bool("zero_variance");
  s.zero_init = get_bool("zero_init");
  return s;
}

std::vector<Cutoff> RunConfig::cutoffs() const { return parse_cutoffs(get("cutoffs")); }

std::vector<Cutoff> RunConfig::diversity_cutoffs() const {
  return parse_cutoffs(get("diversity_cutoffs"));
}

}  // namespace denoiserank::cli
